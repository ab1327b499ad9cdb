//! Independent oracles and scene builders shared by the integration tests.
#![allow(dead_code)]

use std::collections::VecDeque;

use circlenav::dynamics::{AgentKinematics, ContactParams, DiffDriveParams, DynamicsModel, HolonomicParams};
use circlenav::geometry::{BoolGrid, Circle, Vec2};
use circlenav::rng::RngKey;

pub fn holonomic(position: Vec2, velocity: Vec2, radius: f64) -> AgentKinematics {
    AgentKinematics {
        position,
        velocity,
        heading: 0.0,
        radius,
        model: DynamicsModel::Holonomic,
    }
}

/// Random bodies packed into a box small enough that many overlap.
/// Coordinates are multiples of 2^-10 when `dyadic` is set.
pub fn random_scene(seed: u64, max_bodies: usize, landmarks_allowed: bool, dyadic: bool) -> (Vec<AgentKinematics>, Vec<Circle>) {
    let mut s = RngKey::from_seed(seed).fold_in(0xace).stream();
    let total = 2 + s.index(max_bodies - 1);
    let n_landmarks = if landmarks_allowed { s.index(total / 2 + 1) } else { 0 };
    let n_agents = total - n_landmarks;
    let side = (total as f64).sqrt() * 0.25;
    let snap = |v: f64| if dyadic { (v * 1024.0).round() / 1024.0 } else { v };
    let point = |s: &mut circlenav::rng::RngStream| Vec2::new(snap(s.uniform(0.0, side)), snap(s.uniform(0.0, side)));
    let mut agents = Vec::with_capacity(n_agents);
    for i in 0..n_agents {
        let p = point(&mut s);
        let r = snap(s.uniform(0.05, 0.15));
        let model = if i % 3 == 2 { DynamicsModel::DiffDrive } else { DynamicsModel::Holonomic };
        agents.push(AgentKinematics {
            position: p,
            velocity: Vec2::new(snap(s.uniform(-0.5, 0.5)), snap(s.uniform(-0.5, 0.5))),
            heading: snap(s.uniform(-3.0, 3.0)),
            radius: r,
            model,
        });
    }
    // occasionally stack two agents exactly
    if n_agents >= 2 && s.bernoulli(0.2) {
        agents[1].position = agents[0].position;
    }
    let landmarks = (0..n_landmarks)
        .map(|_| {
            let p = point(&mut s);
            Circle::new(p, snap(s.uniform(0.05, 0.2)))
        })
        .collect();
    (agents, landmarks)
}

pub fn oracle_softplus(x: f64) -> f64 {
    if x > 0.0 {
        x + (-x).exp().ln_1p()
    } else {
        x.exp().ln_1p()
    }
}

pub fn oracle_quantize(v: f64) -> f64 {
    let scale = 1073741824.0; // 2^30
    (v * scale).round() / scale
}

/// Force on body `i` from body `j` by direct evaluation of the contact law.
pub fn oracle_pair(pi: Vec2, pj: Vec2, d_min: f64, i: usize, j: usize, p: &ContactParams) -> (f64, f64) {
    let dx = pi.x - pj.x;
    let dy = pi.y - pj.y;
    let d = (dx * dx + dy * dy).sqrt();
    if d >= d_min {
        return (0.0, 0.0);
    }
    if d == 0.0 {
        let m = p.f0 * p.k * oracle_softplus(d_min / p.k);
        let sign = if i < j { 1.0 } else { -1.0 };
        return (oracle_quantize(sign * m), 0.0);
    }
    let m = p.f0 * p.k * oracle_softplus((d_min - d) / p.k);
    (oracle_quantize(dx * (m / d)), oracle_quantize(dy * (m / d)))
}

/// All-pairs contact forces on every agent.
pub fn brute_force_forces(agents: &[AgentKinematics], landmarks: &[Circle], p: &ContactParams) -> Vec<Vec2> {
    let n = agents.len();
    let bodies: Vec<(Vec2, f64)> = agents
        .iter()
        .map(|a| (a.position, a.radius))
        .chain(landmarks.iter().map(|l| (l.center, l.radius)))
        .collect();
    (0..n)
        .map(|i| {
            let (mut fx, mut fy) = (0.0, 0.0);
            for (j, &(pj, rj)) in bodies.iter().enumerate() {
                if j == i {
                    continue;
                }
                let (x, y) = oracle_pair(bodies[i].0, pj, bodies[i].1 + rj, i, j, p);
                fx += x;
                fy += y;
            }
            Vec2::new(fx, fy)
        })
        .collect()
}

/// Scalar semi-implicit Euler with norm clamp.
pub fn oracle_holonomic(a: &AgentKinematics, fx: f64, fy: f64, p: &HolonomicParams) -> (f64, f64, f64, f64) {
    let mut vx = a.velocity.x * (1.0 - p.damping) + fx / p.mass * p.dt;
    let mut vy = a.velocity.y * (1.0 - p.damping) + fy / p.mass * p.dt;
    let speed = (vx * vx + vy * vy).sqrt();
    if speed > p.max_speed {
        vx *= p.max_speed / speed;
        vy *= p.max_speed / speed;
    }
    (a.position.x + vx * p.dt, a.position.y + vy * p.dt, vx, vy)
}

/// Scalar unicycle step; returns (x, y, heading) with the heading wrapped
/// into (−π, π].
pub fn oracle_diffdrive(a: &AgentKinematics, u: f64, w: f64, cx: f64, cy: f64, p: &DiffDriveParams) -> (f64, f64, f64) {
    let u = u.max(-p.max_u).min(p.max_u);
    let w = w.max(-p.max_w).min(p.max_w);
    let x = a.position.x + u * a.heading.cos() * p.dt + cx * p.dt * p.dt;
    let y = a.position.y + u * a.heading.sin() * p.dt + cy * p.dt * p.dt;
    let mut h = a.heading + w * p.dt;
    let pi = std::f64::consts::PI;
    while h > pi {
        h -= 2.0 * pi;
    }
    while h <= -pi {
        h += 2.0 * pi;
    }
    (x, y, h)
}

/// Number of 4-connected components of `true` cells, by BFS.
pub fn flood_fill_components(free: &BoolGrid) -> usize {
    let (h, w) = (free.height(), free.width());
    let mut seen = vec![false; h * w];
    let mut count = 0;
    for start in 0..h * w {
        if seen[start] || !free.get(start / w, start % w) {
            continue;
        }
        count += 1;
        seen[start] = true;
        let mut q = VecDeque::from([start]);
        while let Some(c) = q.pop_front() {
            let (r, col) = (c / w, c % w);
            let mut push = |r: usize, col: usize| {
                let k = r * w + col;
                if !seen[k] && free.get(r, col) {
                    seen[k] = true;
                    q.push_back(k);
                }
            };
            if r > 0 {
                push(r - 1, col);
            }
            if r + 1 < h {
                push(r + 1, col);
            }
            if col > 0 {
                push(r, col - 1);
            }
            if col + 1 < w {
                push(r, col + 1);
            }
        }
    }
    count
}

/// Blocked-glyph count of a MovingAI map, read line by line after the
/// `map` marker.
pub fn count_blocked_glyphs(text: &str) -> usize {
    text.lines()
        .skip_while(|l| l.trim() != "map")
        .skip(1)
        .map(|l| l.trim_end().chars().filter(|c| "@OTSW".contains(*c)).count())
        .sum()
}

pub fn fixture(name: &str) -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures").join(name)
}

pub const GOLDEN_SEED: u64 = 5;

/// Digest of slot 0 over a full default episode with seed 5 under the
/// random policy, run inside a batch of `batch` slots on `threads` workers.
/// The other slots get unrelated seeds.
pub fn golden_digest(threads: usize, batch: usize) -> u64 {
    use circlenav::env::{BatchEnv, Digest, EnvConfig};
    use circlenav::policies::{Policy, RandomPolicy};

    let cfg = EnvConfig { threads: Some(threads), batch_size: batch, ..EnvConfig::default() };
    let mut envs = BatchEnv::new(cfg.clone()).unwrap();
    let seeds: Vec<u64> = (0..batch as u64).map(|k| if k == 0 { GOLDEN_SEED } else { 1000 + k }).collect();
    let mut obs: Vec<Vec<f64>> = envs.reset(&seeds).into_iter().map(Result::unwrap).collect();
    let mut policies: Vec<RandomPolicy> = (0..batch)
        .map(|k| {
            let env = envs.env(k);
            let mut p = RandomPolicy::new(1.0, cfg.diffdrive);
            p.episode_start(env.map().unwrap(), env.placement().unwrap(), env.state().unwrap()).unwrap();
            p
        })
        .collect();
    let mut d = Digest::new();
    d.write_state(envs.env(0).state().unwrap());
    obs[0].iter().for_each(|&v| d.write_f64(v));
    loop {
        let actions: Vec<Vec<circlenav::Action>> = (0..batch)
            .map(|k| {
                let mut out = Vec::new();
                policies[k].act(&obs[k], envs.env(k).state().unwrap(), &mut out).unwrap();
                out
            })
            .collect();
        let results: Vec<_> = envs.step(&actions).into_iter().map(Result::unwrap).collect();
        d.write_result(&results[0]);
        d.write_state(envs.env(0).state().unwrap());
        let done = results[0].done;
        obs = results.into_iter().map(|r| r.observations).collect();
        if done {
            return d.finish();
        }
    }
}
