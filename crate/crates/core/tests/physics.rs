mod common;

use circlenav::dynamics::{
    accumulate_forces, collision_force, step_diffdrive, step_holonomic, wrap_angle, Action, ContactParams,
    DiffDriveParams, DynamicsError, DynamicsModel, HolonomicParams, Integrator, SimParams,
};
use circlenav::geometry::{BroadPhase, Circle, Vec2};
use common::*;
use proptest::prelude::*;

fn broad_for(agents: &[circlenav::AgentKinematics], landmarks: &[Circle]) -> BroadPhase {
    let mut b = BroadPhase::new(0.3, landmarks);
    b.update_agents(agents.iter().map(|a| a.circle()));
    b
}

#[test]
fn hashed_forces_match_all_pairs() {
    let p = ContactParams::default();
    for seed in 0..100 {
        let (agents, landmarks) = random_scene(seed, 64, true, false);
        let mut broad = broad_for(&agents, &landmarks);
        let got = accumulate_forces(&agents, &landmarks, &mut broad, &p);
        assert_eq!(got, brute_force_forces(&agents, &landmarks, &p), "seed {seed}");
    }
}

#[test]
fn agent_forces_cancel_without_landmarks() {
    let p = ContactParams::default();
    for seed in 0..100 {
        let (agents, _) = random_scene(seed, 64, false, false);
        let mut broad = broad_for(&agents, &[]);
        let total = accumulate_forces(&agents, &[], &mut broad, &p)
            .into_iter()
            .fold(Vec2::ZERO, |a, b| a + b);
        assert_eq!(total, Vec2::ZERO, "seed {seed}");
    }
}

#[test]
fn contact_examples() {
    let p = ContactParams::default();
    assert_eq!(collision_force(Vec2::new(2.0, 0.0), 1.0, &p).unwrap(), Vec2::ZERO);
    assert_eq!(collision_force(Vec2::new(1.0, 0.0), 1.0, &p).unwrap(), Vec2::ZERO);
    let f = collision_force(Vec2::new(0.5, 0.0), 1.0, &p).unwrap();
    assert!((f.x - 50.0).abs() < 1e-9 && f.y == 0.0);
    assert_eq!(collision_force(Vec2::ZERO, 1.0, &p), Err(DynamicsError::ZeroDisplacement));
}

#[test]
fn force_magnitude_monotone_on_grid() {
    let p = ContactParams::default();
    let d_min = 0.2;
    let mut prev = f64::INFINITY;
    for i in 1..=1000 {
        let d = d_min * i as f64 / 1000.0;
        let m = collision_force(Vec2::new(d, 0.0), d_min, &p).unwrap().norm();
        assert!(m <= prev, "d = {d}");
        prev = m;
    }
}

#[test]
fn coincident_agents_push_apart() {
    let p = ContactParams::default();
    let agents = [
        holonomic(Vec2::new(1.0, 1.0), Vec2::ZERO, 0.1),
        holonomic(Vec2::new(1.0, 1.0), Vec2::ZERO, 0.1),
    ];
    let mut broad = broad_for(&agents, &[]);
    let f = accumulate_forces(&agents, &[], &mut broad, &p);
    assert!(f[0].x > 0.0 && f[1].x < 0.0);
    assert_eq!(f[0] + f[1], Vec2::ZERO);
}

fn arb_holonomic() -> impl Strategy<Value = (circlenav::AgentKinematics, Vec2, Vec2)> {
    (
        (-5.0..5.0f64, -5.0..5.0f64, -2.0..2.0f64, -2.0..2.0f64),
        (-50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64, -50.0..50.0f64),
    )
        .prop_map(|((x, y, vx, vy), (fx, fy, cx, cy))| {
            (holonomic(Vec2::new(x, y), Vec2::new(vx, vy), 0.1), Vec2::new(fx, fy), Vec2::new(cx, cy))
        })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn holonomic_matches_scalar_oracle((a, f, c) in arb_holonomic(), damping in 0.0..0.5f64) {
        let p = HolonomicParams { damping, ..HolonomicParams::default() };
        let next = step_holonomic(&a, f, c, &p).unwrap();
        let (x, y, vx, vy) = oracle_holonomic(&a, f.x + c.x, f.y + c.y, &p);
        prop_assert!((next.position.x - x).abs() < 1e-12);
        prop_assert!((next.position.y - y).abs() < 1e-12);
        prop_assert!((next.velocity.x - vx).abs() < 1e-12);
        prop_assert!((next.velocity.y - vy).abs() < 1e-12);
        prop_assert!(next.velocity.norm() <= p.max_speed);
    }

    #[test]
    fn diffdrive_matches_scalar_oracle(
        x in -5.0..5.0f64, y in -5.0..5.0f64, h in -3.14..3.14f64,
        u in -3.0..3.0f64, w in -10.0..10.0f64, cx in -50.0..50.0f64, cy in -50.0..50.0f64,
    ) {
        let p = DiffDriveParams { dt: 0.005, ..DiffDriveParams::default() };
        let a = circlenav::AgentKinematics {
            position: Vec2::new(x, y), velocity: Vec2::ZERO, heading: h, radius: 0.1,
            model: DynamicsModel::DiffDrive,
        };
        let next = step_diffdrive(&a, u, w, Vec2::new(cx, cy), &p).unwrap();
        let (ox, oy, oh) = oracle_diffdrive(&a, u, w, cx, cy, &p);
        prop_assert!((next.position.x - ox).abs() < 1e-12);
        prop_assert!((next.position.y - oy).abs() < 1e-12);
        prop_assert!((next.heading - oh).abs() < 1e-12);
        prop_assert!(next.heading > -std::f64::consts::PI && next.heading <= std::f64::consts::PI);
    }

    #[test]
    fn wrap_angle_range(t in -1e4..1e4f64) {
        let w = wrap_angle(t);
        prop_assert!(w > -std::f64::consts::PI && w <= std::f64::consts::PI);
        let k = ((t - w) / std::f64::consts::TAU).round();
        prop_assert!((t - w - k * std::f64::consts::TAU).abs() < 1e-9);
    }

    #[test]
    fn pair_forces_are_antisymmetric(
        x in -0.3..0.3f64, y in -0.3..0.3f64, ri in 0.05..0.2f64, rj in 0.05..0.2f64,
    ) {
        let p = ContactParams::default();
        let agents = [
            holonomic(Vec2::ZERO, Vec2::ZERO, ri),
            holonomic(Vec2::new(x, y), Vec2::ZERO, rj),
        ];
        let mut broad = broad_for(&agents, &[]);
        let f = accumulate_forces(&agents, &[], &mut broad, &p);
        prop_assert_eq!(f[0], -f[1]);
    }
}

#[test]
fn substep_equals_chained_single_steps() {
    for seed in 0..20 {
        let (agents, landmarks) = random_scene(seed, 24, true, false);
        let actions: Vec<Action> = agents
            .iter()
            .enumerate()
            .map(|(i, a)| match a.model {
                DynamicsModel::Holonomic => Action::Force(Vec2::new(i as f64 * 0.1, -0.3)),
                DynamicsModel::DiffDrive => Action::Drive { linear: 0.4, angular: 1.2 },
            })
            .collect();
        let sim = SimParams { frameskip: 7, ..SimParams::default() };
        let mut whole = agents.clone();
        let mut broad = BroadPhase::new(0.3, &landmarks);
        Integrator::new(sim, HolonomicParams::default(), DiffDriveParams::default())
            .substep(&mut whole, &landmarks, &actions, &mut broad)
            .unwrap();
        let mut chained = agents.clone();
        let mut one = Integrator::new(SimParams { frameskip: 1, ..sim }, HolonomicParams::default(), DiffDriveParams::default());
        let mut broad = BroadPhase::new(0.3, &landmarks);
        for _ in 0..7 {
            one.substep(&mut chained, &landmarks, &actions, &mut broad).unwrap();
        }
        assert_eq!(whole, chained, "seed {seed}");
    }
}

#[test]
fn action_model_mismatch_names_agent() {
    let agents = [holonomic(Vec2::ZERO, Vec2::ZERO, 0.1)];
    let err = Integrator::check_actions(&agents, &[Action::STOP]).unwrap_err();
    assert!(matches!(err, DynamicsError::Agent { index: 0, .. }));
    let err = Integrator::check_actions(&agents, &[]).unwrap_err();
    assert_eq!(err, DynamicsError::ArityMismatch { expected: 1, got: 0 });
}
