//! Ego-centric observations: penetration vectors of the nearest bodies plus
//! a clipped goal direction.

use serde::{Deserialize, Serialize};

use crate::dynamics::AgentKinematics;
use crate::geometry::{BroadPhase, Circle, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ObsParams {
    /// Sensing range in world units.
    pub window: f64,
    pub max_obs: usize,
}

impl Default for ObsParams {
    fn default() -> Self {
        Self {
            window: 0.5,
            max_obs: 8,
        }
    }
}

impl ObsParams {
    /// Number of scalars in one flattened observation.
    pub fn len(&self) -> usize {
        2 * self.max_obs + 2
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservationVector {
    pub object_slots: Vec<Vec2>,
    pub goal_dir: Vec2,
}

impl ObservationVector {
    /// `[x0, y0, x1, y1, ..., goal_x, goal_y]`.
    pub fn to_flat(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(2 * self.object_slots.len() + 2);
        for s in &self.object_slots {
            out.push(s.x);
            out.push(s.y);
        }
        out.push(self.goal_dir.x);
        out.push(self.goal_dir.y);
        out
    }

    pub fn from_flat(flat: &[f64]) -> Self {
        assert!(flat.len() >= 2 && flat.len() % 2 == 0, "bad observation length");
        let pairs: Vec<Vec2> = flat.chunks_exact(2).map(|c| Vec2::new(c[0], c[1])).collect();
        let (slots, goal) = pairs.split_at(pairs.len() - 1);
        Self {
            object_slots: slots.to_vec(),
            goal_dir: goal[0],
        }
    }
}

/// Encodes how far `obj` reaches into the sensing disc of an agent at
/// `agent_pos`:
/// `Δo · (1 − (window + R_j)/‖Δo‖) / window` while the surface gap is below
/// `window`, zero otherwise, with `Δo = obj.center − agent_pos`.
///
/// The activation test uses the agent radius but the scale factor does not,
/// so in the shell `window + R_j ≤ ‖Δo‖ < window + R + R_j` the vector points
/// toward the object. At `‖Δo‖ = 0` the value is the limit along +x,
/// `(−(window + R_j)/window, 0)`.
pub fn penetration_vector(agent_pos: Vec2, agent_radius: f64, obj: &Circle, p: &ObsParams) -> Vec2 {
    let delta = obj.center - agent_pos;
    let dist = delta.norm();
    if dist - agent_radius - obj.radius >= p.window {
        return Vec2::ZERO;
    }
    if dist == 0.0 {
        return Vec2::new(-(p.window + obj.radius) / p.window, 0.0);
    }
    delta * (1.0 - (p.window + obj.radius) / dist) / p.window
}

/// Goal offset clipped to the window, then divided by it.
pub fn goal_direction(agent_pos: Vec2, goal_pos: Vec2, p: &ObsParams) -> Vec2 {
    let g = goal_pos - agent_pos;
    let g = if g.norm() > p.window {
        g.clamp_norm(p.window)
    } else {
        g
    };
    let out = g / p.window;
    if out.norm() > 1.0 {
        out.clamp_norm(1.0)
    } else {
        out
    }
}

/// Borrowed view of everything an observation depends on.
#[derive(Debug, Clone, Copy)]
pub struct Scene<'a> {
    pub agents: &'a [AgentKinematics],
    pub goals: &'a [Vec2],
    pub landmarks: &'a [Circle],
}

impl Scene<'_> {
    fn body(&self, global: usize) -> Circle {
        let n = self.agents.len();
        if global < n {
            self.agents[global].circle()
        } else {
            self.landmarks[global - n]
        }
    }

    pub fn num_bodies(&self) -> usize {
        self.agents.len() + self.landmarks.len()
    }
}

#[derive(Debug, Clone, Copy)]
struct Candidate {
    key: f64,
    index: usize,
    vector: Vec2,
}

/// Reusable buffers for computing observations.
#[derive(Debug, Clone, Default)]
pub struct Observer {
    candidates: Vec<Candidate>,
    neighbors: Vec<usize>,
}

impl Observer {
    pub fn new() -> Self {
        Self::default()
    }

    /// Writes the flattened observation of agent `i` into `out`
    /// (length `p.len()`). `broad` must be indexed on the current agents.
    pub fn observe_into(
        &mut self,
        i: usize,
        scene: &Scene,
        broad: &mut BroadPhase,
        p: &ObsParams,
        out: &mut [f64],
    ) {
        let agent = scene.agents[i];
        broad.query_into(&agent.circle(), p.window, &mut self.neighbors);
        let neighbors = std::mem::take(&mut self.neighbors);
        self.fill(i, scene, neighbors.iter().copied(), p, out);
        self.neighbors = neighbors;
    }

    /// Same result as [`Observer::observe_into`] by scanning every body.
    pub fn observe_brute_force_into(
        &mut self,
        i: usize,
        scene: &Scene,
        p: &ObsParams,
        out: &mut [f64],
    ) {
        self.fill(i, scene, 0..scene.num_bodies(), p, out);
    }

    fn fill(
        &mut self,
        i: usize,
        scene: &Scene,
        bodies: impl Iterator<Item = usize>,
        p: &ObsParams,
        out: &mut [f64],
    ) {
        assert_eq!(out.len(), p.len(), "observation buffer length");
        let agent = scene.agents[i];
        self.candidates.clear();
        for j in bodies {
            if j == i {
                continue;
            }
            let obj = scene.body(j);
            let key = (obj.center - agent.position).norm() - agent.radius - obj.radius;
            if key < p.window {
                self.candidates.push(Candidate {
                    key,
                    index: j,
                    vector: penetration_vector(agent.position, agent.radius, &obj, p),
                });
            }
        }
        self.candidates
            .sort_unstable_by(|a, b| a.key.total_cmp(&b.key).then(a.index.cmp(&b.index)));
        out.fill(0.0);
        for (slot, c) in self.candidates.iter().take(p.max_obs).enumerate() {
            out[2 * slot] = c.vector.x;
            out[2 * slot + 1] = c.vector.y;
        }
        let g = goal_direction(agent.position, scene.goals[i], p);
        out[2 * p.max_obs] = g.x;
        out[2 * p.max_obs + 1] = g.y;
    }
}

/// Observation of agent `i` using the broad phase.
pub fn observe(i: usize, scene: &Scene, broad: &mut BroadPhase, p: &ObsParams) -> ObservationVector {
    let mut out = vec![0.0; p.len()];
    Observer::new().observe_into(i, scene, broad, p, &mut out);
    ObservationVector::from_flat(&out)
}

/// Observation of agent `i` by scanning all bodies.
pub fn observe_brute_force(i: usize, scene: &Scene, p: &ObsParams) -> ObservationVector {
    let mut out = vec![0.0; p.len()];
    Observer::new().observe_brute_force_into(i, scene, p, &mut out);
    ObservationVector::from_flat(&out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::DynamicsModel;

    fn p1() -> ObsParams {
        ObsParams {
            window: 1.0,
            max_obs: 4,
        }
    }

    #[test]
    fn out_of_range_is_zero() {
        let v = penetration_vector(Vec2::ZERO, 0.1, &Circle::new(Vec2::new(2.0, 0.0), 0.2), &p1());
        assert_eq!(v, Vec2::ZERO);
    }

    #[test]
    fn factor_zero_boundary() {
        let v = penetration_vector(Vec2::ZERO, 0.1, &Circle::new(Vec2::new(1.2, 0.0), 0.2), &p1());
        assert!(v.norm() < 1e-15);
    }

    #[test]
    fn inside_window_example() {
        let v = penetration_vector(Vec2::ZERO, 0.1, &Circle::new(Vec2::new(0.5, 0.0), 0.2), &p1());
        let factor = 1.0 - 1.2 / 0.5;
        assert!((v.x - 0.5 * factor).abs() < 1e-15);
        assert!((v.x + 0.7).abs() < 1e-12);
        assert_eq!(v.y, 0.0);
    }

    #[test]
    fn shell_points_toward_object() {
        // window + R_j <= |Δo| < window + R + R_j
        let v = penetration_vector(Vec2::ZERO, 0.1, &Circle::new(Vec2::new(1.25, 0.0), 0.2), &p1());
        assert!(v.x > 0.0);
    }

    #[test]
    fn coincident_center_fallback() {
        let v = penetration_vector(Vec2::ZERO, 0.1, &Circle::new(Vec2::ZERO, 0.2), &p1());
        assert_eq!(v, Vec2::new(-1.2, 0.0));
        let near = penetration_vector(Vec2::ZERO, 0.1, &Circle::new(Vec2::new(1e-9, 0.0), 0.2), &p1());
        assert!((near.x - v.x).abs() < 1e-8);
    }

    #[test]
    fn goal_direction_examples() {
        let p = p1();
        assert_eq!(goal_direction(Vec2::new(1.0, 1.0), Vec2::new(1.0, 1.0), &p), Vec2::ZERO);
        assert_eq!(goal_direction(Vec2::ZERO, Vec2::new(0.3, 0.4), &p), Vec2::new(0.3, 0.4));
        let g = goal_direction(Vec2::ZERO, Vec2::new(3.0, 4.0), &p);
        assert!((g.x - 0.6).abs() < 1e-15 && (g.y - 0.8).abs() < 1e-15);
        assert!(g.norm() <= 1.0);
    }

    fn agent(x: f64, y: f64) -> AgentKinematics {
        AgentKinematics {
            position: Vec2::new(x, y),
            velocity: Vec2::ZERO,
            heading: 0.0,
            radius: 0.1,
            model: DynamicsModel::Holonomic,
        }
    }

    #[test]
    fn empty_scene_has_unit_goal() {
        let agents = [agent(0.0, 0.0)];
        let goals = [Vec2::new(10.0, 0.0)];
        let scene = Scene {
            agents: &agents,
            goals: &goals,
            landmarks: &[],
        };
        let mut broad = BroadPhase::new(0.5, &[]);
        broad.update_agents(agents.iter().map(AgentKinematics::circle));
        let o = observe(0, &scene, &mut broad, &ObsParams::default());
        assert!(o.object_slots.iter().all(|s| *s == Vec2::ZERO));
        assert_eq!(o.object_slots.len(), 8);
        assert!((o.goal_dir.norm() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn single_obstacle_fills_first_slot() {
        let agents = [agent(0.0, 0.0)];
        let goals = [Vec2::ZERO];
        let landmarks = [Circle::new(Vec2::new(0.4, 0.0), 0.2)];
        let scene = Scene {
            agents: &agents,
            goals: &goals,
            landmarks: &landmarks,
        };
        let p = ObsParams::default();
        let mut broad = BroadPhase::new(0.5, &landmarks);
        broad.update_agents(agents.iter().map(AgentKinematics::circle));
        let o = observe(0, &scene, &mut broad, &p);
        assert_eq!(o.object_slots[0], penetration_vector(Vec2::ZERO, 0.1, &landmarks[0], &p));
        assert!(o.object_slots[1..].iter().all(|s| *s == Vec2::ZERO));
        assert_eq!(o.to_flat().len(), p.len());
    }
}
