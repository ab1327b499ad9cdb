//! Per-step rewards and end-of-episode metrics.

use serde::{Deserialize, Serialize};

use crate::dynamics::AgentKinematics;
use crate::geometry::{BroadPhase, Circle, Vec2};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RewardParams {
    /// On-goal radius. `None` uses each agent's own radius.
    pub goal_radius: Option<f64>,
    pub shaping: f64,
}

impl Default for RewardParams {
    fn default() -> Self {
        Self {
            goal_radius: None,
            shaping: 0.1,
        }
    }
}

impl RewardParams {
    pub fn goal_radius_for(&self, agent_radius: f64) -> f64 {
        self.goal_radius.unwrap_or(agent_radius)
    }
}

const POTENTIAL_SCALE: f64 = (1u64 << 40) as f64;

/// `shaping · d` rounded to a multiple of 2^-40. Differences of these values
/// are exact, so the per-step shaping terms of an episode telescope exactly.
#[inline]
pub fn shaping_potential(shaping: f64, distance: f64) -> f64 {
    (shaping * distance * POTENTIAL_SCALE).round() / POTENTIAL_SCALE
}

#[inline]
pub fn on_goal(position: Vec2, goal: Vec2, goal_radius: f64) -> bool {
    (position - goal).norm() <= goal_radius
}

/// Per agent: does it overlap any other agent or landmark?
/// `broad` must be indexed on `agents`.
pub fn collision_flags(
    agents: &[AgentKinematics],
    landmarks: &[Circle],
    broad: &mut BroadPhase,
) -> Vec<bool> {
    let mut out = Vec::with_capacity(agents.len());
    let mut scratch = Vec::new();
    collision_flags_into(agents, landmarks, broad, &mut out, &mut scratch);
    out
}

pub fn collision_flags_into(
    agents: &[AgentKinematics],
    landmarks: &[Circle],
    broad: &mut BroadPhase,
    out: &mut Vec<bool>,
    candidates: &mut Vec<usize>,
) {
    let n = agents.len();
    out.clear();
    for (i, a) in agents.iter().enumerate() {
        broad.query_into(&a.circle(), 0.0, candidates);
        let hit = candidates.iter().any(|&j| {
            if j == i {
                return false;
            }
            let other = if j < n {
                agents[j].circle()
            } else {
                landmarks[j - n]
            };
            (a.position - other.center).norm() < a.radius + other.radius
        });
        out.push(hit);
    }
}

/// Rewards for one environment step from agent positions before and after.
///
/// Each agent gets +0.5 when every agent is on its goal, +0.5 when it is on
/// its own goal, −1 when it overlaps anything, and the shaping term
/// `Φ(d_prev) − Φ(d_curr)` with `Φ` from [`shaping_potential`].
pub fn step_rewards(
    prev: &[Vec2],
    curr: &[Vec2],
    goals: &[Vec2],
    goal_radii: &[f64],
    colliding: &[bool],
    p: &RewardParams,
) -> Vec<f64> {
    let n = curr.len();
    assert!(prev.len() == n && goals.len() == n && goal_radii.len() == n && colliding.len() == n);
    let on: Vec<bool> = (0..n).map(|i| on_goal(curr[i], goals[i], goal_radii[i])).collect();
    let all = on.iter().all(|&b| b);
    (0..n)
        .map(|i| {
            let mut r = 0.0;
            if all {
                r += 0.5;
            }
            if on[i] {
                r += 0.5;
            }
            if colliding[i] {
                r -= 1.0;
            }
            let d_prev = (prev[i] - goals[i]).norm();
            let d_curr = (curr[i] - goals[i]).norm();
            r + (shaping_potential(p.shaping, d_prev) - shaping_potential(p.shaping, d_curr))
        })
        .collect()
}

/// What happened to one agent after one environment step.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentRecord {
    pub position: Vec2,
    pub distance_to_goal: f64,
    pub on_goal: bool,
    pub collision: bool,
}

/// Per-step, per-agent records of one episode. `steps[t]` describes the
/// state after step `t + 1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeTrace {
    pub num_agents: usize,
    pub budget: usize,
    pub steps: Vec<Vec<AgentRecord>>,
}

impl EpisodeTrace {
    pub fn new(num_agents: usize, budget: usize) -> Self {
        Self {
            num_agents,
            budget,
            steps: Vec::with_capacity(budget),
        }
    }

    pub fn push(&mut self, records: Vec<AgentRecord>) {
        assert_eq!(records.len(), self.num_agents, "record arity");
        assert!(self.steps.len() < self.budget, "trace longer than budget");
        self.steps.push(records);
    }

    pub fn len(&self) -> usize {
        self.steps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.steps.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub success_rate: f64,
    pub flowtime: f64,
    pub makespan: f64,
    pub coordination: f64,
    /// First on-goal step per agent (1-based), or the budget if never.
    pub reach_times: Vec<usize>,
    pub collision_count: usize,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricsError {
    #[error("episode trace is empty")]
    EmptyTrace,
}

/// SR at the last recorded step; FT and MS over first-reach times (budget
/// for agents that never arrive); CO = 1 − C/(N·T) with at most one
/// collision per agent per step.
pub fn finalize_metrics(trace: &EpisodeTrace) -> Result<EpisodeMetrics, MetricsError> {
    let last = trace.steps.last().ok_or(MetricsError::EmptyTrace)?;
    let n = trace.num_agents;
    if n == 0 {
        return Err(MetricsError::EmptyTrace);
    }
    let t_max = trace.budget;
    let mut reach_times = vec![t_max; n];
    let mut collisions = 0usize;
    for (t, records) in trace.steps.iter().enumerate() {
        for (i, r) in records.iter().enumerate() {
            if r.on_goal && reach_times[i] == t_max && t + 1 < t_max {
                reach_times[i] = t + 1;
            }
            if r.collision {
                collisions += 1;
            }
        }
    }
    let success = last.iter().filter(|r| r.on_goal).count();
    let sum: usize = reach_times.iter().sum();
    let makespan = *reach_times.iter().max().unwrap_or(&0);
    Ok(EpisodeMetrics {
        success_rate: success as f64 / n as f64,
        flowtime: sum as f64 / n as f64,
        makespan: makespan as f64,
        coordination: 1.0 - collisions as f64 / (n * t_max) as f64,
        reach_times,
        collision_count: collisions,
    })
}
