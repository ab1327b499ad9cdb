//! Built-in baseline policies and the policy hook used by the evaluator.

use crate::dynamics::{Action, DiffDriveParams, DynamicsModel};
use crate::env::{EnvConfig, WorldState};
use crate::geometry::Vec2;
use crate::maps::{MapSpec, PlacementSpec};
use crate::planners::{
    self, ClearanceChecker, GuidancePlan, Path, PdParams, PlanError, PlannerParams,
};
use crate::rng::RngStream;

pub const POLICY_NAMES: [&str; 5] = ["zero", "random", "rrt_pd", "rrtstar_pd", "rrtstar_guided_pd"];

/// Number of guidance waypoints used by `rrtstar_guided_pd`.
pub const GUIDANCE_WAYPOINTS: usize = 4;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("policy {policy}: {message}")]
pub struct PolicyError {
    pub policy: String,
    pub message: String,
}

/// Maps observations and episode context to one action per agent.
///
/// Implementations derive any randomness from `WorldState::rng`, which is a
/// pure function of the episode seed.
pub trait Policy: Send {
    fn name(&self) -> &str;

    fn episode_start(
        &mut self,
        _map: &MapSpec,
        _placement: &PlacementSpec,
        _state: &WorldState,
    ) -> Result<(), PolicyError> {
        Ok(())
    }

    /// Planned path per agent for rendering, if the policy plans.
    fn planned_paths(&self) -> Vec<Option<Vec<Vec2>>> {
        Vec::new()
    }

    /// `observations` is row-major `[num_agents, obs_len]`.
    fn act(
        &mut self,
        observations: &[f64],
        state: &WorldState,
        out: &mut Vec<Action>,
    ) -> Result<(), PolicyError>;
}

#[derive(Debug, Clone, Default)]
pub struct ZeroPolicy;

impl Policy for ZeroPolicy {
    fn name(&self) -> &str {
        "zero"
    }

    fn act(&mut self, _obs: &[f64], state: &WorldState, out: &mut Vec<Action>) -> Result<(), PolicyError> {
        out.clear();
        out.extend(state.agents.iter().map(|a| Action::zero_for(a.model)));
        Ok(())
    }
}

/// Uniform actions: force components in `[-max_force, max_force]`, or
/// speeds within the differential-drive limits.
#[derive(Debug, Clone)]
pub struct RandomPolicy {
    pub max_force: f64,
    pub diffdrive: DiffDriveParams,
    stream: Option<RngStream>,
}

impl RandomPolicy {
    pub fn new(max_force: f64, diffdrive: DiffDriveParams) -> Self {
        Self {
            max_force,
            diffdrive,
            stream: None,
        }
    }
}

impl Policy for RandomPolicy {
    fn name(&self) -> &str {
        "random"
    }

    fn episode_start(&mut self, _: &MapSpec, _: &PlacementSpec, state: &WorldState) -> Result<(), PolicyError> {
        self.stream = Some(state.rng.fold_in(u64::MAX).stream());
        Ok(())
    }

    fn act(&mut self, _obs: &[f64], state: &WorldState, out: &mut Vec<Action>) -> Result<(), PolicyError> {
        let s = self
            .stream
            .get_or_insert_with(|| state.rng.fold_in(u64::MAX).stream());
        out.clear();
        for a in &state.agents {
            out.push(match a.model {
                DynamicsModel::Holonomic => Action::Force(Vec2::new(
                    s.uniform(-self.max_force, self.max_force),
                    s.uniform(-self.max_force, self.max_force),
                )),
                DynamicsModel::DiffDrive => Action::Drive {
                    linear: s.uniform(-self.diffdrive.max_u, self.diffdrive.max_u),
                    angular: s.uniform(-self.diffdrive.max_w, self.diffdrive.max_w),
                },
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PlannerKind {
    Rrt,
    RrtStar,
    RrtStarGuided,
}

/// Per-agent single-agent plans computed at episode start, tracked with
/// the PD controller. Other agents are ignored while planning. Agents whose
/// plan fails steer straight at their goal; differential-drive agents stay
/// still.
#[derive(Debug, Clone)]
pub struct PlannerPolicy {
    pub kind: PlannerKind,
    /// Overrides the per-agent planner defaults when set.
    pub planner: Option<PlannerParams>,
    /// Overrides the per-agent PD defaults when set.
    pub pd: Option<PdParams>,
    paths: Vec<Option<Path>>,
    guidance: Vec<Option<GuidancePlan>>,
    cursors: Vec<usize>,
    /// Index of the guidance sample currently targeted.
    guide_ptr: Vec<usize>,
    checkers: Vec<Option<ClearanceChecker>>,
    failures: usize,
}

/// Extra clearance, in agent radii, required before the guided policy cuts
/// straight to a later guidance sample.
pub const SHORTCUT_MARGIN: f64 = 0.5;

impl PlannerPolicy {
    pub fn new(kind: PlannerKind) -> Self {
        Self {
            kind,
            planner: None,
            pd: None,
            paths: Vec::new(),
            guidance: Vec::new(),
            cursors: Vec::new(),
            guide_ptr: Vec::new(),
            checkers: Vec::new(),
            failures: 0,
        }
    }

    /// Agents whose plan failed in the current episode.
    pub fn planning_failures(&self) -> usize {
        self.failures
    }

    pub fn paths(&self) -> &[Option<Path>] {
        &self.paths
    }

    fn planner_params(&self, agent_radius: f64, goal_radius: f64) -> PlannerParams {
        self.planner.unwrap_or_else(|| match self.kind {
            PlannerKind::Rrt => PlannerParams::rrt(agent_radius, goal_radius),
            _ => PlannerParams::rrt_star(agent_radius, goal_radius),
        })
    }

    fn pd_params(&self, agent_radius: f64) -> PdParams {
        self.pd.unwrap_or_else(|| PdParams::for_radius(agent_radius))
    }

    /// Latest guidance sample at or after the current one that is visible
    /// from `pos` with margin, with the path waypoint index it lies before.
    fn shortcut(&mut self, i: usize, pos: Vec2) -> Option<(Vec2, usize)> {
        let plan = self.guidance[i].as_ref()?;
        let path = plan.path.as_ref()?;
        let checker = self.checkers[i].as_mut()?;
        let from = self.guide_ptr[i];
        let j = (from..plan.samples.len())
            .rev()
            .find(|&j| checker.segment_free(pos, plan.samples[j]))?;
        self.guide_ptr[i] = j;
        Some((plan.samples[j], sample_waypoint_index(path, plan.samples.len(), j)))
    }
}

/// Index of the first path waypoint at or beyond guidance sample `j` of
/// `k`, by arc length.
fn sample_waypoint_index(path: &Path, k: usize, j: usize) -> usize {
    let pts = &path.waypoints;
    let last = pts.len() - 1;
    if last == 0 || j + 1 >= k {
        return last;
    }
    if j == 0 {
        return 1;
    }
    let s1 = (pts[1] - pts[0]).norm();
    let s = s1 + (path.cost - s1) * j as f64 / (k - 1) as f64;
    let mut acc = 0.0;
    for (w, seg) in pts.windows(2).enumerate() {
        acc += (seg[1] - seg[0]).norm();
        if acc >= s {
            return w + 1;
        }
    }
    last
}

impl Policy for PlannerPolicy {
    fn name(&self) -> &str {
        match self.kind {
            PlannerKind::Rrt => "rrt_pd",
            PlannerKind::RrtStar => "rrtstar_pd",
            PlannerKind::RrtStarGuided => "rrtstar_guided_pd",
        }
    }

    fn planned_paths(&self) -> Vec<Option<Vec<Vec2>>> {
        self.paths
            .iter()
            .map(|p| p.as_ref().map(|p| p.waypoints.clone()))
            .collect()
    }

    fn episode_start(&mut self, map: &MapSpec, _: &PlacementSpec, state: &WorldState) -> Result<(), PolicyError> {
        let n = state.num_agents();
        self.paths.clear();
        self.guidance.clear();
        self.checkers.clear();
        self.cursors = vec![0; n];
        self.guide_ptr = vec![0; n];
        self.failures = 0;
        for (i, a) in state.agents.iter().enumerate() {
            let rng = state.rng.fold_in(i as u64);
            let p = self.planner_params(a.radius, state.goal_radii[i]);
            let goal = state.goals[i];
            if a.model == DynamicsModel::DiffDrive {
                self.paths.push(None);
                self.guidance.push(None);
                self.checkers.push(None);
                continue;
            }
            match self.kind {
                PlannerKind::RrtStarGuided => {
                    let plan =
                        planners::rrt_star_guidance_plan(map, a.position, goal, a.radius, GUIDANCE_WAYPOINTS, &p, rng);
                    if plan.path.is_none() {
                        self.failures += 1;
                    }
                    self.paths.push(plan.path.clone());
                    self.guidance.push(Some(plan));
                    self.checkers.push(Some(ClearanceChecker::new(
                        &map.landmarks,
                        a.radius * (1.0 + SHORTCUT_MARGIN),
                    )));
                }
                _ => {
                    let res = match self.kind {
                        PlannerKind::Rrt => planners::rrt_plan(map, a.position, goal, a.radius, &p, rng),
                        _ => planners::rrt_star_plan(map, a.position, goal, a.radius, &p, rng),
                    };
                    match res {
                        Ok(path) => self.paths.push(Some(path)),
                        Err(PlanError::NoPathFound { .. } | PlanError::InvalidEndpoint(_)) => {
                            self.failures += 1;
                            self.paths.push(None);
                        }
                    }
                }
            }
        }
        Ok(())
    }

    fn act(&mut self, _obs: &[f64], state: &WorldState, out: &mut Vec<Action>) -> Result<(), PolicyError> {
        if self.paths.len() != state.num_agents() {
            return Err(PolicyError {
                policy: self.name().into(),
                message: "act called before episode_start".into(),
            });
        }
        out.clear();
        for (i, a) in state.agents.iter().enumerate() {
            if a.model == DynamicsModel::DiffDrive {
                out.push(Action::STOP);
                continue;
            }
            let pd = self.pd_params(a.radius);
            let fallback = Path::new(vec![state.goals[i]]);
            let mut hop = None;
            if self.kind == PlannerKind::RrtStarGuided {
                if let Some((target, idx)) = self.shortcut(i, a.position) {
                    self.cursors[i] = self.cursors[i].max(idx);
                    let reached = (target - a.position).norm() <= pd.waypoint_tolerance;
                    if reached && target != state.goals[i] {
                        self.guide_ptr[i] += 1;
                    } else {
                        hop = Some(target);
                    }
                }
            }
            let path = self.paths[i].as_ref().unwrap_or(&fallback);
            let cursor = if self.paths[i].is_some() { self.cursors[i] } else { 0 };
            let (mut force, c) = planners::pd_follow(a, path, cursor, &pd);
            if self.paths[i].is_some() {
                self.cursors[i] = c;
            }
            if let Some(target) = hop {
                force = planners::pd_follow(a, &Path::new(vec![target]), 0, &pd).0;
            }
            out.push(Action::Force(force));
        }
        Ok(())
    }
}

/// Builds a named built-in policy for `cfg`.
pub fn policy_by_name(name: &str, cfg: &EnvConfig) -> Option<Box<dyn Policy>> {
    Some(match name {
        "zero" => Box::new(ZeroPolicy),
        "random" => Box::new(RandomPolicy::new(1.0, cfg.diffdrive)),
        "rrt_pd" => Box::new(PlannerPolicy::new(PlannerKind::Rrt)),
        "rrtstar_pd" => Box::new(PlannerPolicy::new(PlannerKind::RrtStar)),
        "rrtstar_guided_pd" => Box::new(PlannerPolicy::new(PlannerKind::RrtStarGuided)),
        _ => return None,
    })
}
