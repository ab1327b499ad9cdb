//! Contact forces and per-step integration for holonomic and
//! differential-drive agents.

use std::f64::consts::{PI, TAU};

use serde::{Deserialize, Serialize};

use crate::geometry::{BroadPhase, Circle, Vec2};

/// Soft contact parameters: `f0` scales the force, `k` sets how soft the
/// penetration response is.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ContactParams {
    pub f0: f64,
    pub k: f64,
}

impl Default for ContactParams {
    fn default() -> Self {
        Self { f0: 100.0, k: 0.001 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct HolonomicParams {
    pub mass: f64,
    /// Fraction of velocity removed per integration step, in `[0, 1)`.
    pub damping: f64,
    /// `f64::INFINITY` disables the clamp.
    pub max_speed: f64,
    #[serde(skip)]
    pub dt: f64,
}

/// Per-substep damping equivalent to removing 25% of the velocity over a
/// 0.1 s control step, applied over 20 substeps of 0.005 s.
pub const DEFAULT_SUBSTEP_DAMPING: f64 = 0.0125;

impl Default for HolonomicParams {
    fn default() -> Self {
        Self {
            mass: 1.0,
            damping: DEFAULT_SUBSTEP_DAMPING,
            max_speed: 1.0,
            dt: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DiffDriveParams {
    pub max_u: f64,
    pub max_w: f64,
    #[serde(skip)]
    pub dt: f64,
}

impl Default for DiffDriveParams {
    fn default() -> Self {
        Self {
            max_u: 1.0,
            max_w: PI,
            dt: 0.005,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DynamicsModel {
    Holonomic,
    DiffDrive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AgentKinematics {
    pub position: Vec2,
    pub velocity: Vec2,
    /// Radians in `(-π, π]`; only meaningful for differential drive.
    pub heading: f64,
    pub radius: f64,
    pub model: DynamicsModel,
}

impl AgentKinematics {
    pub fn circle(&self) -> Circle {
        Circle::new(self.position, self.radius)
    }
}

/// Physics integration settings shared by all agents.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimParams {
    pub contact: ContactParams,
    pub dt: f64,
    pub frameskip: usize,
}

impl Default for SimParams {
    fn default() -> Self {
        Self {
            contact: ContactParams::default(),
            dt: 0.005,
            frameskip: 20,
        }
    }
}

impl SimParams {
    /// Duration of one environment step.
    pub fn step_duration(&self) -> f64 {
        self.dt * self.frameskip as f64
    }
}

/// Per-agent control input.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Action {
    /// 2D force for holonomic agents.
    Force(Vec2),
    /// Linear and angular speed commands for differential-drive agents.
    Drive { linear: f64, angular: f64 },
}

impl Action {
    pub const ZERO_FORCE: Action = Action::Force(Vec2::ZERO);
    pub const STOP: Action = Action::Drive {
        linear: 0.0,
        angular: 0.0,
    };

    /// Interprets a flat pair according to `model`.
    pub fn from_pair(model: DynamicsModel, pair: [f64; 2]) -> Action {
        match model {
            DynamicsModel::Holonomic => Action::Force(Vec2::new(pair[0], pair[1])),
            DynamicsModel::DiffDrive => Action::Drive {
                linear: pair[0],
                angular: pair[1],
            },
        }
    }

    pub fn zero_for(model: DynamicsModel) -> Action {
        match model {
            DynamicsModel::Holonomic => Action::ZERO_FORCE,
            DynamicsModel::DiffDrive => Action::STOP,
        }
    }

    pub fn is_finite(&self) -> bool {
        match *self {
            Action::Force(f) => f.is_finite(),
            Action::Drive { linear, angular } => linear.is_finite() && angular.is_finite(),
        }
    }

    pub fn model(&self) -> DynamicsModel {
        match self {
            Action::Force(_) => DynamicsModel::Holonomic,
            Action::Drive { .. } => DynamicsModel::DiffDrive,
        }
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum DynamicsError {
    #[error("zero displacement between bodies closer than d_min")]
    ZeroDisplacement,
    #[error("non-finite action input")]
    NonFiniteInput,
    #[error("action for a {action:?} agent given to a {agent:?} agent")]
    ModelMismatch {
        agent: DynamicsModel,
        action: DynamicsModel,
    },
    #[error("expected {expected} actions, got {got}")]
    ArityMismatch { expected: usize, got: usize },
    #[error("agent {index}: {source}")]
    Agent {
        index: usize,
        #[source]
        source: Box<DynamicsError>,
    },
}

impl DynamicsError {
    fn at(self, index: usize) -> Self {
        DynamicsError::Agent {
            index,
            source: Box::new(self),
        }
    }
}

/// `ln(1 + e^x)` without overflow for large `x`.
#[inline]
pub fn softplus(x: f64) -> f64 {
    x.max(0.0) + (-x.abs()).exp().ln_1p()
}

/// Repulsive contact force on a body displaced by `delta` from another body.
///
/// Zero when `‖delta‖ ≥ d_min`; otherwise
/// `delta/‖delta‖ · f0 · k · ln(1 + exp((d_min − ‖delta‖)/k))`.
///
/// The piecewise rule jumps at `‖delta‖ = d_min`: the value there is 0 while
/// the limit from below is `f0·k·ln 2` (0.069 at the default constants).
pub fn collision_force(delta: Vec2, d_min: f64, p: &ContactParams) -> Result<Vec2, DynamicsError> {
    let dist = delta.norm();
    if dist >= d_min {
        return Ok(Vec2::ZERO);
    }
    if dist == 0.0 {
        return Err(DynamicsError::ZeroDisplacement);
    }
    Ok(delta * (contact_magnitude(dist, d_min, p) / dist))
}

#[inline]
fn contact_magnitude(dist: f64, d_min: f64, p: &ContactParams) -> f64 {
    p.f0 * p.k * softplus((d_min - dist) / p.k)
}

/// Pairwise forces are rounded to multiples of this quantum before they are
/// summed. Sums of such values are exact while `|sum| < 2^23`, so per-agent
/// totals are independent of summation order and agent–agent terms cancel
/// exactly across the whole scene.
pub const FORCE_QUANTUM: f64 = 1.0 / (1u64 << 30) as f64;

#[inline]
pub fn quantize_force(f: Vec2) -> Vec2 {
    const SCALE: f64 = (1u64 << 30) as f64;
    Vec2::new((f.x * SCALE).round() / SCALE, (f.y * SCALE).round() / SCALE)
}

/// Quantized force on body `i` from body `j`, where `delta = x_i − x_j`.
///
/// Coincident centers fall back to the +x axis for the lower-index body and
/// −x for the higher one, so the pair stays antisymmetric.
#[inline]
pub fn pair_force(delta: Vec2, d_min: f64, i: usize, j: usize, p: &ContactParams) -> Vec2 {
    let f = match collision_force(delta, d_min, p) {
        Ok(f) => f,
        Err(_) => {
            let dir = if i < j { Vec2::X } else { -Vec2::X };
            dir * contact_magnitude(0.0, d_min, p)
        }
    };
    quantize_force(f)
}

/// Total contact force on every agent from all overlapping agents and
/// landmarks. `broad` must be indexed on the current agent positions.
pub fn accumulate_forces(
    agents: &[AgentKinematics],
    landmarks: &[Circle],
    broad: &mut BroadPhase,
    p: &ContactParams,
) -> Vec<Vec2> {
    let mut out = Vec::with_capacity(agents.len());
    let mut scratch = Vec::new();
    accumulate_forces_into(agents, landmarks, broad, p, &mut out, &mut scratch);
    out
}

/// Buffer-reusing form of [`accumulate_forces`].
pub fn accumulate_forces_into(
    agents: &[AgentKinematics],
    landmarks: &[Circle],
    broad: &mut BroadPhase,
    p: &ContactParams,
    out: &mut Vec<Vec2>,
    candidates: &mut Vec<usize>,
) {
    let n = agents.len();
    debug_assert_eq!(broad.num_agents(), n);
    out.clear();
    for (i, agent) in agents.iter().enumerate() {
        let body = agent.circle();
        broad.query_into(&body, 0.0, candidates);
        let mut total = Vec2::ZERO;
        for &j in candidates.iter() {
            if j == i {
                continue;
            }
            let other = if j < n {
                agents[j].circle()
            } else {
                landmarks[j - n]
            };
            let d_min = agent.radius + other.radius;
            total += pair_force(agent.position - other.center, d_min, i, j, p);
        }
        out.push(total);
    }
}

/// Wraps an angle into `(−π, π]`. Angles already in range pass through
/// untouched.
pub fn wrap_angle(theta: f64) -> f64 {
    if theta > -PI && theta <= PI {
        return theta;
    }
    let mut t = (theta + PI).rem_euclid(TAU) - PI;
    if t <= -PI {
        t += TAU;
    }
    if t > PI {
        t -= TAU;
    }
    t
}

/// One semi-implicit Euler step of a force-driven agent.
pub fn step_holonomic(
    state: &AgentKinematics,
    action_force: Vec2,
    collision: Vec2,
    p: &HolonomicParams,
) -> Result<AgentKinematics, DynamicsError> {
    if state.model != DynamicsModel::Holonomic {
        return Err(DynamicsError::ModelMismatch {
            agent: state.model,
            action: DynamicsModel::Holonomic,
        });
    }
    if !action_force.is_finite() {
        return Err(DynamicsError::NonFiniteInput);
    }
    let velocity = state.velocity * (1.0 - p.damping) + (action_force + collision) / p.mass * p.dt;
    let velocity = velocity.clamp_norm(p.max_speed);
    Ok(AgentKinematics {
        position: state.position + velocity * p.dt,
        velocity,
        ..*state
    })
}

/// One kinematic step of a differential-drive agent. The contact force is
/// applied as a unit-mass positional correction `collision·dt²`.
pub fn step_diffdrive(
    state: &AgentKinematics,
    linear: f64,
    angular: f64,
    collision: Vec2,
    p: &DiffDriveParams,
) -> Result<AgentKinematics, DynamicsError> {
    if state.model != DynamicsModel::DiffDrive {
        return Err(DynamicsError::ModelMismatch {
            agent: state.model,
            action: DynamicsModel::DiffDrive,
        });
    }
    if !linear.is_finite() || !angular.is_finite() {
        return Err(DynamicsError::NonFiniteInput);
    }
    let u = linear.clamp(-p.max_u, p.max_u);
    let w = angular.clamp(-p.max_w, p.max_w);
    let (sin, cos) = state.heading.sin_cos();
    let velocity = Vec2::new(u * cos, u * sin);
    let position = state.position + velocity * p.dt + collision * (p.dt * p.dt);
    Ok(AgentKinematics {
        position,
        velocity,
        heading: wrap_angle(state.heading + w * p.dt),
        ..*state
    })
}

/// Applies one action to one agent for one integration step.
pub fn step_agent(
    state: &AgentKinematics,
    action: &Action,
    collision: Vec2,
    holonomic: &HolonomicParams,
    diffdrive: &DiffDriveParams,
) -> Result<AgentKinematics, DynamicsError> {
    match (*action, state.model) {
        (Action::Force(f), DynamicsModel::Holonomic) => {
            step_holonomic(state, f, collision, holonomic)
        }
        (Action::Drive { linear, angular }, DynamicsModel::DiffDrive) => {
            step_diffdrive(state, linear, angular, collision, diffdrive)
        }
        (a, m) => Err(DynamicsError::ModelMismatch {
            agent: m,
            action: a.model(),
        }),
    }
}

/// Parameters and scratch buffers for running substeps on one scene.
#[derive(Debug, Clone)]
pub struct Integrator {
    pub sim: SimParams,
    pub holonomic: HolonomicParams,
    pub diffdrive: DiffDriveParams,
    forces: Vec<Vec2>,
    candidates: Vec<usize>,
}

impl Integrator {
    /// The integration step `sim.dt` overrides the per-model `dt` fields.
    pub fn new(sim: SimParams, holonomic: HolonomicParams, diffdrive: DiffDriveParams) -> Self {
        Self {
            holonomic: HolonomicParams {
                dt: sim.dt,
                ..holonomic
            },
            diffdrive: DiffDriveParams {
                dt: sim.dt,
                ..diffdrive
            },
            sim,
            forces: Vec::new(),
            candidates: Vec::new(),
        }
    }

    /// Validates that `actions` line up with `agents`.
    pub fn check_actions(
        agents: &[AgentKinematics],
        actions: &[Action],
    ) -> Result<(), DynamicsError> {
        if agents.len() != actions.len() {
            return Err(DynamicsError::ArityMismatch {
                expected: agents.len(),
                got: actions.len(),
            });
        }
        for (i, (agent, action)) in agents.iter().zip(actions).enumerate() {
            if action.model() != agent.model {
                return Err(DynamicsError::ModelMismatch {
                    agent: agent.model,
                    action: action.model(),
                }
                .at(i));
            }
            if !action.is_finite() {
                return Err(DynamicsError::NonFiniteInput.at(i));
            }
        }
        Ok(())
    }

    /// One integration step: re-index agents, accumulate contact forces,
    /// integrate every agent with its held action.
    pub fn single_step(
        &mut self,
        agents: &mut [AgentKinematics],
        landmarks: &[Circle],
        actions: &[Action],
        broad: &mut BroadPhase,
    ) -> Result<(), DynamicsError> {
        broad.update_agents(agents.iter().map(AgentKinematics::circle));
        accumulate_forces_into(
            agents,
            landmarks,
            broad,
            &self.sim.contact,
            &mut self.forces,
            &mut self.candidates,
        );
        for (i, agent) in agents.iter_mut().enumerate() {
            *agent = step_agent(
                agent,
                &actions[i],
                self.forces[i],
                &self.holonomic,
                &self.diffdrive,
            )
            .map_err(|e| e.at(i))?;
        }
        Ok(())
    }

    /// `sim.frameskip` consecutive integration steps with the same actions;
    /// contact forces are recomputed every step.
    pub fn substep(
        &mut self,
        agents: &mut [AgentKinematics],
        landmarks: &[Circle],
        actions: &[Action],
        broad: &mut BroadPhase,
    ) -> Result<(), DynamicsError> {
        Self::check_actions(agents, actions)?;
        for _ in 0..self.sim.frameskip {
            self.single_step(agents, landmarks, actions, broad)?;
        }
        Ok(())
    }
}
