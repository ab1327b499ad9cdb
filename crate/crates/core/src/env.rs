//! Episode lifecycle: configuration, reset, step and lockstep batches.
//!
//! Seeding: the episode key is `RngKey::from_seed(seed)`. Its children are
//! `0` map, `1` placement, `2` initial headings and `3` the key handed to
//! policies through [`WorldState::rng`].

use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dynamics::{
    Action, AgentKinematics, DiffDriveParams, DynamicsError, DynamicsModel, HolonomicParams, Integrator, SimParams,
};
use crate::geometry::{BroadPhase, Circle, Vec2};
use crate::maps::{self, GeneratorConfig, GeneratorKind, MapError, MapSpec, PlacementSpec};
use crate::observation::{ObsParams, ObservationVector, Observer, Scene};
use crate::reward::{self, AgentRecord, RewardParams};
use crate::rng::RngKey;

pub const DEFAULT_SEED: u64 = 5;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct EnvConfig {
    pub seed: u64,
    pub episode_budget: usize,
    pub batch_size: usize,
    /// Worker cap for batched stepping; `None` uses all cores.
    pub threads: Option<usize>,
    pub generator: GeneratorConfig,
    pub sim: SimParams,
    pub obs: ObsParams,
    pub reward: RewardParams,
    pub holonomic: HolonomicParams,
    pub diffdrive: DiffDriveParams,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            seed: DEFAULT_SEED,
            episode_budget: 160,
            batch_size: 1,
            threads: None,
            generator: GeneratorConfig::default(),
            sim: SimParams::default(),
            obs: ObsParams::default(),
            reward: RewardParams::default(),
            holonomic: HolonomicParams::default(),
            diffdrive: DiffDriveParams::default(),
        }
    }
}

/// A configuration problem at a dotted key path such as `generator.kind`.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{path}: {message}")]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl ConfigError {
    pub fn at(path: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub(crate) fn from_path_error<E: std::fmt::Display>(e: serde_path_to_error::Error<E>) -> ConfigError {
    let path = e.path().to_string();
    let path = if path == "." { String::new() } else { path };
    ConfigError::at(path, e.into_inner().to_string())
}

impl EnvConfig {
    /// Parses TOML text; errors carry the offending key path.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::at("", e.to_string().trim().to_string()))?;
        let cfg: EnvConfig = serde_path_to_error::deserialize(table).map_err(from_path_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Same schema as [`EnvConfig::from_toml_str`], from an in-memory mapping.
    pub fn from_json_value(value: serde_json::Value) -> Result<Self, ConfigError> {
        let cfg: EnvConfig = serde_path_to_error::deserialize(value).map_err(from_path_error)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Reads a TOML file. Relative map file paths are resolved against the
    /// file's directory.
    pub fn from_file(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at("", format!("{}: {e}", path.display())))?;
        let mut cfg = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            cfg.resolve_paths(dir);
        }
        Ok(cfg)
    }

    /// Makes relative map file paths relative to `dir`.
    pub fn resolve_paths(&mut self, dir: &Path) {
        let fix = |p: &mut std::path::PathBuf| {
            if p.is_relative() {
                *p = dir.join(&*p);
            }
        };
        if let Some(p) = self.generator.map_file.as_mut() {
            fix(p);
        }
        self.generator.map_files.iter_mut().for_each(fix);
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let req = |ok: bool, path: &str, msg: &str| -> Result<(), ConfigError> {
            if ok {
                Ok(())
            } else {
                Err(ConfigError::at(path, msg))
            }
        };
        req(self.episode_budget >= 1, "episode_budget", "must be at least 1")?;
        req(self.batch_size >= 1, "batch_size", "must be at least 1")?;
        req(self.threads != Some(0), "threads", "must be at least 1")?;
        req(self.sim.frameskip >= 1, "sim.frameskip", "must be at least 1")?;
        req(self.sim.dt > 0.0 && self.sim.dt.is_finite(), "sim.dt", "must be positive")?;
        req(self.sim.contact.k > 0.0, "sim.contact.k", "must be positive")?;
        req(self.sim.contact.f0 >= 0.0, "sim.contact.f0", "must be non-negative")?;
        req(self.obs.window > 0.0, "obs.window", "must be positive")?;
        req(self.obs.max_obs >= 1, "obs.max_obs", "must be at least 1")?;
        req(
            self.reward.goal_radius.is_none_or(|r| r > 0.0),
            "reward.goal_radius",
            "must be positive",
        )?;
        req(self.reward.shaping >= 0.0, "reward.shaping", "must be non-negative")?;
        req(self.holonomic.mass > 0.0, "holonomic.mass", "must be positive")?;
        req(
            (0.0..1.0).contains(&self.holonomic.damping),
            "holonomic.damping",
            "must be in [0, 1)",
        )?;
        req(self.holonomic.max_speed > 0.0, "holonomic.max_speed", "must be positive")?;
        req(self.diffdrive.max_u > 0.0, "diffdrive.max_u", "must be positive")?;
        req(self.diffdrive.max_w > 0.0, "diffdrive.max_w", "must be positive")?;
        self.generator
            .validate()
            .map_err(|(field, msg)| ConfigError::at(format!("generator.{field}"), msg))
    }

    pub fn obs_len(&self) -> usize {
        self.obs.len()
    }

    /// Per-agent dynamics models; the give-way scenario always has two
    /// agents.
    pub fn agent_models(&self) -> Vec<DynamicsModel> {
        match self.generator.kind {
            GeneratorKind::HeteroGiveWay if self.generator.num_diffdrive >= 1 => {
                vec![DynamicsModel::Holonomic, DynamicsModel::DiffDrive]
            }
            GeneratorKind::HeteroGiveWay => vec![DynamicsModel::Holonomic; 2],
            _ => self.generator.agent_models(),
        }
    }

    /// Agent count; the give-way scenario always has two agents.
    pub fn num_agents(&self) -> usize {
        match self.generator.kind {
            GeneratorKind::HeteroGiveWay => 2,
            _ => self.generator.num_agents,
        }
    }
}

/// Full dynamic state of one environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub agents: Vec<AgentKinematics>,
    pub goals: Vec<Vec2>,
    pub goal_radii: Vec<f64>,
    pub landmarks: Arc<Vec<Circle>>,
    pub step_index: usize,
    pub budget: usize,
    pub rng: RngKey,
    pub done: bool,
}

impl WorldState {
    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    pub fn positions(&self) -> Vec<Vec2> {
        self.agents.iter().map(|a| a.position).collect()
    }

    pub fn scene(&self) -> Scene<'_> {
        Scene {
            agents: &self.agents,
            goals: &self.goals,
            landmarks: &self.landmarks,
        }
    }

    pub fn on_goal(&self, i: usize) -> bool {
        reward::on_goal(self.agents[i].position, self.goals[i], self.goal_radii[i])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepResult {
    /// Row-major `[num_agents, obs_len]`.
    pub observations: Vec<f64>,
    pub obs_len: usize,
    pub rewards: Vec<f64>,
    pub done: bool,
    pub collisions: Vec<bool>,
    pub on_goal: Vec<bool>,
}

impl StepResult {
    pub fn observation(&self, i: usize) -> ObservationVector {
        ObservationVector::from_flat(&self.observations[i * self.obs_len..(i + 1) * self.obs_len])
    }

    pub fn num_agents(&self) -> usize {
        self.rewards.len()
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EnvError {
    #[error("config: {0}")]
    Config(#[from] ConfigError),
    #[error("map: {0}")]
    Map(#[from] MapError),
    #[error("episode finished; call reset")]
    EpisodeFinished,
    #[error("environment has not been reset")]
    NotReset,
    #[error("agent {agent}: non-finite action")]
    NonFiniteAction { agent: usize },
    #[error("dynamics: {0}")]
    Dynamics(#[from] DynamicsError),
    #[error("slot {slot}: {source}")]
    Slot {
        slot: usize,
        #[source]
        source: Box<EnvError>,
    },
}

impl EnvError {
    pub fn in_slot(self, slot: usize) -> Self {
        EnvError::Slot {
            slot,
            source: Box::new(self),
        }
    }
}

/// Layouts for text- and file-based generators, loaded once per config.
pub fn load_layouts(cfg: &GeneratorConfig) -> Result<Vec<MapSpec>, MapError> {
    match cfg.kind {
        GeneratorKind::BatchedStringGrid => maps::batched_layouts(cfg),
        _ => Ok(maps::load_layout(cfg)?.into_iter().collect()),
    }
}

/// One environment instance with its scratch buffers.
#[derive(Debug, Clone)]
pub struct Env {
    cfg: Arc<EnvConfig>,
    layouts: Arc<Vec<MapSpec>>,
    slot: usize,
    map: Option<Arc<MapSpec>>,
    placement: Option<PlacementSpec>,
    state: Option<WorldState>,
    integrator: Integrator,
    broad: BroadPhase,
    observer: Observer,
    flags: Vec<bool>,
    candidates: Vec<usize>,
}

impl Env {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let layouts = Arc::new(load_layouts(&cfg.generator)?);
        Ok(Self::with_layouts(Arc::new(cfg), layouts, 0))
    }

    /// Environment for batch slot `slot`, sharing pre-loaded layouts.
    pub fn with_layouts(cfg: Arc<EnvConfig>, layouts: Arc<Vec<MapSpec>>, slot: usize) -> Self {
        let integrator = Integrator::new(cfg.sim, cfg.holonomic, cfg.diffdrive);
        let broad = BroadPhase::new(cfg.obs.window, &[]);
        Self {
            cfg,
            layouts,
            slot,
            map: None,
            placement: None,
            state: None,
            integrator,
            broad,
            observer: Observer::new(),
            flags: Vec::new(),
            candidates: Vec::new(),
        }
    }

    pub fn config(&self) -> &EnvConfig {
        &self.cfg
    }

    pub fn slot(&self) -> usize {
        self.slot
    }

    pub fn state(&self) -> Option<&WorldState> {
        self.state.as_ref()
    }

    pub fn map(&self) -> Option<&Arc<MapSpec>> {
        self.map.as_ref()
    }

    pub fn placement(&self) -> Option<&PlacementSpec> {
        self.placement.as_ref()
    }

    /// Generates a fresh episode and returns the flattened initial
    /// observations.
    pub fn reset(&mut self, seed: u64) -> Result<Vec<f64>, EnvError> {
        let key = RngKey::from_seed(seed);
        let (map, placement) = maps::generate(&self.cfg.generator, &self.layouts, self.slot, key)?;
        let mut heading_stream = key.fold_in(2).stream();
        let agents: Vec<AgentKinematics> = (0..placement.num_agents())
            .map(|i| {
                let model = placement.agent_models[i];
                let heading = match model {
                    DynamicsModel::DiffDrive => {
                        crate::dynamics::wrap_angle(heading_stream.uniform(-std::f64::consts::PI, std::f64::consts::PI))
                    }
                    DynamicsModel::Holonomic => 0.0,
                };
                AgentKinematics {
                    position: placement.agent_starts[i],
                    velocity: Vec2::ZERO,
                    heading,
                    radius: placement.agent_radii[i],
                    model,
                }
            })
            .collect();
        let goal_radii = placement
            .agent_radii
            .iter()
            .map(|&r| self.cfg.reward.goal_radius_for(r))
            .collect();
        let landmarks = Arc::new(map.landmarks.clone());
        self.broad = BroadPhase::new(self.cfg.obs.window, &landmarks);
        self.state = Some(WorldState {
            agents,
            goals: placement.goals.clone(),
            goal_radii,
            landmarks,
            step_index: 0,
            budget: self.cfg.episode_budget,
            rng: key.fold_in(3),
            done: false,
        });
        self.map = Some(Arc::new(map));
        self.placement = Some(placement);
        Ok(self.observe_all())
    }

    fn observe_all(&mut self) -> Vec<f64> {
        let state = self.state.as_ref().expect("reset");
        let len = self.cfg.obs.len();
        let n = state.num_agents();
        let mut out = vec![0.0; n * len];
        self.broad
            .update_agents(state.agents.iter().map(AgentKinematics::circle));
        let scene = state.scene();
        for (i, chunk) in out.chunks_exact_mut(len).enumerate() {
            self.observer
                .observe_into(i, &scene, &mut self.broad, &self.cfg.obs, chunk);
        }
        out
    }

    /// Flattened observations of the current state.
    pub fn observations(&mut self) -> Result<Vec<f64>, EnvError> {
        if self.state.is_none() {
            return Err(EnvError::NotReset);
        }
        Ok(self.observe_all())
    }

    /// Advances one environment step (`frameskip` integration steps with the
    /// actions held). Episodes always last exactly `episode_budget` steps.
    pub fn step(&mut self, actions: &[Action]) -> Result<StepResult, EnvError> {
        let state = self.state.as_mut().ok_or(EnvError::NotReset)?;
        if state.done {
            return Err(EnvError::EpisodeFinished);
        }
        if let Some(i) = actions.iter().position(|a| !a.is_finite()) {
            return Err(EnvError::NonFiniteAction { agent: i });
        }
        Integrator::check_actions(&state.agents, actions)?;
        let prev: Vec<Vec2> = state.positions();
        let landmarks = Arc::clone(&state.landmarks);
        self.integrator
            .substep(&mut state.agents, &landmarks, actions, &mut self.broad)?;
        state.step_index += 1;
        state.done = state.step_index >= state.budget;

        self.broad
            .update_agents(state.agents.iter().map(AgentKinematics::circle));
        reward::collision_flags_into(
            &state.agents,
            &landmarks,
            &mut self.broad,
            &mut self.flags,
            &mut self.candidates,
        );
        let curr = state.positions();
        let rewards = reward::step_rewards(
            &prev,
            &curr,
            &state.goals,
            &state.goal_radii,
            &self.flags,
            &self.cfg.reward,
        );
        let on_goal = (0..state.num_agents()).map(|i| state.on_goal(i)).collect();
        let done = state.done;
        let collisions = self.flags.clone();
        let observations = self.observe_all();
        Ok(StepResult {
            observations,
            obs_len: self.cfg.obs.len(),
            rewards,
            done,
            collisions,
            on_goal,
        })
    }

    /// Per-agent trace records for the current state and the flags of the
    /// last step.
    pub fn records(&self, result: &StepResult) -> Vec<AgentRecord> {
        let state = self.state.as_ref().expect("reset");
        (0..state.num_agents())
            .map(|i| AgentRecord {
                position: state.agents[i].position,
                distance_to_goal: (state.agents[i].position - state.goals[i]).norm(),
                on_goal: result.on_goal[i],
                collision: result.collisions[i],
            })
            .collect()
    }
}

/// Functional form of [`Env::reset`].
pub fn reset(cfg: &EnvConfig, seed: u64) -> Result<(WorldState, Vec<f64>), EnvError> {
    let mut env = Env::new(cfg.clone())?;
    let obs = env.reset(seed)?;
    Ok((env.state.expect("reset"), obs))
}

/// Lockstep batch of environments sharing one configuration. Slot `k`
/// behaves exactly like a standalone [`Env`] for slot `k` with the same
/// seed; slots never exchange data.
pub struct BatchEnv {
    envs: Vec<Env>,
    pool: rayon::ThreadPool,
}

impl BatchEnv {
    pub fn new(cfg: EnvConfig) -> Result<Self, EnvError> {
        cfg.validate()?;
        let layouts = Arc::new(load_layouts(&cfg.generator)?);
        let threads = cfg.threads.unwrap_or(0);
        let batch = cfg.batch_size;
        let cfg = Arc::new(cfg);
        let envs = (0..batch)
            .map(|k| Env::with_layouts(Arc::clone(&cfg), Arc::clone(&layouts), k))
            .collect();
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .map_err(|e| ConfigError::at("threads", e.to_string()))?;
        Ok(Self { envs, pool })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[Env] {
        &self.envs
    }

    pub fn env(&self, slot: usize) -> &Env {
        &self.envs[slot]
    }

    pub fn env_mut(&mut self, slot: usize) -> &mut Env {
        &mut self.envs[slot]
    }

    /// Resets every slot with its own seed; one result per slot.
    pub fn reset(&mut self, seeds: &[u64]) -> Vec<Result<Vec<f64>, EnvError>> {
        assert_eq!(seeds.len(), self.envs.len(), "one seed per slot");
        let envs = &mut self.envs;
        self.pool.install(|| {
            envs.par_iter_mut()
                .zip(seeds.par_iter())
                .enumerate()
                .map(|(k, (env, &seed))| env.reset(seed).map_err(|e| e.in_slot(k)))
                .collect()
        })
    }

    /// Steps every slot with its own actions; one result per slot.
    pub fn step(&mut self, actions: &[Vec<Action>]) -> Vec<Result<StepResult, EnvError>> {
        assert_eq!(actions.len(), self.envs.len(), "one action list per slot");
        let envs = &mut self.envs;
        self.pool.install(|| {
            envs.par_iter_mut()
                .zip(actions.par_iter())
                .enumerate()
                .map(|(k, (env, a))| env.step(a).map_err(|e| e.in_slot(k)))
                .collect()
        })
    }
}

/// 64-bit FNV-1a over the exact bit patterns of floats, for pinning
/// trajectories.
#[derive(Debug, Clone, Copy)]
pub struct Digest(u64);

impl Default for Digest {
    fn default() -> Self {
        Self(0xcbf2_9ce4_8422_2325)
    }
}

impl Digest {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn write_u64(&mut self, v: u64) {
        for b in v.to_le_bytes() {
            self.0 ^= b as u64;
            self.0 = self.0.wrapping_mul(0x0100_0000_01b3);
        }
    }

    pub fn write_f64(&mut self, v: f64) {
        self.write_u64(v.to_bits());
    }

    pub fn write_state(&mut self, s: &WorldState) {
        self.write_u64(s.step_index as u64);
        for a in &s.agents {
            self.write_f64(a.position.x);
            self.write_f64(a.position.y);
            self.write_f64(a.velocity.x);
            self.write_f64(a.velocity.y);
            self.write_f64(a.heading);
        }
    }

    pub fn write_result(&mut self, r: &StepResult) {
        r.observations.iter().for_each(|&v| self.write_f64(v));
        r.rewards.iter().for_each(|&v| self.write_f64(v));
        for (&c, &g) in r.collisions.iter().zip(&r.on_goal) {
            self.write_u64(c as u64 | (g as u64) << 1);
        }
        self.write_u64(r.done as u64);
    }

    pub fn finish(&self) -> u64 {
        self.0
    }
}
