//! Three-tier evaluation protocol: episodes, per-task aggregates and
//! cross-task summaries.

use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::env::{from_path_error, ConfigError, Env, EnvConfig, EnvError};
use crate::maps::GeneratorKind;
use crate::policies::{Policy, PolicyError};
use crate::render::EpisodeRecording;
use crate::reward::{finalize_metrics, EpisodeMetrics, EpisodeTrace, MetricsError};
use crate::rng::RngKey;
use crate::stats;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Easy,
    Medium,
    Hard,
}

impl Tier {
    pub fn name(self) -> &'static str {
        match self {
            Tier::Easy => "easy",
            Tier::Medium => "medium",
            Tier::Hard => "hard",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskSpec {
    pub id: String,
    pub tier: Tier,
    pub episodes: usize,
    pub seed: u64,
    pub config: EnvConfig,
}

/// A task list file: `tier` plus `[[tasks]]` entries.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskList {
    pub tier: Tier,
    pub tasks: Vec<TaskSpec>,
}

impl TaskList {
    /// Parses a TOML task list; every task config is validated and errors
    /// name the key path, e.g. `tasks[2].config.generator.kind`.
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let table: toml::Table = text
            .parse()
            .map_err(|e: toml::de::Error| ConfigError::at("", e.to_string().trim().to_string()))?;
        let list: TaskList = serde_path_to_error::deserialize(table).map_err(from_path_error)?;
        for (i, t) in list.tasks.iter().enumerate() {
            if t.episodes == 0 {
                return Err(ConfigError::at(format!("tasks[{i}].episodes"), "must be at least 1"));
            }
            t.config.validate().map_err(|e| {
                let path = if e.path.is_empty() {
                    format!("tasks[{i}].config")
                } else {
                    format!("tasks[{i}].config.{}", e.path)
                };
                ConfigError::at(path, e.message)
            })?;
        }
        Ok(list)
    }

    pub fn from_file(path: &std::path::Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| ConfigError::at("", format!("{}: {e}", path.display())))?;
        let mut list = Self::from_toml_str(&text)?;
        if let Some(dir) = path.parent() {
            for t in &mut list.tasks {
                t.config.resolve_paths(dir);
            }
        }
        Ok(list)
    }
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum EvalError {
    #[error("episode {episode}: {source}")]
    Env {
        episode: usize,
        #[source]
        source: EnvError,
    },
    #[error("episode {episode}: {source}")]
    Policy {
        episode: usize,
        #[source]
        source: PolicyError,
    },
    #[error("episode {episode}: {source}")]
    Metrics {
        episode: usize,
        #[source]
        source: MetricsError,
    },
    #[error("task {task}: episodes must be at least 1")]
    NoEpisodes { task: String },
    #[error("{tier} tier: {message}")]
    TierShape { tier: &'static str, message: String },
}

/// Episode seed for `episode_index` of a task seeded with `task_seed`.
pub fn episode_seed(task_seed: u64, episode_index: usize) -> u64 {
    RngKey::from_seed(task_seed)
        .fold_in(episode_index as u64)
        .stream()
        .next_u64()
}

/// Runs one episode of `env` with `policy` and returns the full trace.
pub fn run_episode_in(
    env: &mut Env,
    policy: &mut dyn Policy,
    seed: u64,
    episode: usize,
) -> Result<EpisodeTrace, EvalError> {
    let env_err = |source| EvalError::Env { episode, source };
    let pol_err = |source| EvalError::Policy { episode, source };
    let mut obs = env.reset(seed).map_err(env_err)?;
    {
        let (map, placement, state) = (
            env.map().expect("reset"),
            env.placement().expect("reset"),
            env.state().expect("reset"),
        );
        policy.episode_start(map, placement, state).map_err(pol_err)?;
    }
    let n = env.state().expect("reset").num_agents();
    let mut trace = EpisodeTrace::new(n, env.config().episode_budget);
    let mut actions = Vec::with_capacity(n);
    loop {
        policy
            .act(&obs, env.state().expect("reset"), &mut actions)
            .map_err(pol_err)?;
        let result = env.step(&actions).map_err(env_err)?;
        trace.push(env.records(&result));
        obs = result.observations;
        if result.done {
            return Ok(trace);
        }
    }
}

/// Runs one episode and keeps every frame for rendering.
pub fn record_episode(
    cfg: &EnvConfig,
    policy: &mut dyn Policy,
    seed: u64,
) -> Result<(EpisodeRecording, EpisodeMetrics), EvalError> {
    let env_err = |source| EvalError::Env { episode: 0, source };
    let pol_err = |source| EvalError::Policy { episode: 0, source };
    let mut env = Env::new(cfg.clone()).map_err(env_err)?;
    let mut obs = env.reset(seed).map_err(env_err)?;
    policy
        .episode_start(
            env.map().expect("reset"),
            env.placement().expect("reset"),
            env.state().expect("reset"),
        )
        .map_err(pol_err)?;
    let state = env.state().expect("reset");
    let map = env.map().expect("reset");
    let mut rec = EpisodeRecording {
        seed,
        policy: policy.name().to_string(),
        layout_id: map.layout_id.clone(),
        bounds: map.bounds,
        landmarks: map.landmarks.clone(),
        goals: state.goals.clone(),
        radii: state.agents.iter().map(|a| a.radius).collect(),
        goal_radii: state.goal_radii.clone(),
        frames: vec![state.positions()],
        paths: policy.planned_paths(),
        metrics: None,
    };
    let mut trace = EpisodeTrace::new(state.num_agents(), cfg.episode_budget);
    let mut actions = Vec::new();
    loop {
        policy
            .act(&obs, env.state().expect("reset"), &mut actions)
            .map_err(pol_err)?;
        let result = env.step(&actions).map_err(env_err)?;
        trace.push(env.records(&result));
        rec.frames.push(env.state().expect("reset").positions());
        obs = result.observations;
        if result.done {
            break;
        }
    }
    let metrics = finalize_metrics(&trace).map_err(|source| EvalError::Metrics { episode: 0, source })?;
    rec.metrics = Some(metrics.clone());
    Ok((rec, metrics))
}

/// Runs episode `episode_index` of `task` and computes its metrics.
pub fn run_episode(
    task: &TaskSpec,
    policy: &mut dyn Policy,
    episode_index: usize,
) -> Result<EpisodeMetrics, EvalError> {
    let mut env = Env::new(task.config.clone()).map_err(|source| EvalError::Env {
        episode: episode_index,
        source,
    })?;
    let trace = run_episode_in(&mut env, policy, episode_seed(task.seed, episode_index), episode_index)?;
    finalize_metrics(&trace).map_err(|source| EvalError::Metrics {
        episode: episode_index,
        source,
    })
}

/// Creates a fresh policy for each episode.
pub type PolicyFactory<'a> = dyn Fn() -> Box<dyn Policy> + Sync + 'a;

/// Metrics of every episode of `task`, in episode order.
pub fn run_task(task: &TaskSpec, factory: &PolicyFactory) -> Result<Vec<EpisodeMetrics>, EvalError> {
    if task.episodes == 0 {
        return Err(EvalError::NoEpisodes { task: task.id.clone() });
    }
    let base = Env::new(task.config.clone()).map_err(|source| EvalError::Env { episode: 0, source })?;
    (0..task.episodes)
        .into_par_iter()
        .map(|e| {
            let mut env = base.clone();
            let mut policy = factory();
            let trace = run_episode_in(&mut env, policy.as_mut(), episode_seed(task.seed, e), e)?;
            finalize_metrics(&trace).map_err(|source| EvalError::Metrics { episode: e, source })
        })
        .collect()
}

pub const METRIC_NAMES: [&str; 4] = ["sr", "ft", "ms", "co"];

/// Higher-is-better scores in `[0, 1]`: SR and CO as is, FT and MS as
/// `1 − value/T`.
pub fn normalized_scores(m: &EpisodeMetrics, budget: usize) -> [f64; 4] {
    let t = budget as f64;
    [
        m.success_rate,
        1.0 - m.flowtime / t,
        1.0 - m.makespan / t,
        m.coordination,
    ]
}

pub fn raw_scores(m: &EpisodeMetrics) -> [f64; 4] {
    [m.success_rate, m.flowtime, m.makespan, m.coordination]
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub iqm: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

/// IQM with a 1000-resample percentile bootstrap interval. The interval is
/// widened to contain the point estimate when resampling misses it.
pub fn aggregate(values: &[f64], rng: RngKey) -> Aggregate {
    let iqm = stats::iqm(values).expect("non-empty");
    let (lo, hi) = stats::iqm_ci(values, rng).expect("non-empty");
    Aggregate {
        iqm,
        ci_lo: lo.min(iqm),
        ci_hi: hi.max(iqm),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskReport {
    pub task_id: String,
    pub tier: Tier,
    pub episodes: usize,
    pub seed: u64,
    pub num_agents: usize,
    pub map: String,
    /// Raw metric aggregates in `METRIC_NAMES` order; empty on failure.
    pub metrics: Vec<Aggregate>,
    /// IQM of the normalized scores in `METRIC_NAMES` order.
    pub normalized: Vec<f64>,
    /// Per-episode normalized SR.
    pub episode_scores: Vec<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub map: String,
    pub num_agents: usize,
    pub metrics: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtocolReport {
    pub tier: Tier,
    pub policy: String,
    pub tasks: Vec<TaskReport>,
    pub taus: Vec<f64>,
    /// Performance profile of per-episode SR over all tasks.
    pub profile: Vec<f64>,
    /// Optimality gap of the per-task normalized IQMs, per metric.
    pub optimality_gap: Vec<f64>,
    /// Hard tier only: metric IQMs per (map, agent count).
    pub sweep: Vec<SweepRow>,
}

pub fn profile_taus() -> Vec<f64> {
    (0..=20).map(|i| i as f64 / 20.0).collect()
}

fn map_label(cfg: &EnvConfig) -> String {
    let g = &cfg.generator;
    match (&g.map_file, g.kind) {
        (Some(p), _) => p
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default(),
        (None, kind) => format!("{}-{}x{}", kind.name(), g.rows, g.cols),
    }
}

/// Checks that the task list has the shape the tier requires.
pub fn check_tier_shape(tier: Tier, tasks: &[TaskSpec]) -> Result<(), EvalError> {
    let fail = |message: String| {
        Err(EvalError::TierShape {
            tier: tier.name(),
            message,
        })
    };
    if tasks.is_empty() {
        return fail("no tasks".into());
    }
    if let Some(t) = tasks.iter().find(|t| t.tier != tier) {
        return fail(format!("task {} is tagged {}", t.id, t.tier.name()));
    }
    match tier {
        Tier::Easy => Ok(()),
        Tier::Medium => {
            if tasks.len() != 12 {
                return fail(format!("needs 12 tasks, got {}", tasks.len()));
            }
            let count = |k| tasks.iter().filter(|t| t.config.generator.kind == k).count();
            if count(GeneratorKind::RandomGrid) != 6 || count(GeneratorKind::MazeGrid) != 6 {
                return fail("needs 6 random_grid and 6 maze_grid tasks".into());
            }
            Ok(())
        }
        Tier::Hard => {
            if let Some(t) = tasks
                .iter()
                .find(|t| t.config.generator.kind != GeneratorKind::Movingai)
            {
                return fail(format!("task {} is not a movingai map", t.id));
            }
            Ok(())
        }
    }
}

/// Runs every task; task failures are recorded and the run continues.
pub fn run_protocol(
    tier: Tier,
    tasks: &[TaskSpec],
    policy_name: &str,
    factory: &PolicyFactory,
) -> Result<ProtocolReport, EvalError> {
    check_tier_shape(tier, tasks)?;
    let mut reports = Vec::with_capacity(tasks.len());
    for task in tasks {
        let mut report = TaskReport {
            task_id: task.id.clone(),
            tier,
            episodes: task.episodes,
            seed: task.seed,
            num_agents: task.config.num_agents(),
            map: map_label(&task.config),
            metrics: Vec::new(),
            normalized: Vec::new(),
            episode_scores: Vec::new(),
            error: None,
        };
        match run_task(task, factory) {
            Ok(ms) => {
                let key = RngKey::from_seed(task.seed).fold_in(u64::MAX);
                let budget = task.config.episode_budget;
                for k in 0..4 {
                    let raw: Vec<f64> = ms.iter().map(|m| raw_scores(m)[k]).collect();
                    let norm: Vec<f64> = ms.iter().map(|m| normalized_scores(m, budget)[k]).collect();
                    report.metrics.push(aggregate(&raw, key.fold_in(k as u64)));
                    report.normalized.push(stats::iqm(&norm).expect("non-empty"));
                }
                report.episode_scores = ms.iter().map(|m| m.success_rate).collect();
            }
            Err(e) => report.error = Some(e.to_string()),
        }
        reports.push(report);
    }
    let ok: Vec<&TaskReport> = reports.iter().filter(|r| r.error.is_none()).collect();
    let all_scores: Vec<f64> = ok.iter().flat_map(|r| r.episode_scores.iter().copied()).collect();
    let taus = profile_taus();
    let profile = stats::performance_profile(&all_scores, &taus);
    let optimality_gap = (0..4)
        .map(|k| stats::optimality_gap(&ok.iter().map(|r| r.normalized[k]).collect::<Vec<_>>()))
        .collect();
    let sweep = if tier == Tier::Hard {
        ok.iter()
            .map(|r| SweepRow {
                map: r.map.clone(),
                num_agents: r.num_agents,
                metrics: r.metrics.iter().map(|a| a.iqm).collect(),
            })
            .collect()
    } else {
        Vec::new()
    };
    Ok(ProtocolReport {
        tier,
        policy: policy_name.to_string(),
        tasks: reports,
        taus,
        profile,
        optimality_gap,
        sweep,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRecord {
    pub task: String,
    pub tier: Tier,
    pub policy: String,
    pub metric: String,
    pub iqm: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
    pub episodes: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImprovementPair {
    pub task: String,
    pub metric: String,
    pub x: String,
    pub y: String,
    pub probability: f64,
}

impl ProtocolReport {
    pub fn records(&self) -> Vec<MetricRecord> {
        let mut out = Vec::new();
        for t in &self.tasks {
            for (name, a) in METRIC_NAMES.iter().zip(&t.metrics) {
                out.push(MetricRecord {
                    task: t.task_id.clone(),
                    tier: self.tier,
                    policy: self.policy.clone(),
                    metric: name.to_string(),
                    iqm: a.iqm,
                    ci_lo: a.ci_lo,
                    ci_hi: a.ci_hi,
                    episodes: t.episodes,
                    seed: t.seed,
                });
            }
        }
        out
    }

    /// One JSON object per task and metric.
    pub fn to_jsonl(&self) -> String {
        let mut s = String::new();
        for r in self.records() {
            s.push_str(&serde_json::to_string(&r).expect("serializable"));
            s.push('\n');
        }
        s
    }

    /// Agent-count sweep as CSV.
    pub fn sweep_csv(&self) -> String {
        let mut s = String::from("map,num_agents,sr,ft,ms,co\n");
        for r in &self.sweep {
            let _ = write!(s, "{},{}", r.map, r.num_agents);
            for v in &r.metrics {
                let _ = write!(s, ",{v}");
            }
            s.push('\n');
        }
        s
    }
}

/// Per task, the probability that policy `x` beats policy `y` on
/// per-episode SR.
pub fn improvement_pairs(x: &ProtocolReport, y: &ProtocolReport) -> Vec<ImprovementPair> {
    x.tasks
        .iter()
        .zip(&y.tasks)
        .filter(|(a, b)| a.error.is_none() && b.error.is_none())
        .filter_map(|(a, b)| {
            Some(ImprovementPair {
                task: a.task_id.clone(),
                metric: "sr".into(),
                x: x.policy.clone(),
                y: y.policy.clone(),
                probability: stats::prob_improvement(&a.episode_scores, &b.episode_scores).ok()?,
            })
        })
        .collect()
}
