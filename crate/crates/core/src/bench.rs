//! Throughput measurement of batched stepping.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Action, DynamicsModel};
use crate::env::{BatchEnv, EnvConfig, EnvError};
use crate::geometry::Vec2;
use crate::rng::RngKey;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BenchPolicy {
    Zero,
    Random,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchReport {
    pub envs: usize,
    pub agents: usize,
    pub steps: usize,
    pub wall_seconds: f64,
    /// Environment steps per second across the batch.
    pub sps: f64,
    pub agent_steps_per_second: f64,
}

impl BenchReport {
    pub fn new(envs: usize, agents: usize, steps: usize, wall_seconds: f64) -> Self {
        let sps = (envs * steps) as f64 / wall_seconds;
        Self {
            envs,
            agents,
            steps,
            wall_seconds,
            sps,
            agent_steps_per_second: sps * agents as f64,
        }
    }
}

fn actions_for(batch: &BatchEnv, policy: BenchPolicy, rng: RngKey, step: usize) -> Vec<Vec<Action>> {
    let mut s = rng.fold_in(step as u64).stream();
    batch
        .envs()
        .iter()
        .map(|env| {
            let state = env.state().expect("reset");
            state
                .agents
                .iter()
                .map(|a| match (policy, a.model) {
                    (BenchPolicy::Zero, m) => Action::zero_for(m),
                    (BenchPolicy::Random, DynamicsModel::Holonomic) => {
                        Action::Force(Vec2::new(s.uniform(-1.0, 1.0), s.uniform(-1.0, 1.0)))
                    }
                    (BenchPolicy::Random, DynamicsModel::DiffDrive) => Action::Drive {
                        linear: s.uniform(-1.0, 1.0),
                        angular: s.uniform(-1.0, 1.0),
                    },
                })
                .collect()
        })
        .collect()
}

/// Resets `cfg.batch_size` environments, runs `warmup` untimed steps, then
/// times `steps` lockstep steps. Episodes that run out of budget are reset
/// outside the timed region.
pub fn run_bench(cfg: &EnvConfig, steps: usize, warmup: usize, policy: BenchPolicy) -> Result<BenchReport, EnvError> {
    let mut batch = BatchEnv::new(cfg.clone())?;
    let seeds: Vec<u64> = (0..batch.len() as u64).map(|k| cfg.seed.wrapping_add(k)).collect();
    let reset_all = |batch: &mut BatchEnv| -> Result<(), EnvError> {
        batch.reset(&seeds).into_iter().try_for_each(|r| r.map(|_| ()))
    };
    reset_all(&mut batch)?;
    let rng = RngKey::from_seed(cfg.seed).fold_in(7);
    let agents = cfg.num_agents();
    let budget = cfg.episode_budget;
    let mut elapsed = 0.0;
    let mut since_reset = 0;
    for t in 0..warmup + steps {
        if since_reset == budget {
            reset_all(&mut batch)?;
            since_reset = 0;
        }
        let actions = actions_for(&batch, policy, rng, t);
        let start = Instant::now();
        let results = batch.step(&actions);
        let dt = start.elapsed().as_secs_f64();
        for r in results {
            r?;
        }
        since_reset += 1;
        if t >= warmup {
            elapsed += dt;
        }
    }
    Ok(BenchReport::new(batch.len(), agents, steps, elapsed.max(f64::MIN_POSITIVE)))
}
