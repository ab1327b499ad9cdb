//! Flat-array batched interface for foreign callers: one contiguous buffer
//! per field per call.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::dynamics::{Action, DynamicsModel};
use crate::env::{BatchEnv, EnvConfig, EnvError};

pub const ACTION_LEN: usize = 2;

pub fn version() -> &'static str {
    env!("CARGO_PKG_VERSION")
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum BulkError {
    #[error("{0}")]
    Env(#[from] EnvError),
    #[error("{field}: expected shape {expected:?}, got {got:?}")]
    ShapeMismatch {
        field: &'static str,
        expected: Vec<usize>,
        got: Vec<usize>,
    },
    #[error("environment handle is closed")]
    Closed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Description {
    pub batch_size: usize,
    pub num_agents: usize,
    pub obs_len: usize,
    pub action_len: usize,
    /// Per-agent model names, identical across slots.
    pub agent_models: Vec<DynamicsModel>,
    pub version: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkReset {
    /// `[B, N, obs_len]`.
    pub observations: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BulkStep {
    /// `[B, N, obs_len]`.
    pub observations: Vec<f64>,
    /// `[B, N]`.
    pub rewards: Vec<f64>,
    /// `[B]`.
    pub dones: Vec<bool>,
    /// `[B, N]`.
    pub collisions: Vec<bool>,
    /// `[B, N]`.
    pub on_goal: Vec<bool>,
}

pub struct BulkEnv {
    batch: Option<BatchEnv>,
    desc: Description,
    models: Vec<DynamicsModel>,
}

impl BulkEnv {
    pub fn create(cfg: EnvConfig) -> Result<Self, BulkError> {
        let models = cfg.agent_models();
        let desc = Description {
            batch_size: cfg.batch_size,
            num_agents: cfg.num_agents(),
            obs_len: cfg.obs_len(),
            action_len: ACTION_LEN,
            agent_models: models.clone(),
            version: version().to_string(),
        };
        let batch = BatchEnv::new(cfg)?;
        Ok(Self {
            batch: Some(batch),
            desc,
            models,
        })
    }

    pub fn create_from_file(path: &Path) -> Result<Self, BulkError> {
        Self::create(EnvConfig::from_file(path).map_err(EnvError::from)?)
    }

    pub fn create_from_value(value: serde_json::Value) -> Result<Self, BulkError> {
        Self::create(EnvConfig::from_json_value(value).map_err(EnvError::from)?)
    }

    pub fn describe(&self) -> Result<&Description, BulkError> {
        self.batch.as_ref().ok_or(BulkError::Closed)?;
        Ok(&self.desc)
    }

    fn batch(&mut self) -> Result<&mut BatchEnv, BulkError> {
        self.batch.as_mut().ok_or(BulkError::Closed)
    }

    pub fn reset(&mut self, seeds: &[u64]) -> Result<BulkReset, BulkError> {
        self.batch()?;
        let b = self.desc.batch_size;
        if seeds.len() != b {
            return Err(BulkError::ShapeMismatch {
                field: "seeds",
                expected: vec![b],
                got: vec![seeds.len()],
            });
        }
        let mut observations = Vec::new();
        for r in self.batch()?.reset(seeds) {
            observations.extend(r?);
        }
        Ok(BulkReset { observations })
    }

    /// `actions` is row-major with the given `shape`, which must be
    /// `[B, N, 2]`: force `(x, y)` for holonomic agents, `(u, ω)` for
    /// differential-drive agents.
    pub fn step(&mut self, actions: &[f64], shape: &[usize]) -> Result<BulkStep, BulkError> {
        self.batch()?;
        let expected = vec![self.desc.batch_size, self.desc.num_agents, ACTION_LEN];
        let count: usize = shape.iter().product();
        if shape != expected.as_slice() || count != actions.len() {
            let got = if count == actions.len() {
                shape.to_vec()
            } else {
                vec![actions.len()]
            };
            return Err(BulkError::ShapeMismatch {
                field: "actions",
                expected,
                got,
            });
        }
        let n = self.desc.num_agents;
        let per_slot: Vec<Vec<Action>> = actions
            .chunks_exact(n * ACTION_LEN)
            .map(|chunk| {
                chunk
                    .chunks_exact(ACTION_LEN)
                    .zip(&self.models)
                    .map(|(a, &m)| Action::from_pair(m, [a[0], a[1]]))
                    .collect()
            })
            .collect();
        let batch = self.batch()?;
        let mut out = BulkStep {
            observations: Vec::new(),
            rewards: Vec::new(),
            dones: Vec::new(),
            collisions: Vec::new(),
            on_goal: Vec::new(),
        };
        for r in batch.step(&per_slot) {
            let r = r?;
            out.observations.extend(r.observations);
            out.rewards.extend(r.rewards);
            out.dones.push(r.done);
            out.collisions.extend(r.collisions);
            out.on_goal.extend(r.on_goal);
        }
        Ok(out)
    }

    pub fn close(&mut self) -> Result<(), BulkError> {
        self.batch.take().map(|_| ()).ok_or(BulkError::Closed)
    }
}
