//! Desk-scale differentiable backend: a learned token embedding in place of a
//! pretrained encoder, feed-forward scorers with hand-written backprop, the two
//! training losses, AdamW, and the teacher-forced training loop.

pub mod checkpoint;
pub mod ffnn;
pub mod loss;
pub mod model;
pub mod optimizer;
pub mod param;
pub mod train;

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::engine::EngineError;

pub use checkpoint::{config_hash, Checkpoint};
pub use loss::{cluster_loss, mention_loss};
pub use model::{Model, ModelConfig, Objective, ParameterStore, Vocab};
pub use optimizer::{optimizer_step, OptimizerState};
pub use param::{Param, ParamGroup};
pub use train::{evaluate, train, EvalRecord, TrainOutcome};

#[derive(Debug, Error)]
pub enum LearningError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error("trace step {0} has no usable gold action")]
    MissingGoldAction(usize),
    #[error("training stream is empty")]
    EmptyStream,
    #[error("non-finite parameters after step {0}")]
    NonFinite(usize),
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("checkpoint version {0} is not supported")]
    CheckpointVersion(u32),
    #[error("checkpoint config hash {stored} does not match its configuration ({computed})")]
    ConfigHash { stored: String, computed: String },
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Json(#[from] serde_json::Error),
    #[error("history csv: {0}")]
    Csv(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub steps: usize,
    pub eval_every: usize,
    pub patience: usize,
    pub lr_encoder: f64,
    pub lr_rest: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            steps: 100_000,
            eval_every: 5_000,
            patience: 5,
            lr_encoder: 1e-5,
            lr_rest: 3e-4,
            weight_decay: 0.01,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), LearningError> {
        if self.steps == 0 {
            return Err(LearningError::InvalidConfig("steps must be positive".into()));
        }
        if self.eval_every == 0 {
            return Err(LearningError::InvalidConfig("eval_every must be positive".into()));
        }
        if !(self.lr_encoder > 0.0 && self.lr_rest > 0.0) {
            return Err(LearningError::InvalidConfig("learning rates must be positive".into()));
        }
        if self.patience == 0 {
            return Err(LearningError::InvalidConfig("patience must be positive".into()));
        }
        Ok(())
    }
}
