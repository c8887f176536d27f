use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{Model, ModelConfig};
use super::optimizer::OptimizerState;
use super::{LearningError, TrainConfig};

pub const CHECKPOINT_VERSION: u32 = 1;

/// Parameters, optimizer moments and the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub config_hash: String,
    pub step: usize,
    pub train_config: Option<TrainConfig>,
    pub optimizer: OptimizerState,
    pub model: Model,
}

/// Hex SHA-256 of the canonical JSON of the model and training configuration.
pub fn config_hash(model: &ModelConfig, train: Option<&TrainConfig>) -> String {
    let json = serde_json::to_string(&(model, train)).expect("configs serialize");
    hex::encode(Sha256::digest(json.as_bytes()))
}

impl Checkpoint {
    pub fn new(mut model: Model, train_config: Option<TrainConfig>, optimizer: OptimizerState, step: usize) -> Self {
        model.params.zero_grad();
        Checkpoint {
            version: CHECKPOINT_VERSION,
            config_hash: config_hash(&model.config, train_config.as_ref()),
            step,
            train_config,
            optimizer,
            model,
        }
    }

    pub fn save(&self, path: &Path) -> Result<(), LearningError> {
        let json = serde_json::to_string(self)?;
        std::fs::write(path, json).map_err(|source| LearningError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load(path: &Path) -> Result<Checkpoint, LearningError> {
        let text = std::fs::read_to_string(path).map_err(|source| LearningError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut ck: Checkpoint = serde_json::from_str(&text)?;
        if ck.version != CHECKPOINT_VERSION {
            return Err(LearningError::CheckpointVersion(ck.version));
        }
        let expected = config_hash(&ck.model.config, ck.train_config.as_ref());
        if ck.config_hash != expected {
            return Err(LearningError::ConfigHash {
                stored: ck.config_hash,
                computed: expected,
            });
        }
        ck.model.params.zero_grad();
        Ok(ck)
    }
}
