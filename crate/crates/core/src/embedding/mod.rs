//! Triplet embedding network: a stack of rectified fully connected layers
//! trained so that shots of the same story land closer together than shots
//! of different stories.

mod importance;
mod model;
mod train;

use serde::{Deserialize, Serialize};

pub use importance::{feature_importance, input_jacobian, BlockImportance};
pub use model::{DropoutMask, EmbeddingModel, Gradients, DEFAULT_HIDDEN};
pub use train::{batch_gradient, batch_loss, train, triplet_loss, TrainConfig, TrainOutcome, TrainingVideo, Triplet};

use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

/// On-disk model: parameters plus the configuration that produced them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub version: u32,
    pub model: EmbeddingModel,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<TrainConfig>,
}

impl Checkpoint {
    pub fn new(model: EmbeddingModel, config: Option<TrainConfig>) -> Self {
        Checkpoint {
            version: CHECKPOINT_VERSION,
            model,
            config,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.version != CHECKPOINT_VERSION {
            return Err(Error::invalid(format!(
                "unsupported checkpoint version {} (expected {CHECKPOINT_VERSION})",
                self.version
            )));
        }
        self.model.validate()
    }
}
