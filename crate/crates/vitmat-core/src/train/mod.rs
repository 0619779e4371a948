//! Cross-entropy training with Adam.
//!
//! Defaults follow the training recipe: 25 epochs, learning rate 0.0003,
//! batch size 8, cross-entropy loss, Adam with `beta1 = 0.9`,
//! `beta2 = 0.999`, `eps = 1e-8`. No learning-rate schedule, weight decay or
//! gradient clipping. The whole trajectory is a deterministic function of
//! `(seed, data, config)`.

mod adam;
mod loss;
mod trainer;

pub use adam::{adam_step, AdamState};
pub use loss::cross_entropy;
pub use trainer::{fit, train_epoch, write_history_csv, EpochRow, EpochStats, FitOutcome};

use serde::{Deserialize, Serialize};

use crate::augment::{AugPolicy, NormalizeConst};
use crate::error::{Error, Result};

/// Numeric precision of a training run. 32-bit is the default; 64-bit is
/// for gradient verification and bitwise-reproducibility checks.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Precision {
    #[default]
    F32,
    F64,
}

/// Hyperparameters of one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub learning_rate: f64,
    pub batch_size: usize,
    pub seed: u64,
    pub precision: Precision,
    pub augment: AugPolicy,
    pub normalize: NormalizeConst,
    /// Save a checkpoint every this many epochs; 0 saves only the final and
    /// best-validation checkpoints.
    pub checkpoint_every: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            epochs: 25,
            learning_rate: 3e-4,
            batch_size: 8,
            seed: 0,
            precision: Precision::default(),
            augment: AugPolicy::default(),
            normalize: NormalizeConst::default(),
            checkpoint_every: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.epochs == 0 {
            return Err(Error::Input("epochs must be at least 1".into()));
        }
        if self.learning_rate <= 0.0 || !self.learning_rate.is_finite() {
            return Err(Error::Input(format!(
                "learning rate {} must be positive",
                self.learning_rate
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Input("batch size must be at least 1".into()));
        }
        self.augment.validate()
    }
}
