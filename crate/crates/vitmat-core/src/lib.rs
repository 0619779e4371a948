//! Vision-transformer toolkit for construction-material image classification.
//!
//! The crate is organized around the pipeline it implements:
//!
//! - [`tensor`]: dense tensor math with reverse-mode gradients and a
//!   finite-difference checker.
//! - [`model`]: the patch-based transformer classifier, its parameters and
//!   checkpoint format.
//! - [`augment`]: bit-exact 8-bit image ops, the training augmentation
//!   pipeline, and PPM/PGM I/O.
//! - [`data`]: dataset ingestion, class-alias merging, stratified splits and
//!   k-fold plans.
//! - [`train`]: cross-entropy loss, Adam, and the training loop.
//! - [`eval`]: confusion matrices, per-class metrics, test-time-augmentation
//!   voting, cross-validation aggregates and report emission.

pub mod augment;
pub mod data;
pub mod error;
pub mod eval;
pub mod model;
pub mod tensor;
pub mod train;

pub use augment::{AugPolicy, Image, NormalizeConst};
pub use data::{ClassAliasMap, DatasetIndex, FoldPlan, SplitSpec};
pub use error::{CheckpointError, Error, Result};
pub use eval::{ClassMetrics, ConfusionMatrix, EvalReport};
pub use model::{ViTConfig, ViTParams};
pub use tensor::{RngState, Scalar, Tensor};
pub use train::{AdamState, Precision, TrainConfig};
