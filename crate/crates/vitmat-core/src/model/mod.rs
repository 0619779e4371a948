//! The patch-based transformer classifier.
//!
//! An image is cut into fixed-size patches, each patch is flattened and
//! linearly projected into a `D`-dimensional embedding, a learnable class
//! token is prepended, learnable positional embeddings are added, and the
//! sequence runs through a stack of pre-LN encoder blocks (layer norm is
//! applied inside each residual branch, before attention and before the
//! MLP). A final layer norm and a single affine head on the class-token row
//! produce the logits.

mod checkpoint;
mod forward;
mod params;

pub use checkpoint::{check_class_count, load_checkpoint, save_checkpoint};
pub use forward::{forward, forward_with_attention, logits_on_tape, patchify, ParamVars};
pub use params::{BlockParams, ViTParams};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Epsilon added inside the square root of every layer norm.
pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Standard deviation of the truncated-normal weight initialization.
pub const INIT_STD: f64 = 0.02;

/// Forward-pass mode: dropout is active only in [`Mode::Train`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Mode {
    Train,
    Infer,
}

/// Hyperparameters fixing every array shape of the model.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ViTConfig {
    /// Input images are square with this side length in pixels.
    pub image_size: usize,
    /// Side length of the square patches; must divide `image_size`.
    pub patch_size: usize,
    /// Embedding width `D`; must be divisible by `heads`.
    pub embed_dim: usize,
    /// Number of encoder blocks.
    pub depth: usize,
    /// Number of attention heads.
    pub heads: usize,
    /// MLP hidden width as a multiple of `embed_dim`.
    pub mlp_ratio: f64,
    /// Number of output classes `K`.
    pub num_classes: usize,
    /// Dropout probability in `[0, 1)`; zero disables dropout entirely.
    pub dropout_rate: f64,
}

impl ViTConfig {
    /// The base configuration: 224-pixel input, 16-pixel patches, width 768,
    /// 12 blocks of 12 heads, MLP ratio 4.
    pub fn base16(num_classes: usize) -> Self {
        ViTConfig {
            image_size: 224,
            patch_size: 16,
            embed_dim: 768,
            depth: 12,
            heads: 12,
            mlp_ratio: 4.0,
            num_classes,
            dropout_rate: 0.0,
        }
    }

    /// Small preset used by tests and desk-scale runs: 32-pixel input,
    /// 8-pixel patches, width 64, 2 blocks of 4 heads.
    pub fn tiny(num_classes: usize) -> Self {
        ViTConfig {
            image_size: 32,
            patch_size: 8,
            embed_dim: 64,
            depth: 2,
            heads: 4,
            mlp_ratio: 4.0,
            num_classes,
            dropout_rate: 0.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.image_size == 0 || self.patch_size == 0 {
            return Err(Error::Config(
                "image_size and patch_size must be positive".into(),
            ));
        }
        if self.image_size % self.patch_size != 0 {
            return Err(Error::Config(format!(
                "image_size {} not divisible by patch_size {}",
                self.image_size, self.patch_size
            )));
        }
        if self.embed_dim == 0 || self.heads == 0 || self.embed_dim % self.heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} not divisible by heads {}",
                self.embed_dim, self.heads
            )));
        }
        if self.depth == 0 {
            return Err(Error::Config("depth must be at least 1".into()));
        }
        if self.num_classes == 0 {
            return Err(Error::Config("num_classes must be at least 1".into()));
        }
        if self.mlp_ratio <= 0.0 || self.hidden_dim() == 0 {
            return Err(Error::Config(format!("mlp_ratio {} invalid", self.mlp_ratio)));
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return Err(Error::Config(format!(
                "dropout_rate {} outside [0, 1)",
                self.dropout_rate
            )));
        }
        Ok(())
    }

    /// Patches per image: `(image_size / patch_size)^2`.
    pub fn num_patches(&self) -> usize {
        let per_side = self.image_size / self.patch_size;
        per_side * per_side
    }

    /// Sequence length including the class token.
    pub fn num_tokens(&self) -> usize {
        self.num_patches() + 1
    }

    /// Flattened patch length: `patch_size^2 * 3`.
    pub fn patch_dim(&self) -> usize {
        self.patch_size * self.patch_size * 3
    }

    /// MLP hidden width: `round(mlp_ratio * embed_dim)`.
    pub fn hidden_dim(&self) -> usize {
        (self.mlp_ratio * self.embed_dim as f64).round() as usize
    }

    /// Per-head key width.
    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.heads
    }
}
