//! Bit-exact 8-bit image operations and the training augmentation pipeline.
//!
//! Geometry ops (resize, flips, translate, random crop) and photometric ops
//! (equalize, autocontrast, posterize, solarize, brightness, sharpness) all
//! operate on [`Image`]: interleaved RGB bytes, row-major. Every op is
//! closed over `[0, 255]` and every stochastic op is a deterministic
//! function of `(input, parameters, rng state)`. PPM/PGM codecs live in
//! [`io`]; [`pipeline`] assembles the training recipe and test-time-
//! augmentation variants.

mod geometry;
pub mod io;
mod photometric;
mod pipeline;
mod randaug;

pub use geometry::{flip_lr, flip_ud, random_crop, resize_bilinear, translate};
pub use photometric::{autocontrast, brightness, equalize, posterize, sharpness, solarize};
pub use pipeline::{apply_train_pipeline, denormalize, normalize, tta_variants};
pub use randaug::{randaugment, RandAugMagnitudes, RANDAUG_OPS};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// 8-bit RGB image, row-major, channels interleaved per pixel.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Image {
    height: usize,
    width: usize,
    pixels: Vec<u8>,
}

impl Image {
    pub fn new(height: usize, width: usize, pixels: Vec<u8>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::Input("image dimensions must be positive".into()));
        }
        if pixels.len() != height * width * 3 {
            return Err(Error::Input(format!(
                "{height}x{width} image needs {} bytes, got {}",
                height * width * 3,
                pixels.len()
            )));
        }
        Ok(Image {
            height,
            width,
            pixels,
        })
    }

    /// Solid-color image.
    pub fn filled(height: usize, width: usize, rgb: [u8; 3]) -> Self {
        let mut pixels = Vec::with_capacity(height * width * 3);
        for _ in 0..height * width {
            pixels.extend_from_slice(&rgb);
        }
        Image {
            height,
            width,
            pixels,
        }
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn pixels(&self) -> &[u8] {
        &self.pixels
    }

    pub fn get(&self, x: usize, y: usize) -> [u8; 3] {
        let i = (y * self.width + x) * 3;
        [self.pixels[i], self.pixels[i + 1], self.pixels[i + 2]]
    }

    pub fn set(&mut self, x: usize, y: usize, rgb: [u8; 3]) {
        let i = (y * self.width + x) * 3;
        self.pixels[i..i + 3].copy_from_slice(&rgb);
    }
}

/// Rounds half away from zero and clamps to the 8-bit range. All float-to-
/// byte conversions in this module go through here.
pub(crate) fn round_to_u8(v: f64) -> u8 {
    let r = if v >= 0.0 {
        (v + 0.5).floor()
    } else {
        (v - 0.5).ceil()
    };
    r.clamp(0.0, 255.0) as u8
}

/// Augmentation recipe applied during training, in pipeline order:
/// resize, horizontal/vertical flips, translate, random crop, then the
/// photometric pool (geometric before photometric).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugPolicy {
    /// Probability of a left-right flip.
    pub fliplr_prob: f64,
    /// Probability of an up-down flip.
    pub flipud_prob: f64,
    /// Translate offsets are drawn uniformly from `[-translate_max, translate_max]`
    /// in both directions; zero disables the stage.
    pub translate_max: u32,
    /// Zero-padding before the random crop back to the target size; zero
    /// disables the stage.
    pub crop_pad: u32,
    /// Number of photometric ops sampled per image.
    pub randaug_n: u32,
    /// Shared magnitude on the 0-30 scale.
    pub randaug_m: u32,
    /// Seed salt used when the pipeline derives per-image substreams.
    pub seed: u64,
}

impl Default for AugPolicy {
    fn default() -> Self {
        AugPolicy {
            fliplr_prob: 0.5,
            flipud_prob: 0.5,
            translate_max: 16,
            crop_pad: 16,
            randaug_n: 2,
            randaug_m: 7,
            seed: 0,
        }
    }
}

impl AugPolicy {
    /// No-op policy: every stage disabled.
    pub fn disabled() -> Self {
        AugPolicy {
            fliplr_prob: 0.0,
            flipud_prob: 0.0,
            translate_max: 0,
            crop_pad: 0,
            randaug_n: 0,
            randaug_m: 0,
            seed: 0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.fliplr_prob) || !(0.0..=1.0).contains(&self.flipud_prob) {
            return Err(Error::Input("flip probabilities must lie in [0, 1]".into()));
        }
        if self.randaug_m > 30 {
            return Err(Error::Input(format!(
                "randaug magnitude {} outside [0, 30]",
                self.randaug_m
            )));
        }
        Ok(())
    }
}

/// Per-channel normalization constants mapping bytes to model inputs:
/// `v -> (v / 255 - mean) / std`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct NormalizeConst {
    pub mean: [f64; 3],
    pub std: [f64; 3],
}

impl Default for NormalizeConst {
    fn default() -> Self {
        NormalizeConst {
            mean: [0.5, 0.5, 0.5],
            std: [0.5, 0.5, 0.5],
        }
    }
}
