//! Random augmentation over the photometric op pool.

use super::photometric::{autocontrast, brightness, equalize, posterize, sharpness, solarize};
use super::Image;
use crate::error::{Error, Result};
use crate::tensor::RngState;

/// The op pool sampled from, in index order. Brightness and sharpness take a
/// per-application direction sign; equalize and autocontrast ignore the
/// magnitude entirely.
pub const RANDAUG_OPS: [&str; 6] = [
    "equalize",
    "autocontrast",
    "posterize",
    "solarize",
    "brightness",
    "sharpness",
];

/// Rounds to the nearest integer with exact halves rounded down, the rule
/// used by the magnitude mapping below.
fn round_half_down(x: f64) -> f64 {
    (x - 0.5).ceil()
}

/// Concrete per-op parameters for a magnitude `m` on the 0-30 scale:
///
/// - posterize keeps `8 - round(4 m / 30)` bits,
/// - solarize thresholds at `255 - round(255 m / 30)`,
/// - brightness and sharpness use factor `1 + 0.9 (m / 30) s` with the sign
///   `s` drawn fresh per application,
///
/// where `round` is nearest-with-halves-down. At `m = 7` this gives 7 bits,
/// threshold 196 and factors of 0.79 or 1.21.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RandAugMagnitudes {
    pub posterize_bits: u32,
    pub solarize_threshold: u32,
    pub factor_delta: f64,
}

impl RandAugMagnitudes {
    pub fn for_magnitude(m: u32) -> Result<Self> {
        if m > 30 {
            return Err(Error::Input(format!("magnitude {m} outside [0, 30]")));
        }
        let frac = m as f64 / 30.0;
        Ok(RandAugMagnitudes {
            posterize_bits: 8 - round_half_down(4.0 * frac) as u32,
            solarize_threshold: 255 - round_half_down(255.0 * frac) as u32,
            factor_delta: 0.9 * frac,
        })
    }
}

/// Applies `n` ops drawn uniformly with replacement from [`RANDAUG_OPS`], in
/// draw order, each at the shared magnitude `m`. Per slot the stream is
/// consumed as: one draw for the op index, then one draw for the direction
/// sign when the op is brightness or sharpness.
pub fn randaugment(img: &Image, n: u32, m: u32, rng: &mut RngState) -> Result<Image> {
    let mags = RandAugMagnitudes::for_magnitude(m)?;
    let mut out = img.clone();
    for _ in 0..n {
        let op = rng.bounded(RANDAUG_OPS.len() as u64) as usize;
        out = match RANDAUG_OPS[op] {
            "equalize" => equalize(&out),
            "autocontrast" => autocontrast(&out),
            "posterize" => posterize(&out, mags.posterize_bits)?,
            "solarize" => solarize(&out, mags.solarize_threshold)?,
            "brightness" => {
                let sign = if rng.chance(0.5) { 1.0 } else { -1.0 };
                brightness(&out, 1.0 + sign * mags.factor_delta)?
            }
            "sharpness" => {
                let sign = if rng.chance(0.5) { 1.0 } else { -1.0 };
                sharpness(&out, 1.0 + sign * mags.factor_delta)?
            }
            _ => unreachable!(),
        };
    }
    Ok(out)
}
