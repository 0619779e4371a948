//! Per-channel photometric operations.
//!
//! Each op is a pure byte-to-byte mapping; the lookup-table rules are
//! spelled out on the individual functions so their outputs can be recomputed
//! by hand.

use super::{round_to_u8, Image};
use crate::error::{Error, Result};

fn per_channel_lut(img: &Image, lut: impl Fn(usize, &[u32; 256]) -> [u8; 256]) -> Image {
    let mut histograms = [[0u32; 256]; 3];
    for px in img.pixels().chunks_exact(3) {
        for c in 0..3 {
            histograms[c][px[c] as usize] += 1;
        }
    }
    let tables: Vec<[u8; 256]> = (0..3).map(|c| lut(c, &histograms[c])).collect();
    let mut pixels = Vec::with_capacity(img.pixels().len());
    for px in img.pixels().chunks_exact(3) {
        for c in 0..3 {
            pixels.push(tables[c][px[c] as usize]);
        }
    }
    Image::new(img.height(), img.width(), pixels).expect("dimensions preserved")
}

/// Histogram equalization per channel. With `cdf(v)` the cumulative count up
/// to and including level `v` and `cdf_min` the count of the lowest occupied
/// level, the mapping is
/// `lut[v] = round(255 * (cdf(v) - cdf_min) / (total - cdf_min))`.
/// Channels occupying a single level are left unchanged.
pub fn equalize(img: &Image) -> Image {
    per_channel_lut(img, |_, hist| {
        let total: u32 = hist.iter().sum();
        let cdf_min = hist.iter().copied().find(|&h| h > 0).unwrap_or(0);
        let mut lut = [0u8; 256];
        if total == cdf_min {
            for (v, slot) in lut.iter_mut().enumerate() {
                *slot = v as u8;
            }
            return lut;
        }
        let mut cum = 0u32;
        for v in 0..256 {
            cum += hist[v];
            let num = cum.saturating_sub(cdf_min) as f64;
            lut[v] = round_to_u8(255.0 * num / (total - cdf_min) as f64);
        }
        lut
    })
}

/// Stretches each channel's occupied range `[min, max]` affinely onto
/// `[0, 255]`: `lut[v] = round((v - min) * 255 / (max - min))`. A channel
/// with a single level is left unchanged.
pub fn autocontrast(img: &Image) -> Image {
    per_channel_lut(img, |_, hist| {
        let lo = hist.iter().position(|&h| h > 0).unwrap_or(0);
        let hi = hist.iter().rposition(|&h| h > 0).unwrap_or(255);
        let mut lut = [0u8; 256];
        for (v, slot) in lut.iter_mut().enumerate() {
            *slot = if lo == hi {
                v as u8
            } else {
                round_to_u8((v as f64 - lo as f64) * 255.0 / (hi - lo) as f64)
            };
        }
        lut
    })
}

/// Keeps the top `bits` bits of every byte.
pub fn posterize(img: &Image, bits: u32) -> Result<Image> {
    if !(1..=8).contains(&bits) {
        return Err(Error::Input(format!("posterize bits {bits} outside [1, 8]")));
    }
    let mask = (0xFFu16 << (8 - bits)) as u8;
    let pixels = img.pixels().iter().map(|&v| v & mask).collect();
    Image::new(img.height(), img.width(), pixels)
}

/// Inverts every byte at or above `threshold`: `v -> 255 - v` when
/// `v >= threshold`.
pub fn solarize(img: &Image, threshold: u32) -> Result<Image> {
    if threshold > 255 {
        return Err(Error::Input(format!(
            "solarize threshold {threshold} outside [0, 255]"
        )));
    }
    let t = threshold as u8;
    let pixels = img
        .pixels()
        .iter()
        .map(|&v| if v >= t { 255 - v } else { v })
        .collect();
    Image::new(img.height(), img.width(), pixels)
}

/// Scales every byte by `factor`: `round(clamp(v * factor))`.
pub fn brightness(img: &Image, factor: f64) -> Result<Image> {
    if factor < 0.0 || !factor.is_finite() {
        return Err(Error::Input(format!("brightness factor {factor} invalid")));
    }
    let pixels = img
        .pixels()
        .iter()
        .map(|&v| round_to_u8(v as f64 * factor))
        .collect();
    Image::new(img.height(), img.width(), pixels)
}

/// Blends between a 3x3 smoothed copy and the original:
/// `out = round(clamp(smooth + factor * (orig - smooth)))` with the kernel
/// `[[1,1,1],[1,5,1],[1,1,1]] / 13`; border pixels are left untouched.
/// Factor 1 reproduces the input bitwise, factors above 1 sharpen.
pub fn sharpness(img: &Image, factor: f64) -> Result<Image> {
    if factor < 0.0 || !factor.is_finite() {
        return Err(Error::Input(format!("sharpness factor {factor} invalid")));
    }
    let (h, w) = (img.height(), img.width());
    let mut out = img.clone();
    if h < 3 || w < 3 {
        return Ok(out);
    }
    const KERNEL: [[f64; 3]; 3] = [[1.0, 1.0, 1.0], [1.0, 5.0, 1.0], [1.0, 1.0, 1.0]];
    const KERNEL_SUM: f64 = 13.0;
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let mut rgb = [0u8; 3];
            for c in 0..3 {
                let mut smooth = 0.0;
                for (ky, row) in KERNEL.iter().enumerate() {
                    for (kx, &kw) in row.iter().enumerate() {
                        smooth += kw * img.get(x + kx - 1, y + ky - 1)[c] as f64;
                    }
                }
                smooth /= KERNEL_SUM;
                let orig = img.get(x, y)[c] as f64;
                rgb[c] = round_to_u8(smooth + factor * (orig - smooth));
            }
            out.set(x, y, rgb);
        }
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::RngState;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = RngState::new(seed);
        let pixels = (0..h * w * 3).map(|_| rng.bounded(256) as u8).collect();
        Image::new(h, w, pixels).unwrap()
    }

    #[test]
    fn posterize_full_bits_is_identity() {
        let img = random_image(6, 5, 41);
        assert_eq!(posterize(&img, 8).unwrap(), img);
    }

    #[test]
    fn posterize_is_idempotent() {
        let img = random_image(6, 5, 42);
        for bits in 1..=8 {
            let once = posterize(&img, bits).unwrap();
            assert_eq!(posterize(&once, bits).unwrap(), once);
        }
    }

    #[test]
    fn solarize_threshold_255_inverts_only_saturated() {
        let img = Image::new(1, 3, vec![255, 0, 100, 254, 255, 1, 0, 0, 0]).unwrap();
        let out = solarize(&img, 255).unwrap();
        assert_eq!(out.pixels(), &[0, 0, 100, 254, 0, 1, 0, 0, 0]);
    }

    #[test]
    fn solarize_rejects_out_of_range_threshold() {
        let img = random_image(2, 2, 43);
        assert!(solarize(&img, 256).is_err());
    }

    #[test]
    fn autocontrast_full_range_is_identity() {
        // every channel already spans 0..255
        let mut img = random_image(4, 4, 44);
        img.set(0, 0, [0, 0, 0]);
        img.set(1, 0, [255, 255, 255]);
        assert_eq!(autocontrast(&img), img);
    }

    #[test]
    fn autocontrast_is_idempotent() {
        let img = random_image(8, 8, 45);
        let once = autocontrast(&img);
        assert_eq!(autocontrast(&once), once);
    }

    #[test]
    fn brightness_identities() {
        let img = random_image(3, 3, 46);
        assert_eq!(brightness(&img, 1.0).unwrap(), img);
        let black = brightness(&img, 0.0).unwrap();
        assert!(black.pixels().iter().all(|&v| v == 0));
        assert!(brightness(&img, -0.5).is_err());
    }

    #[test]
    fn sharpness_factor_one_is_identity() {
        let img = random_image(5, 5, 47);
        assert_eq!(sharpness(&img, 1.0).unwrap(), img);
    }

    #[test]
    fn sharpness_leaves_border_untouched() {
        let img = random_image(5, 5, 48);
        let out = sharpness(&img, 0.0).unwrap();
        for x in 0..5 {
            assert_eq!(out.get(x, 0), img.get(x, 0));
            assert_eq!(out.get(x, 4), img.get(x, 4));
        }
        for y in 0..5 {
            assert_eq!(out.get(0, y), img.get(0, y));
            assert_eq!(out.get(4, y), img.get(4, y));
        }
    }

    #[test]
    fn equalize_two_level_image_matches_hand_computed_lut() {
        // half the pixels at 64, half at 192: cdf(64) = cdf_min, so 64 maps
        // to 0; cdf(192) = total, so 192 maps to 255
        let mut pixels = Vec::new();
        for i in 0..32 {
            let v = if i % 2 == 0 { 64 } else { 192 };
            pixels.extend_from_slice(&[v, v, v]);
        }
        let img = Image::new(4, 8, pixels).unwrap();
        let out = equalize(&img);
        for (i, px) in out.pixels().chunks_exact(3).enumerate() {
            let expect = if i % 2 == 0 { 0 } else { 255 };
            assert_eq!(px, &[expect; 3]);
        }
    }

    #[test]
    fn equalize_constant_image_is_identity() {
        let img = Image::filled(4, 4, [77, 10, 200]);
        assert_eq!(equalize(&img), img);
    }

    #[test]
    fn all_ops_stay_in_byte_range() {
        // closure over [0,255] is guaranteed by types; this exercises the
        // float paths for panic-freedom on extreme factors
        let img = random_image(6, 6, 49);
        brightness(&img, 1e9).unwrap();
        sharpness(&img, 100.0).unwrap();
    }
}
