//! The training augmentation pipeline and test-time-augmentation variants.

use super::geometry::{flip_lr, flip_ud, random_crop, resize_bilinear, translate};
use super::randaug::randaugment;
use super::{AugPolicy, Image, NormalizeConst};
use crate::error::Result;
use crate::tensor::{RngState, Scalar, Tensor};

/// Runs one training draw: resize to `out_size`, coin-flip horizontal and
/// vertical mirrors, translate by offsets uniform in
/// `[-translate_max, translate_max]`, pad-and-crop back to `out_size`, then
/// the photometric pool. Stream consumption order per image: fliplr coin,
/// flipud coin, dx, dy, crop x, crop y, then the randaugment draws; stages
/// disabled by the policy consume nothing.
pub fn apply_train_pipeline(
    img: &Image,
    policy: &AugPolicy,
    out_size: usize,
    rng: &mut RngState,
) -> Result<Image> {
    policy.validate()?;
    let mut out = resize_bilinear(img, out_size, out_size)?;
    if policy.fliplr_prob > 0.0 && rng.chance(policy.fliplr_prob) {
        out = flip_lr(&out);
    }
    if policy.flipud_prob > 0.0 && rng.chance(policy.flipud_prob) {
        out = flip_ud(&out);
    }
    if policy.translate_max > 0 {
        let t = policy.translate_max as i64;
        let dx = rng.range_i64(-t, t) as i32;
        let dy = rng.range_i64(-t, t) as i32;
        out = translate(&out, dx, dy)?;
    }
    if policy.crop_pad > 0 {
        out = random_crop(&out, policy.crop_pad as usize, out_size, out_size, rng)?;
    }
    if policy.randaug_n > 0 {
        out = randaugment(&out, policy.randaug_n, policy.randaug_m, rng)?;
    }
    Ok(out)
}

/// Maps bytes to model inputs: `v -> (v / 255 - mean_c) / std_c`, shaped
/// `[H, W, 3]`.
pub fn normalize<T: Scalar>(img: &Image, consts: &NormalizeConst) -> Tensor<T> {
    let data = img
        .pixels()
        .chunks_exact(3)
        .flat_map(|px| {
            (0..3).map(move |c| {
                T::from_f64((px[c] as f64 / 255.0 - consts.mean[c]) / consts.std[c])
            })
        })
        .collect();
    Tensor::new(vec![img.height(), img.width(), 3], data).expect("shape from image dims")
}

/// Inverse of [`normalize`] up to byte rounding.
pub fn denormalize<T: Scalar>(tensor: &Tensor<T>, consts: &NormalizeConst) -> Result<Image> {
    let shape = tensor.shape();
    if shape.len() != 3 || shape[2] != 3 {
        return Err(crate::error::Error::Input(format!(
            "denormalize expects [H, W, 3], got {shape:?}"
        )));
    }
    let pixels = tensor
        .data()
        .chunks_exact(3)
        .flat_map(|px| {
            (0..3).map(move |c| {
                super::round_to_u8((px[c].to_f64() * consts.std[c] + consts.mean[c]) * 255.0)
            })
        })
        .collect();
    Image::new(shape[0], shape[1], pixels)
}

/// Test-time-augmentation inputs: element 0 is the plain resized original;
/// elements `1..count` are independent training-pipeline draws.
pub fn tta_variants(
    img: &Image,
    policy: &AugPolicy,
    out_size: usize,
    rng: &mut RngState,
    count: usize,
) -> Result<Vec<Image>> {
    if count == 0 {
        return Err(crate::error::Error::Input(
            "tta variant count must be at least 1".into(),
        ));
    }
    let mut out = Vec::with_capacity(count);
    out.push(resize_bilinear(img, out_size, out_size)?);
    for _ in 1..count {
        out.push(apply_train_pipeline(img, policy, out_size, rng)?);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn random_image(h: usize, w: usize, seed: u64) -> Image {
        let mut rng = RngState::new(seed);
        let pixels = (0..h * w * 3).map(|_| rng.bounded(256) as u8).collect();
        Image::new(h, w, pixels).unwrap()
    }

    #[test]
    fn normalize_endpoints() {
        let consts = NormalizeConst::default();
        let img = Image::new(1, 2, vec![255, 255, 255, 0, 0, 0]).unwrap();
        let t: Tensor<f64> = normalize(&img, &consts);
        assert_eq!(t.shape(), &[1, 2, 3]);
        for c in 0..3 {
            assert_eq!(t.data()[c], 1.0);
            assert_eq!(t.data()[3 + c], -1.0);
        }
    }

    #[test]
    fn normalize_midpoint_value() {
        // v = 128: (128/255 - 0.5) / 0.5 = 1/255
        let consts = NormalizeConst::default();
        let img = Image::filled(1, 1, [128, 128, 128]);
        let t: Tensor<f64> = normalize(&img, &consts);
        for &v in t.data() {
            assert!((v - 1.0 / 255.0).abs() < 1e-15);
        }
    }

    #[test]
    fn denormalize_roundtrip_within_rounding() {
        let consts = NormalizeConst::default();
        let img = random_image(6, 4, 61);
        let t: Tensor<f64> = normalize(&img, &consts);
        let back = denormalize(&t, &consts).unwrap();
        assert_eq!(back, img);
    }

    #[test]
    fn pipeline_deterministic_under_seed() {
        let img = random_image(30, 30, 62);
        let policy = AugPolicy::default();
        let a = apply_train_pipeline(&img, &policy, 24, &mut RngState::new(5)).unwrap();
        let b = apply_train_pipeline(&img, &policy, 24, &mut RngState::new(5)).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn disabled_policy_reduces_to_resize() {
        let img = random_image(30, 30, 63);
        let policy = AugPolicy::disabled();
        let out = apply_train_pipeline(&img, &policy, 24, &mut RngState::new(1)).unwrap();
        assert_eq!(out, resize_bilinear(&img, 24, 24).unwrap());
    }

    #[test]
    fn tta_first_variant_is_plain_resize() {
        let img = random_image(30, 30, 64);
        let policy = AugPolicy::default();
        for seed in [0u64, 1, 99] {
            let variants =
                tta_variants(&img, &policy, 24, &mut RngState::new(seed), 5).unwrap();
            assert_eq!(variants.len(), 5);
            assert_eq!(variants[0], resize_bilinear(&img, 24, 24).unwrap());
        }
    }

    #[test]
    fn tta_count_one_is_original_only() {
        let img = random_image(10, 10, 65);
        let variants =
            tta_variants(&img, &AugPolicy::default(), 8, &mut RngState::new(3), 1).unwrap();
        assert_eq!(variants.len(), 1);
        assert_eq!(variants[0], resize_bilinear(&img, 8, 8).unwrap());
    }

    #[test]
    fn tta_reproducible_list() {
        // out_size must exceed translate_max or the translate precondition
        // (|d| < min(H, W)) can trip on a max-magnitude draw
        let img = random_image(20, 20, 66);
        let policy = AugPolicy::default();
        let a = tta_variants(&img, &policy, 24, &mut RngState::new(8), 5).unwrap();
        let b = tta_variants(&img, &policy, 24, &mut RngState::new(8), 5).unwrap();
        assert_eq!(a, b);
        assert!(tta_variants(&img, &policy, 24, &mut RngState::new(8), 0).is_err());
    }
}
