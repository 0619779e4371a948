//! Inference paths: plain argmax prediction, test-time-augmentation voting,
//! and partition evaluation.

use serde::{Deserialize, Serialize};

use super::metrics::report_from_confusion;
use super::{ConfusionMatrix, EvalReport};
use crate::augment::{io, normalize, resize_bilinear, tta_variants, AugPolicy, Image, NormalizeConst};
use crate::data::DatasetIndex;
use crate::error::Result;
use crate::model::{forward, Mode, ViTConfig, ViTParams};
use crate::tensor::{RngState, Scalar, Tensor};

// TTA substreams are derived per sample id, independent of evaluation order.
const TTA_SALT: u64 = 0x0054_5441;

/// Index of the largest element; ties go to the lowest index.
pub fn argmax<T: Scalar>(xs: &[T]) -> usize {
    let mut best = 0;
    for (i, &v) in xs.iter().enumerate().skip(1) {
        if v > xs[best] {
            best = i;
        }
    }
    best
}

/// Resize to the model's input size and normalize.
pub fn prepare_input<T: Scalar>(
    img: &Image,
    cfg: &ViTConfig,
    consts: &NormalizeConst,
) -> Result<Tensor<T>> {
    let resized = resize_bilinear(img, cfg.image_size, cfg.image_size)?;
    Ok(normalize(&resized, consts))
}

/// Infer-mode logits for one raw image.
pub fn predict_logits<T: Scalar>(
    params: &ViTParams<T>,
    cfg: &ViTConfig,
    consts: &NormalizeConst,
    img: &Image,
) -> Result<Tensor<T>> {
    let input = prepare_input::<T>(img, cfg, consts)?;
    forward(&input, params, cfg, Mode::Infer, None)
}

/// Winner of a vote histogram and whether the maximum was shared. Ties
/// resolve to the lowest class id.
pub fn majority_vote(votes: &[u32]) -> (usize, bool) {
    let winner = {
        let mut best = 0;
        for (i, &v) in votes.iter().enumerate().skip(1) {
            if v > votes[best] {
                best = i;
            }
        }
        best
    };
    let tie = votes
        .iter()
        .enumerate()
        .any(|(i, &v)| i != winner && v == votes[winner]);
    (winner, tie)
}

/// Outcome of test-time-augmentation voting.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TtaVote {
    pub class: usize,
    pub votes: Vec<u32>,
    pub tie: bool,
}

/// Runs infer-mode forward on the original plus `count - 1` augmented
/// copies; each variant votes its argmax class and the majority wins (ties
/// to the lowest class id, flagged). `count = 1` reduces to the plain
/// argmax prediction.
pub fn tta_predict<T: Scalar>(
    params: &ViTParams<T>,
    cfg: &ViTConfig,
    consts: &NormalizeConst,
    img: &Image,
    policy: &AugPolicy,
    count: usize,
    rng: &mut RngState,
) -> Result<TtaVote> {
    let variants = tta_variants(img, policy, cfg.image_size, rng, count)?;
    let mut votes = vec![0u32; cfg.num_classes];
    for variant in &variants {
        let input: Tensor<T> = normalize(variant, consts);
        let logits = forward(&input, params, cfg, Mode::Infer, None)?;
        votes[argmax(logits.data())] += 1;
    }
    let (class, tie) = majority_vote(&votes);
    Ok(TtaVote { class, votes, tie })
}

/// Test-time augmentation settings for a partition evaluation.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TtaOptions {
    pub policy: AugPolicy,
    pub count: usize,
    pub seed: u64,
}

impl TtaOptions {
    /// Default voting run: the original plus four augmented copies.
    pub fn with_policy(policy: AugPolicy, seed: u64) -> Self {
        TtaOptions {
            policy,
            count: 5,
            seed,
        }
    }
}

/// Evaluates a parameter set over the given sample ids, with or without
/// vote-based test-time augmentation, and assembles the full report.
pub fn evaluate_partition<T: Scalar>(
    params: &ViTParams<T>,
    cfg: &ViTConfig,
    consts: &NormalizeConst,
    index: &DatasetIndex,
    ids: &[usize],
    tta: Option<&TtaOptions>,
) -> Result<EvalReport> {
    let mut cm = ConfusionMatrix::new(cfg.num_classes);
    for &sid in ids {
        let sample = &index.samples()[sid];
        let img = io::read_image(&sample.path)?;
        let predicted = match tta {
            None => argmax(predict_logits(params, cfg, consts, &img)?.data()),
            Some(opts) => {
                let mut rng = RngState::substream2(opts.seed ^ TTA_SALT, sid as u64, 0);
                tta_predict(params, cfg, consts, &img, &opts.policy, opts.count, &mut rng)?.class
            }
        };
        cm.record(sample.class, predicted)?;
    }
    report_from_confusion(
        &cm,
        index.classes(),
        index.name(),
        tta.map(|t| t.seed).unwrap_or(0),
        tta.map(|t| t.count),
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn argmax_ties_to_lowest_index() {
        assert_eq!(argmax(&[1.0f64, 3.0, 3.0, 2.0]), 1);
        assert_eq!(argmax(&[5.0f64]), 0);
        assert_eq!(argmax(&[0.0f64, 0.0, 0.0]), 0);
    }

    #[test]
    fn forced_majority_wins() {
        // votes [A, A, B]
        let (class, tie) = majority_vote(&[2, 1, 0]);
        assert_eq!(class, 0);
        assert!(!tie);
    }

    #[test]
    fn forced_tie_goes_to_lowest_id_and_is_marked() {
        // votes [A, B] with id(A) < id(B)
        let (class, tie) = majority_vote(&[1, 1, 0]);
        assert_eq!(class, 0);
        assert!(tie);
    }

    #[test]
    fn tta_count_one_equals_plain_argmax() {
        let cfg = ViTConfig::tiny(4);
        let mut rng = RngState::new(111);
        let params = ViTParams::<f32>::init(&cfg, &mut rng).unwrap();
        let consts = NormalizeConst::default();
        let policy = AugPolicy::default();
        for trial in 0..10u64 {
            let mut img_rng = RngState::new(200 + trial);
            let pixels: Vec<u8> = (0..32 * 32 * 3)
                .map(|_| img_rng.bounded(256) as u8)
                .collect();
            let img = Image::new(32, 32, pixels).unwrap();
            let plain = argmax(
                predict_logits(&params, &cfg, &consts, &img)
                    .unwrap()
                    .data(),
            );
            let vote = tta_predict(
                &params,
                &cfg,
                &consts,
                &img,
                &policy,
                1,
                &mut RngState::new(trial),
            )
            .unwrap();
            assert_eq!(vote.class, plain);
            assert_eq!(vote.votes.iter().sum::<u32>(), 1);
        }
    }
}
