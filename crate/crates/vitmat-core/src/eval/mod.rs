//! Evaluation: confusion matrices, per-class and macro metrics, test-time-
//! augmentation voting, cross-validation aggregates, and report files.
//!
//! Two accuracies coexist deliberately: per-class `ovr_accuracy` is the
//! one-vs-rest ratio `(TP + TN) / (TP + TN + FP + FN)`, while the scalar
//! `overall_accuracy` of a run is `trace / total` of the confusion matrix.

mod cv;
mod infer;
mod metrics;
mod report;

pub use cv::{cv_evaluate, format_mean_std, mean_std, CvReport};
pub use infer::{
    argmax, evaluate_partition, majority_vote, predict_logits, prepare_input, tta_predict,
    TtaOptions, TtaVote,
};
pub use metrics::{metrics_from_counts, one_vs_rest_counts, overall_accuracy, report_from_confusion};
pub use report::{emit_report, read_report, render_confusion, ReportFormat};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// K x K integer counts; rows are true classes, columns predicted classes.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConfusionMatrix {
    k: usize,
    counts: Vec<u64>,
}

impl ConfusionMatrix {
    pub fn new(k: usize) -> Self {
        ConfusionMatrix {
            k,
            counts: vec![0; k * k],
        }
    }

    /// Tallies `(prediction, label)` pairs. Every id must lie in `[0, k)`.
    pub fn from_predictions(preds: &[usize], labels: &[usize], k: usize) -> Result<Self> {
        if preds.len() != labels.len() {
            return Err(Error::Input(format!(
                "{} predictions for {} labels",
                preds.len(),
                labels.len()
            )));
        }
        let mut cm = ConfusionMatrix::new(k);
        for (&p, &t) in preds.iter().zip(labels) {
            cm.record(t, p)?;
        }
        Ok(cm)
    }

    pub fn record(&mut self, true_class: usize, predicted: usize) -> Result<()> {
        if true_class >= self.k || predicted >= self.k {
            return Err(Error::Input(format!(
                "class id out of range: ({true_class}, {predicted}) with k = {}",
                self.k
            )));
        }
        self.counts[true_class * self.k + predicted] += 1;
        Ok(())
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn at(&self, true_class: usize, predicted: usize) -> u64 {
        self.counts[true_class * self.k + predicted]
    }

    /// Support of a true class.
    pub fn row_sum(&self, true_class: usize) -> u64 {
        (0..self.k).map(|p| self.at(true_class, p)).sum()
    }

    /// Total predictions landing in a class.
    pub fn col_sum(&self, predicted: usize) -> u64 {
        (0..self.k).map(|t| self.at(t, predicted)).sum()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn trace(&self) -> u64 {
        (0..self.k).map(|c| self.at(c, c)).sum()
    }

    /// Rows of the matrix, for serialization.
    pub fn rows(&self) -> Vec<Vec<u64>> {
        (0..self.k)
            .map(|t| (0..self.k).map(|p| self.at(t, p)).collect())
            .collect()
    }

    /// Rebuilds a matrix from serialized rows.
    pub fn from_rows(rows: &[Vec<u64>]) -> Result<Self> {
        let k = rows.len();
        if rows.iter().any(|r| r.len() != k) {
            return Err(Error::Input("confusion rows are not square".into()));
        }
        Ok(ConfusionMatrix {
            k,
            counts: rows.iter().flatten().copied().collect(),
        })
    }
}

/// One-vs-rest counts of a single class.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct OvrCounts {
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl OvrCounts {
    pub fn total(&self) -> u64 {
        self.true_pos + self.false_pos + self.false_neg + self.true_neg
    }
}

/// Per-class metric block. A zero denominator yields the value 0 with the
/// matching `*_undefined` flag set.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ClassMetrics {
    pub counts: OvrCounts,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub ovr_accuracy: f64,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub precision_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub recall_undefined: bool,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub f1_undefined: bool,
}

/// Mean and population standard deviation over fold accuracies.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSummary {
    pub accuracies: Vec<f64>,
    pub mean: f64,
    pub std: f64,
}

/// The complete result of evaluating a checkpoint on a partition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub dataset: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub checkpoint: Option<String>,
    pub seed: u64,
    /// Number of test-time-augmentation variants, absent when votes were
    /// not used.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tta_count: Option<usize>,
    pub classes: Vec<String>,
    pub confusion: Vec<Vec<u64>>,
    pub per_class: Vec<ClassMetrics>,
    pub macro_precision: f64,
    pub macro_recall: f64,
    pub macro_f1: f64,
    pub overall_accuracy: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub folds: Option<FoldSummary>,
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_matrix_from_perfect_predictions() {
        let preds = vec![0, 1, 2, 1, 0];
        let cm = ConfusionMatrix::from_predictions(&preds, &preds, 3).unwrap();
        assert_eq!(cm.trace(), 5);
        assert_eq!(cm.total(), 5);
        assert_eq!(cm.at(0, 0), 2);
        assert_eq!(cm.at(1, 1), 2);
        assert_eq!(cm.at(2, 2), 1);
        assert_eq!(cm.at(0, 1), 0);
    }

    #[test]
    fn empty_stream_is_zero_matrix() {
        let cm = ConfusionMatrix::from_predictions(&[], &[], 4).unwrap();
        assert_eq!(cm.total(), 0);
        assert_eq!(cm.rows(), vec![vec![0; 4]; 4]);
    }

    #[test]
    fn out_of_range_ids_are_rejected() {
        assert!(ConfusionMatrix::from_predictions(&[3], &[0], 3).is_err());
        assert!(ConfusionMatrix::from_predictions(&[0], &[5], 3).is_err());
    }

    #[test]
    fn random_tally_matches_brute_force() {
        let mut rng = crate::tensor::RngState::new(101);
        let k = 24;
        let n = 1000;
        let preds: Vec<usize> = (0..n).map(|_| rng.bounded(k as u64) as usize).collect();
        let labels: Vec<usize> = (0..n).map(|_| rng.bounded(k as u64) as usize).collect();
        let cm = ConfusionMatrix::from_predictions(&preds, &labels, k).unwrap();
        // brute-force recount per cell
        for t in 0..k {
            for p in 0..k {
                let count = preds
                    .iter()
                    .zip(&labels)
                    .filter(|&(&pp, &tt)| pp == p && tt == t)
                    .count() as u64;
                assert_eq!(cm.at(t, p), count);
            }
        }
    }
}
