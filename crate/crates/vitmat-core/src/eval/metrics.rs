//! Metric formulas over confusion-matrix counts:
//! precision `TP / (TP + FP)`, recall `TP / (TP + FN)`,
//! F1 `2 P R / (P + R)`, one-vs-rest accuracy
//! `(TP + TN) / (TP + TN + FP + FN)`.

use super::{ClassMetrics, ConfusionMatrix, EvalReport, OvrCounts};
use crate::error::{Error, Result};

/// Collapses the matrix to binary counts for one class: `TP` on the
/// diagonal, `FP` the rest of its column, `FN` the rest of its row, `TN`
/// everything else.
pub fn one_vs_rest_counts(cm: &ConfusionMatrix, class: usize) -> OvrCounts {
    let true_pos = cm.at(class, class);
    let false_pos = cm.col_sum(class) - true_pos;
    let false_neg = cm.row_sum(class) - true_pos;
    let true_neg = cm.total() - true_pos - false_pos - false_neg;
    OvrCounts {
        true_pos,
        false_pos,
        false_neg,
        true_neg,
    }
}

/// Applies the four formulas with the zero-denominator convention: value 0
/// with the matching `undefined` flag.
pub fn metrics_from_counts(counts: &OvrCounts) -> ClassMetrics {
    let (tp, fp, fneg, tn) = (
        counts.true_pos as f64,
        counts.false_pos as f64,
        counts.false_neg as f64,
        counts.true_neg as f64,
    );
    let precision_undefined = counts.true_pos + counts.false_pos == 0;
    let recall_undefined = counts.true_pos + counts.false_neg == 0;
    let precision = if precision_undefined { 0.0 } else { tp / (tp + fp) };
    let recall = if recall_undefined { 0.0 } else { tp / (tp + fneg) };
    let f1_undefined = precision + recall == 0.0;
    let f1 = if f1_undefined {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    };
    let total = tp + fp + fneg + tn;
    let ovr_accuracy = if total == 0.0 { 0.0 } else { (tp + tn) / total };
    ClassMetrics {
        counts: *counts,
        precision,
        recall,
        f1,
        ovr_accuracy,
        precision_undefined,
        recall_undefined,
        f1_undefined,
    }
}

/// `trace / total`; an empty evaluation is an input error.
pub fn overall_accuracy(cm: &ConfusionMatrix) -> Result<f64> {
    let total = cm.total();
    if total == 0 {
        return Err(Error::Input("overall accuracy of an empty evaluation".into()));
    }
    Ok(cm.trace() as f64 / total as f64)
}

/// Assembles a full report: per-class metrics, unweighted macro averages,
/// and the trace accuracy.
pub fn report_from_confusion(
    cm: &ConfusionMatrix,
    classes: &[String],
    dataset: &str,
    seed: u64,
    tta_count: Option<usize>,
) -> Result<EvalReport> {
    if classes.len() != cm.k() {
        return Err(Error::Input(format!(
            "{} class names for a {}-class matrix",
            classes.len(),
            cm.k()
        )));
    }
    let per_class: Vec<ClassMetrics> = (0..cm.k())
        .map(|c| metrics_from_counts(&one_vs_rest_counts(cm, c)))
        .collect();
    let kf = cm.k() as f64;
    Ok(EvalReport {
        dataset: dataset.to_string(),
        checkpoint: None,
        seed,
        tta_count,
        classes: classes.to_vec(),
        confusion: cm.rows(),
        per_class: per_class.clone(),
        macro_precision: per_class.iter().map(|m| m.precision).sum::<f64>() / kf,
        macro_recall: per_class.iter().map(|m| m.recall).sum::<f64>() / kf,
        macro_f1: per_class.iter().map(|m| m.f1).sum::<f64>() / kf,
        overall_accuracy: overall_accuracy(cm)?,
        folds: None,
    })
}
