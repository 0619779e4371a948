//! K-fold cross-validation driver and fold aggregation.

use serde::{Deserialize, Serialize};

use super::infer::evaluate_partition;
use super::{EvalReport, FoldSummary};
use crate::data::{DatasetIndex, FoldPlan};
use crate::error::{Error, Result};
use crate::model::ViTConfig;
use crate::tensor::Scalar;
use crate::train::{fit, TrainConfig};

/// Per-fold reports plus the aggregate accuracy summary.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CvReport {
    pub fold_reports: Vec<EvalReport>,
    pub summary: FoldSummary,
}

/// Arithmetic mean and population standard deviation.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (0.0, 0.0);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    (mean, var.sqrt())
}

/// Formats an accuracy aggregate as percentages: the mean rounded to two
/// decimals with trailing zeros trimmed, the deviation with one decimal.
/// `(1.0, 0.0)` renders as `100 ± 0.0`.
pub fn format_mean_std(mean: f64, std: f64) -> String {
    let mean_pct = format!("{:.2}", mean * 100.0);
    let mean_pct = mean_pct.trim_end_matches('0').trim_end_matches('.');
    format!("{} ± {:.1}", mean_pct, std * 100.0)
}

/// Trains one model per fold on the remaining folds and evaluates on the
/// held-out one. Each fold's run seeds from `train.seed + fold` so folds are
/// independent but reproducible. Errors carry the fold id.
pub fn cv_evaluate<T: Scalar>(
    model_cfg: &ViTConfig,
    train_cfg: &TrainConfig,
    index: &DatasetIndex,
    plan: &FoldPlan,
) -> Result<CvReport> {
    let mut fold_reports = Vec::with_capacity(plan.k);
    let mut accuracies = Vec::with_capacity(plan.k);
    for fold in 0..plan.k {
        let train_ids = plan.train_ids(fold);
        let test_ids = plan.test_ids(fold);
        let mut cfg = train_cfg.clone();
        cfg.seed = train_cfg.seed.wrapping_add(fold as u64);
        let outcome = fit::<T>(model_cfg, &cfg, index, &train_ids, &[], None)
            .map_err(|e| Error::Input(format!("fold {fold}: {e}")))?;
        let report = evaluate_partition(
            &outcome.params,
            model_cfg,
            &cfg.normalize,
            index,
            &test_ids,
            None,
        )
        .map_err(|e| Error::Input(format!("fold {fold}: {e}")))?;
        accuracies.push(report.overall_accuracy);
        fold_reports.push(report);
    }
    let (mean, std) = mean_std(&accuracies);
    Ok(CvReport {
        fold_reports,
        summary: FoldSummary {
            accuracies,
            mean,
            std,
        },
    })
}
