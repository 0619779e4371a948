//! Batch cross-entropy with its gradient.

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

/// Mean negative log-likelihood of `labels` under row-softmax `logits`,
/// computed through log-sum-exp so saturated logits cannot overflow.
/// Returns the loss and its gradient `(softmax - onehot) / batch`.
pub fn cross_entropy<T: Scalar>(
    logits: &Tensor<T>,
    labels: &[usize],
) -> Result<(f64, Tensor<T>)> {
    if logits.ndim() != 2 || logits.shape()[0] != labels.len() {
        return Err(Error::Dimension {
            op: "cross_entropy",
            lhs: logits.shape().to_vec(),
            rhs: vec![labels.len()],
        });
    }
    let classes = logits.shape()[1];
    if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
        return Err(Error::Input(format!(
            "label {bad} out of range for {classes} classes"
        )));
    }
    let batch = labels.len();
    let mut loss = 0.0f64;
    let mut dlogits = vec![T::ZERO; logits.len()];
    for (b, &label) in labels.iter().enumerate() {
        let row = &logits.data()[b * classes..(b + 1) * classes];
        let mut max = row[0];
        for &v in row.iter().skip(1) {
            max = max.maximum(v);
        }
        let mut denom = 0.0f64;
        for &v in row {
            denom += (v - max).to_f64().exp();
        }
        let lse = max.to_f64() + denom.ln();
        loss += lse - row[label].to_f64();
        for (k, &v) in row.iter().enumerate() {
            let p = (v - max).to_f64().exp() / denom;
            let onehot = if k == label { 1.0 } else { 0.0 };
            dlogits[b * classes + k] = T::from_f64((p - onehot) / batch as f64);
        }
    }
    Ok((
        loss / batch as f64,
        Tensor::new(logits.shape().to_vec(), dlogits)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn uniform_logits_give_ln_k() {
        let logits = Tensor::<f64>::zeros(vec![2, 4]);
        let (loss, _) = cross_entropy(&logits, &[0, 3]).unwrap();
        assert!((loss - 4.0f64.ln()).abs() < 1e-12);
        assert!((loss - 1.386294).abs() < 1e-6);
    }

    #[test]
    fn saturated_true_logit_gives_zero_loss() {
        let logits = Tensor::<f64>::new(vec![1, 3], vec![1000.0, 0.0, 0.0]).unwrap();
        let (loss, _) = cross_entropy(&logits, &[0]).unwrap();
        assert!(loss.abs() < 1e-12);
    }

    #[test]
    fn gradient_matches_finite_differences() {
        let mut rng = crate::tensor::RngState::new(81);
        let logits = Tensor::<f64>::rand_normal(vec![3, 5], 0.0, 2.0, &mut rng);
        let labels = [1usize, 4, 0];
        let (_, dlogits) = cross_entropy(&logits, &labels).unwrap();
        let eps = 1e-6;
        for i in 0..logits.len() {
            let mut plus = logits.clone();
            plus.data_mut()[i] += eps;
            let mut minus = logits.clone();
            minus.data_mut()[i] -= eps;
            let (lp, _) = cross_entropy(&plus, &labels).unwrap();
            let (lm, _) = cross_entropy(&minus, &labels).unwrap();
            let numeric = (lp - lm) / (2.0 * eps);
            let analytic = dlogits.data()[i];
            let denom = analytic.abs().max(numeric.abs()).max(1e-8);
            assert!(
                ((analytic - numeric) / denom).abs() < 1e-6,
                "entry {i}: {analytic} vs {numeric}"
            );
        }
    }

    #[test]
    fn duplicated_batch_equals_single_sample_loss() {
        let mut rng = crate::tensor::RngState::new(82);
        let row = Tensor::<f64>::rand_normal(vec![1, 6], 0.0, 1.0, &mut rng);
        let mut batch_data = Vec::new();
        for _ in 0..4 {
            batch_data.extend_from_slice(row.data());
        }
        let batch = Tensor::new(vec![4, 6], batch_data).unwrap();
        let (single, _) = cross_entropy(&row, &[2]).unwrap();
        let (multi, _) = cross_entropy(&batch, &[2, 2, 2, 2]).unwrap();
        assert!((single - multi).abs() < 1e-12);
    }

    #[test]
    fn out_of_range_label_is_rejected() {
        let logits = Tensor::<f64>::zeros(vec![1, 3]);
        assert!(matches!(
            cross_entropy(&logits, &[3]),
            Err(Error::Input(_))
        ));
    }
}
