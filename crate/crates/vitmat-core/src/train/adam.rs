//! Adam optimizer state and update rule.

use crate::error::{Error, Result};
use crate::model::ViTParams;
use crate::tensor::{Scalar, Tensor};

/// First and second moment estimates mirroring a parameter set, plus the
/// step counter and hyperparameters.
#[derive(Clone, Debug)]
pub struct AdamState<T: Scalar> {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    t: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    /// Fresh state for arrays of the given lengths, defaults
    /// `beta1 = 0.9`, `beta2 = 0.999`, `eps = 1e-8`.
    pub fn new(lens: &[usize]) -> Self {
        AdamState {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: lens.iter().map(|&n| vec![T::ZERO; n]).collect(),
            v: lens.iter().map(|&n| vec![T::ZERO; n]).collect(),
        }
    }

    /// State shaped to mirror `params`.
    pub fn for_params(params: &ViTParams<T>) -> Self {
        let lens: Vec<usize> = params.named().iter().map(|(_, t)| t.len()).collect();
        Self::new(&lens)
    }

    /// Completed step count.
    pub fn step_count(&self) -> u64 {
        self.t
    }

    /// One update over aligned `(parameter, gradient)` slices:
    /// `m <- b1 m + (1-b1) g`, `v <- b2 v + (1-b2) g^2`, bias-corrected,
    /// then `theta -= lr * m_hat / (sqrt(v_hat) + eps)`. The step counter
    /// increments once per call, before the update.
    pub fn step_slices(&mut self, arrays: &mut [(&mut [T], &[T])], lr: f64) -> Result<()> {
        if arrays.len() != self.m.len() {
            return Err(Error::Dimension {
                op: "adam_step",
                lhs: vec![arrays.len()],
                rhs: vec![self.m.len()],
            });
        }
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        let b1 = T::from_f64(self.beta1);
        let b2 = T::from_f64(self.beta2);
        let nb1 = T::from_f64(1.0 - self.beta1);
        let nb2 = T::from_f64(1.0 - self.beta2);
        let inv_c1 = T::from_f64(1.0 / c1);
        let inv_c2 = T::from_f64(1.0 / c2);
        let lr_t = T::from_f64(lr);
        let eps = T::from_f64(self.eps);

        for (idx, (param, grad)) in arrays.iter_mut().enumerate() {
            if param.len() != self.m[idx].len() || grad.len() != self.m[idx].len() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    lhs: vec![param.len()],
                    rhs: vec![self.m[idx].len()],
                });
            }
            let (m, v) = (&mut self.m[idx], &mut self.v[idx]);
            for i in 0..param.len() {
                let g = grad[i];
                m[i] = b1 * m[i] + nb1 * g;
                v[i] = b2 * v[i] + nb2 * g * g;
                let m_hat = m[i] * inv_c1;
                let v_hat = v[i] * inv_c2;
                param[i] -= lr_t * m_hat / (v_hat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

/// Applies one Adam step to a full parameter set. `grads` must align with
/// [`ViTParams::named`] order and shapes.
pub fn adam_step<T: Scalar>(
    params: &mut ViTParams<T>,
    grads: &[Tensor<T>],
    state: &mut AdamState<T>,
    lr: f64,
) -> Result<()> {
    let mut named = params.named_mut();
    if named.len() != grads.len() {
        return Err(Error::Dimension {
            op: "adam_step",
            lhs: vec![named.len()],
            rhs: vec![grads.len()],
        });
    }
    for ((name, p), g) in named.iter().zip(grads) {
        if p.shape() != g.shape() {
            return Err(Error::Config(format!(
                "gradient for `{name}` has shape {:?}, parameter is {:?}",
                g.shape(),
                p.shape()
            )));
        }
    }
    let mut arrays: Vec<(&mut [T], &[T])> = named
        .iter_mut()
        .zip(grads)
        .map(|((_, p), g)| (p.data_mut(), g.data()))
        .collect();
    state.step_slices(&mut arrays, lr)
}
