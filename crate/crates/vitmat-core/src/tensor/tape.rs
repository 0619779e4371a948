//! Reverse-mode differentiation over a recorded op sequence.
//!
//! A [`Tape`] owns every intermediate value of a computation. Recording an op
//! runs its forward kernel from [`super::ops`], verifies the output is
//! finite, and stores enough context to replay the adjoint later.
//! [`Tape::backward`] seeds the scalar output with 1 and walks the nodes in
//! reverse, accumulating gradients for every variable, leaves included.

use super::ops::{self, Broadcast, LayerNormSaved};
use super::{RngState, Scalar, Tensor};
use crate::error::{Error, Result};

/// Handle to a value recorded on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Var(usize);

enum Op<T: Scalar> {
    Leaf,
    MatMul { a: Var, b: Var },
    Add { a: Var, b: Var },
    Mul { a: Var, b: Var },
    Scale { x: Var, s: T },
    Softmax { x: Var, axis: usize },
    LayerNorm { x: Var, gamma: Var, beta: Var, saved: LayerNormSaved<T> },
    Gelu { x: Var },
    Transpose { x: Var },
    ConcatRows { parts: Vec<Var> },
    ConcatCols { parts: Vec<Var> },
    SliceRows { x: Var, start: usize },
    SliceCols { x: Var, start: usize },
    Sum { x: Var },
    CrossEntropy { logits: Var, labels: Vec<usize>, probs: Tensor<T> },
    Dropout { x: Var, mask: Vec<bool>, keep_inv: T },
}

struct Node<T: Scalar> {
    value: Tensor<T>,
    op: Op<T>,
}

/// Recorded computation with value storage and, after [`Tape::backward`],
/// gradient storage.
pub struct Tape<T: Scalar> {
    nodes: Vec<Node<T>>,
    grads: Vec<Option<Tensor<T>>>,
}

impl<T: Scalar> Default for Tape<T> {
    fn default() -> Self {
        Self::new()
    }
}

impl<T: Scalar> Tape<T> {
    pub fn new() -> Self {
        Tape {
            nodes: Vec::new(),
            grads: Vec::new(),
        }
    }

    fn push(&mut self, value: Tensor<T>, op: Op<T>) -> Var {
        self.nodes.push(Node { value, op });
        Var(self.nodes.len() - 1)
    }

    fn record(&mut self, value: Tensor<T>, op: Op<T>, name: &'static str) -> Result<Var> {
        ops::check_finite(&value, name)?;
        Ok(self.push(value, op))
    }

    /// Registers an input value. Leaves receive gradients like any other
    /// node but have no inputs of their own.
    pub fn leaf(&mut self, value: Tensor<T>) -> Var {
        self.push(value, Op::Leaf)
    }

    pub fn value(&self, v: Var) -> &Tensor<T> {
        &self.nodes[v.0].value
    }

    /// Gradient of the last `backward` target with respect to `v`.
    pub fn grad(&self, v: Var) -> Option<&Tensor<T>> {
        self.grads.get(v.0).and_then(|g| g.as_ref())
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::matmul(self.value(a), self.value(b))?;
        self.record(value, Op::MatMul { a, b }, "matmul")
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::add(self.value(a), self.value(b))?;
        self.record(value, Op::Add { a, b }, "add")
    }

    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let value = ops::mul(self.value(a), self.value(b))?;
        self.record(value, Op::Mul { a, b }, "mul")
    }

    pub fn scale(&mut self, x: Var, s: T) -> Result<Var> {
        let value = ops::scale(self.value(x), s);
        self.record(value, Op::Scale { x, s }, "scale")
    }

    pub fn softmax(&mut self, x: Var, axis: usize) -> Result<Var> {
        let value = ops::softmax(self.value(x), axis)?;
        self.record(value, Op::Softmax { x, axis }, "softmax")
    }

    pub fn layer_norm(&mut self, x: Var, gamma: Var, beta: Var, eps: T) -> Result<Var> {
        let (value, saved) =
            ops::layer_norm(self.value(x), self.value(gamma), self.value(beta), eps)?;
        self.record(value, Op::LayerNorm { x, gamma, beta, saved }, "layer_norm")
    }

    pub fn gelu(&mut self, x: Var) -> Result<Var> {
        let value = ops::gelu(self.value(x));
        self.record(value, Op::Gelu { x }, "gelu")
    }

    pub fn transpose(&mut self, x: Var) -> Result<Var> {
        let value = ops::transpose(self.value(x))?;
        self.record(value, Op::Transpose { x }, "transpose")
    }

    pub fn concat_rows(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let value = ops::concat_rows(&tensors)?;
        self.record(value, Op::ConcatRows { parts: parts.to_vec() }, "concat_rows")
    }

    pub fn concat_cols(&mut self, parts: &[Var]) -> Result<Var> {
        let tensors: Vec<&Tensor<T>> = parts.iter().map(|&p| self.value(p)).collect();
        let value = ops::concat_cols(&tensors)?;
        self.record(value, Op::ConcatCols { parts: parts.to_vec() }, "concat_cols")
    }

    pub fn slice_rows(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let value = ops::slice_rows(self.value(x), start, end)?;
        self.record(value, Op::SliceRows { x, start }, "slice_rows")
    }

    pub fn slice_cols(&mut self, x: Var, start: usize, end: usize) -> Result<Var> {
        let value = ops::slice_cols(self.value(x), start, end)?;
        self.record(value, Op::SliceCols { x, start }, "slice_cols")
    }

    pub fn sum(&mut self, x: Var) -> Result<Var> {
        let value = ops::sum(self.value(x));
        self.record(value, Op::Sum { x }, "sum")
    }

    /// Mean cross-entropy of row logits against integer labels, computed via
    /// log-sum-exp. The softmax probabilities are saved for the adjoint,
    /// which is `(softmax - onehot) / batch`.
    pub fn cross_entropy(&mut self, logits: Var, labels: &[usize]) -> Result<Var> {
        let lv = self.value(logits);
        if lv.ndim() != 2 || lv.shape()[0] != labels.len() {
            return Err(Error::Dimension {
                op: "cross_entropy",
                lhs: lv.shape().to_vec(),
                rhs: vec![labels.len()],
            });
        }
        let classes = lv.shape()[1];
        if let Some(&bad) = labels.iter().find(|&&l| l >= classes) {
            return Err(Error::Input(format!(
                "label {bad} out of range for {classes} classes"
            )));
        }
        let batch = labels.len();
        let mut loss = T::ZERO;
        for (b, &label) in labels.iter().enumerate() {
            let row = &lv.data()[b * classes..(b + 1) * classes];
            let mut max = row[0];
            for &v in row.iter().skip(1) {
                max = max.maximum(v);
            }
            let mut lse = T::ZERO;
            for &v in row {
                lse += (v - max).exp();
            }
            let lse = max + lse.ln();
            loss += lse - row[label];
        }
        loss = loss / T::from_f64(batch as f64);
        let probs = ops::softmax(lv, 1)?;
        self.record(
            Tensor::scalar(loss),
            Op::CrossEntropy {
                logits,
                labels: labels.to_vec(),
                probs,
            },
            "cross_entropy",
        )
    }

    /// Inverted dropout: each element is kept with probability `1 - rate`
    /// and scaled by `1 / (1 - rate)`. A zero rate records a pass-through.
    pub fn dropout(&mut self, x: Var, rate: f64, rng: &mut RngState) -> Result<Var> {
        if !(0.0..1.0).contains(&rate) {
            return Err(Error::Input(format!("dropout rate {rate} outside [0, 1)")));
        }
        let xv = self.value(x);
        let mask: Vec<bool> = (0..xv.len()).map(|_| !rng.chance(rate)).collect();
        let keep_inv = T::from_f64(1.0 / (1.0 - rate));
        let data = xv
            .data()
            .iter()
            .zip(&mask)
            .map(|(&v, &keep)| if keep { v * keep_inv } else { T::ZERO })
            .collect();
        let value = Tensor::new(xv.shape().to_vec(), data)?;
        self.record(value, Op::Dropout { x, mask, keep_inv }, "dropout")
    }

    fn accumulate(grads: &mut [Option<Tensor<T>>], v: Var, delta: Tensor<T>) {
        match &mut grads[v.0] {
            Some(g) => {
                debug_assert_eq!(g.shape(), delta.shape());
                for (gv, dv) in g.data_mut().iter_mut().zip(delta.data()) {
                    *gv += *dv;
                }
            }
            slot @ None => *slot = Some(delta),
        }
    }

    /// Runs the adjoint pass from a scalar output. Gradients for every node
    /// reachable from `output` become available through [`Tape::grad`].
    pub fn backward(&mut self, output: Var) -> Result<()> {
        if self.value(output).len() != 1 {
            return Err(Error::Input(format!(
                "backward target must be scalar, got shape {:?}",
                self.value(output).shape()
            )));
        }
        let mut grads: Vec<Option<Tensor<T>>> = (0..self.nodes.len()).map(|_| None).collect();
        grads[output.0] = Some(Tensor::scalar(T::ONE));

        for idx in (0..=output.0).rev() {
            let Some(out_grad) = grads[idx].take() else {
                continue;
            };
            self.backward_node(idx, &out_grad, &mut grads)?;
            grads[idx] = Some(out_grad);
        }
        self.grads = grads;
        Ok(())
    }

    fn backward_node(
        &self,
        idx: usize,
        dy: &Tensor<T>,
        grads: &mut [Option<Tensor<T>>],
    ) -> Result<()> {
        let node = &self.nodes[idx];
        match &node.op {
            Op::Leaf => {}
            Op::MatMul { a, b } => {
                let bt = ops::transpose(self.value(*b))?;
                let at = ops::transpose(self.value(*a))?;
                Self::accumulate(grads, *a, ops::matmul(dy, &bt)?);
                Self::accumulate(grads, *b, ops::matmul(&at, dy)?);
            }
            Op::Add { a, b } => {
                Self::accumulate(grads, *a, dy.clone());
                Self::accumulate(grads, *b, reduce_to_shape(dy, self.value(*b))?);
            }
            Op::Mul { a, b } => {
                let da = ops::mul(dy, self.value(*b))?;
                Self::accumulate(grads, *a, da);
                let dyx = ops::mul(dy, self.value(*a))?;
                Self::accumulate(grads, *b, reduce_to_shape(&dyx, self.value(*b))?);
            }
            Op::Scale { x, s } => {
                Self::accumulate(grads, *x, ops::scale(dy, *s));
            }
            Op::Softmax { x, axis } => {
                let y = &node.value;
                let dx = softmax_backward(y, dy, *axis)?;
                Self::accumulate(grads, *x, dx);
            }
            Op::LayerNorm { x, gamma, beta, saved } => {
                let (dx, dgamma, dbeta) =
                    layer_norm_backward(dy, self.value(*gamma), saved)?;
                Self::accumulate(grads, *x, dx);
                Self::accumulate(grads, *gamma, dgamma);
                Self::accumulate(grads, *beta, dbeta);
            }
            Op::Gelu { x } => {
                let deriv = ops::gelu_derivative(self.value(*x));
                Self::accumulate(grads, *x, ops::mul(dy, &deriv)?);
            }
            Op::Transpose { x } => {
                Self::accumulate(grads, *x, ops::transpose(dy)?);
            }
            Op::ConcatRows { parts } => {
                let mut row = 0;
                for &p in parts {
                    let rows = self.value(p).shape()[0];
                    Self::accumulate(grads, p, ops::slice_rows(dy, row, row + rows)?);
                    row += rows;
                }
            }
            Op::ConcatCols { parts } => {
                let mut col = 0;
                for &p in parts {
                    let cols = self.value(p).shape()[1];
                    Self::accumulate(grads, p, ops::slice_cols(dy, col, col + cols)?);
                    col += cols;
                }
            }
            Op::SliceRows { x, start } => {
                let xv = self.value(*x);
                let mut dx = Tensor::zeros(xv.shape().to_vec());
                let cols = xv.shape()[1];
                let dst = &mut dx.data_mut()[start * cols..start * cols + dy.len()];
                dst.copy_from_slice(dy.data());
                Self::accumulate(grads, *x, dx);
            }
            Op::SliceCols { x, start } => {
                let xv = self.value(*x);
                let mut dx = Tensor::zeros(xv.shape().to_vec());
                let (cols, w) = (xv.shape()[1], dy.shape()[1]);
                for r in 0..dy.shape()[0] {
                    for c in 0..w {
                        dx.data_mut()[r * cols + start + c] = dy.data()[r * w + c];
                    }
                }
                Self::accumulate(grads, *x, dx);
            }
            Op::Sum { x } => {
                let g = dy.data()[0];
                Self::accumulate(grads, *x, Tensor::full(self.value(*x).shape().to_vec(), g));
            }
            Op::CrossEntropy { logits, labels, probs } => {
                let batch = labels.len();
                let classes = probs.shape()[1];
                let scale = dy.data()[0] / T::from_f64(batch as f64);
                let mut dl = probs.clone();
                for (b, &label) in labels.iter().enumerate() {
                    dl.data_mut()[b * classes + label] -= T::ONE;
                }
                Self::accumulate(grads, *logits, ops::scale(&dl, scale));
            }
            Op::Dropout { x, mask, keep_inv } => {
                let data = dy
                    .data()
                    .iter()
                    .zip(mask)
                    .map(|(&g, &keep)| if keep { g * *keep_inv } else { T::ZERO })
                    .collect();
                Self::accumulate(grads, *x, Tensor::new(dy.shape().to_vec(), data)?);
            }
        }
        Ok(())
    }
}

/// Sums `dy` over leading axes until it matches the shape of `target`
/// (the adjoint of suffix broadcasting).
fn reduce_to_shape<T: Scalar>(dy: &Tensor<T>, target: &Tensor<T>) -> Result<Tensor<T>> {
    match ops::broadcast_relation("reduce", dy, target)? {
        Broadcast::Same => Ok(dy.clone()),
        Broadcast::Suffix(_) => {
            let chunk = target.len();
            let mut out = vec![T::ZERO; chunk];
            for block in dy.data().chunks_exact(chunk) {
                for (o, &v) in out.iter_mut().zip(block) {
                    *o += v;
                }
            }
            Tensor::new(target.shape().to_vec(), out)
        }
    }
}

/// `dx_k = y_k (dy_k - sum_j dy_j y_j)` per slice along `axis`.
fn softmax_backward<T: Scalar>(y: &Tensor<T>, dy: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let outer: usize = y.shape()[..axis].iter().product();
    let len = y.shape()[axis];
    let inner: usize = y.shape()[axis + 1..].iter().product();
    let mut dx = vec![T::ZERO; y.len()];
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + i;
            let mut dot = T::ZERO;
            for k in 0..len {
                dot += dy.data()[idx(k)] * y.data()[idx(k)];
            }
            for k in 0..len {
                let j = idx(k);
                dx[j] = y.data()[j] * (dy.data()[j] - dot);
            }
        }
    }
    Tensor::new(y.shape().to_vec(), dx)
}

fn layer_norm_backward<T: Scalar>(
    dy: &Tensor<T>,
    gamma: &Tensor<T>,
    saved: &LayerNormSaved<T>,
) -> Result<(Tensor<T>, Tensor<T>, Tensor<T>)> {
    let d = gamma.len();
    let rows = dy.len() / d;
    let inv_d = T::ONE / T::from_f64(d as f64);
    let mut dx = vec![T::ZERO; dy.len()];
    let mut dgamma = vec![T::ZERO; d];
    let mut dbeta = vec![T::ZERO; d];
    for r in 0..rows {
        let base = r * d;
        let inv_std = saved.inv_std[r];
        let mut mean_g = T::ZERO;
        let mut mean_gx = T::ZERO;
        for j in 0..d {
            let g = dy.data()[base + j] * gamma.data()[j];
            let xhat = saved.normalized[base + j];
            dgamma[j] += dy.data()[base + j] * xhat;
            dbeta[j] += dy.data()[base + j];
            mean_g += g;
            mean_gx += g * xhat;
        }
        mean_g *= inv_d;
        mean_gx *= inv_d;
        for j in 0..d {
            let g = dy.data()[base + j] * gamma.data()[j];
            let xhat = saved.normalized[base + j];
            dx[base + j] = inv_std * (g - mean_g - xhat * mean_gx);
        }
    }
    Ok((
        Tensor::new(dy.shape().to_vec(), dx)?,
        Tensor::new(vec![d], dgamma)?,
        Tensor::new(vec![d], dbeta)?,
    ))
}
