//! Forward kernels on plain tensors.
//!
//! These functions implement the math; [`super::Tape`] records their
//! applications and owns the corresponding backward rules. Elementwise
//! binary ops follow the suffix broadcast rule: the right operand's shape
//! must either equal the left's or be a suffix of it, in which case the
//! right operand is repeated over the leading axes.

use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// `tanh` approximation constants for GELU: `0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))`.
pub const GELU_COEF: f64 = 0.044715;

fn sqrt_2_over_pi<T: Scalar>() -> T {
    T::from_f64((2.0 / std::f64::consts::PI).sqrt())
}

pub(crate) fn check_finite<T: Scalar>(t: &Tensor<T>, op: &'static str) -> Result<()> {
    if t.all_finite() {
        Ok(())
    } else {
        Err(Error::Numeric { op })
    }
}

/// How the right operand of an elementwise op lines up with the left.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Broadcast {
    /// Shapes are identical.
    Same,
    /// Right shape is a suffix of the left shape; it repeats over the
    /// leading axes. The payload is the repetition count.
    Suffix(usize),
}

/// Resolves the broadcast relation or reports a dimension error.
pub fn broadcast_relation<T: Scalar>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
) -> Result<Broadcast> {
    if a.shape() == b.shape() {
        return Ok(Broadcast::Same);
    }
    let (ash, bsh) = (a.shape(), b.shape());
    if bsh.len() < ash.len() && ash[ash.len() - bsh.len()..] == *bsh {
        let repeats: usize = ash[..ash.len() - bsh.len()].iter().product();
        return Ok(Broadcast::Suffix(repeats));
    }
    Err(Error::Dimension {
        op,
        lhs: ash.to_vec(),
        rhs: bsh.to_vec(),
    })
}

fn elementwise<T: Scalar>(
    op: &'static str,
    a: &Tensor<T>,
    b: &Tensor<T>,
    f: impl Fn(T, T) -> T,
) -> Result<Tensor<T>> {
    let rel = broadcast_relation(op, a, b)?;
    let out = match rel {
        Broadcast::Same => a
            .data()
            .iter()
            .zip(b.data())
            .map(|(&x, &y)| f(x, y))
            .collect(),
        Broadcast::Suffix(_) => {
            let chunk = b.len();
            a.data()
                .chunks_exact(chunk)
                .flat_map(|block| block.iter().zip(b.data()).map(|(&x, &y)| f(x, y)))
                .collect()
        }
    };
    Tensor::new(a.shape().to_vec(), out)
}

/// Elementwise sum; `b` may broadcast over leading axes of `a`.
pub fn add<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    elementwise("add", a, b, |x, y| x + y)
}

/// Elementwise product; same broadcast rule as [`add`].
pub fn mul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    elementwise("mul", a, b, |x, y| x * y)
}

/// Multiplies every element by `s`.
pub fn scale<T: Scalar>(a: &Tensor<T>, s: T) -> Tensor<T> {
    let data = a.data().iter().map(|&x| x * s).collect();
    Tensor::new(a.shape().to_vec(), data).expect("shape preserved")
}

/// Row-major matrix product of rank-2 tensors: `c[i,j] = sum_k a[i,k] b[k,j]`.
pub fn matmul<T: Scalar>(a: &Tensor<T>, b: &Tensor<T>) -> Result<Tensor<T>> {
    if a.ndim() != 2 || b.ndim() != 2 || a.shape()[1] != b.shape()[0] {
        return Err(Error::Dimension {
            op: "matmul",
            lhs: a.shape().to_vec(),
            rhs: b.shape().to_vec(),
        });
    }
    let (m, k) = (a.shape()[0], a.shape()[1]);
    let n = b.shape()[1];
    let mut out = vec![T::ZERO; m * n];
    let (ad, bd) = (a.data(), b.data());
    for i in 0..m {
        let arow = &ad[i * k..(i + 1) * k];
        let orow = &mut out[i * n..(i + 1) * n];
        for (p, &av) in arow.iter().enumerate() {
            let brow = &bd[p * n..(p + 1) * n];
            for (o, &bv) in orow.iter_mut().zip(brow) {
                *o += av * bv;
            }
        }
    }
    Tensor::new(vec![m, n], out)
}

/// Rank-2 transpose.
pub fn transpose<T: Scalar>(a: &Tensor<T>) -> Result<Tensor<T>> {
    if a.ndim() != 2 {
        return Err(Error::Dimension {
            op: "transpose",
            lhs: a.shape().to_vec(),
            rhs: vec![],
        });
    }
    let (m, n) = (a.shape()[0], a.shape()[1]);
    let mut out = vec![T::ZERO; m * n];
    for i in 0..m {
        for j in 0..n {
            out[j * m + i] = a.data()[i * n + j];
        }
    }
    Tensor::new(vec![n, m], out)
}

/// Iterates `(outer, inner)` slice coordinates for an axis reduction.
fn axis_split<T: Scalar>(
    op: &'static str,
    t: &Tensor<T>,
    axis: usize,
) -> Result<(usize, usize, usize)> {
    if axis >= t.ndim() {
        return Err(Error::Axis {
            op,
            axis,
            shape: t.shape().to_vec(),
        });
    }
    let outer: usize = t.shape()[..axis].iter().product();
    let len = t.shape()[axis];
    let inner: usize = t.shape()[axis + 1..].iter().product();
    Ok((outer, len, inner))
}

/// Numerically stable softmax along `axis`: the slice maximum is subtracted
/// before exponentiation, so arbitrarily large logits cannot overflow.
pub fn softmax<T: Scalar>(x: &Tensor<T>, axis: usize) -> Result<Tensor<T>> {
    let (outer, len, inner) = axis_split("softmax", x, axis)?;
    let mut out = vec![T::ZERO; x.len()];
    let data = x.data();
    for o in 0..outer {
        for i in 0..inner {
            let idx = |k: usize| (o * len + k) * inner + i;
            let mut max = data[idx(0)];
            for k in 1..len {
                max = max.maximum(data[idx(k)]);
            }
            let mut denom = T::ZERO;
            for k in 0..len {
                let e = (data[idx(k)] - max).exp();
                out[idx(k)] = e;
                denom += e;
            }
            for k in 0..len {
                out[idx(k)] = out[idx(k)] / denom;
            }
        }
    }
    Tensor::new(x.shape().to_vec(), out)
}

/// Saved context from a layer-norm forward, consumed by its backward rule.
#[derive(Clone, Debug)]
pub struct LayerNormSaved<T: Scalar> {
    /// `1 / sqrt(var + eps)` per normalized vector.
    pub inv_std: Vec<T>,
    /// Normalized activations before the affine transform.
    pub normalized: Vec<T>,
}

/// Layer normalization over the last axis. Each length-`D` vector is shifted
/// to mean zero and scaled to unit variance (population variance, `eps`
/// inside the square root), then transformed by `gamma` and `beta`.
pub fn layer_norm<T: Scalar>(
    x: &Tensor<T>,
    gamma: &Tensor<T>,
    beta: &Tensor<T>,
    eps: T,
) -> Result<(Tensor<T>, LayerNormSaved<T>)> {
    let d = *x.shape().last().ok_or(Error::Axis {
        op: "layer_norm",
        axis: 0,
        shape: vec![],
    })?;
    if gamma.shape() != [d] || beta.shape() != [d] {
        return Err(Error::Dimension {
            op: "layer_norm",
            lhs: x.shape().to_vec(),
            rhs: gamma.shape().to_vec(),
        });
    }
    let rows = x.len() / d;
    let mut out = vec![T::ZERO; x.len()];
    let mut saved = LayerNormSaved {
        inv_std: Vec::with_capacity(rows),
        normalized: vec![T::ZERO; x.len()],
    };
    let inv_d = T::ONE / T::from_f64(d as f64);
    for r in 0..rows {
        let row = &x.data()[r * d..(r + 1) * d];
        let mut mean = T::ZERO;
        for &v in row {
            mean += v;
        }
        mean *= inv_d;
        let mut var = T::ZERO;
        for &v in row {
            let c = v - mean;
            var += c * c;
        }
        var *= inv_d;
        let inv_std = T::ONE / (var + eps).sqrt();
        saved.inv_std.push(inv_std);
        for (j, &v) in row.iter().enumerate() {
            let n = (v - mean) * inv_std;
            saved.normalized[r * d + j] = n;
            out[r * d + j] = gamma.data()[j] * n + beta.data()[j];
        }
    }
    Ok((Tensor::new(x.shape().to_vec(), out)?, saved))
}

/// GELU with the tanh approximation.
pub fn gelu<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let c = sqrt_2_over_pi::<T>();
    let coef = T::from_f64(GELU_COEF);
    let half = T::from_f64(0.5);
    let data = x
        .data()
        .iter()
        .map(|&v| {
            let u = c * (v + coef * v * v * v);
            half * v * (T::ONE + u.tanh())
        })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

/// Derivative of [`gelu`] at each element of `x`.
pub fn gelu_derivative<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let c = sqrt_2_over_pi::<T>();
    let coef = T::from_f64(GELU_COEF);
    let half = T::from_f64(0.5);
    let three = T::from_f64(3.0);
    let data = x
        .data()
        .iter()
        .map(|&v| {
            let u = c * (v + coef * v * v * v);
            let t = u.tanh();
            let du = c * (T::ONE + three * coef * v * v);
            half * (T::ONE + t) + half * v * (T::ONE - t * t) * du
        })
        .collect();
    Tensor::new(x.shape().to_vec(), data).expect("shape preserved")
}

/// Stacks rank-2 tensors with equal column counts along axis 0.
pub fn concat_rows<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts.first().ok_or_else(|| {
        Error::Input("concat_rows requires at least one tensor".into())
    })?;
    let cols = first.shape()[1];
    let mut rows = 0;
    let mut data = Vec::new();
    for p in parts {
        if p.ndim() != 2 || p.shape()[1] != cols {
            return Err(Error::Dimension {
                op: "concat_rows",
                lhs: first.shape().to_vec(),
                rhs: p.shape().to_vec(),
            });
        }
        rows += p.shape()[0];
        data.extend_from_slice(p.data());
    }
    Tensor::new(vec![rows, cols], data)
}

/// Stacks rank-2 tensors with equal row counts along axis 1.
pub fn concat_cols<T: Scalar>(parts: &[&Tensor<T>]) -> Result<Tensor<T>> {
    let first = parts.first().ok_or_else(|| {
        Error::Input("concat_cols requires at least one tensor".into())
    })?;
    let rows = first.shape()[0];
    let mut cols = 0;
    for p in parts {
        if p.ndim() != 2 || p.shape()[0] != rows {
            return Err(Error::Dimension {
                op: "concat_cols",
                lhs: first.shape().to_vec(),
                rhs: p.shape().to_vec(),
            });
        }
        cols += p.shape()[1];
    }
    let mut data = Vec::with_capacity(rows * cols);
    for r in 0..rows {
        for p in parts {
            let pc = p.shape()[1];
            data.extend_from_slice(&p.data()[r * pc..(r + 1) * pc]);
        }
    }
    Tensor::new(vec![rows, cols], data)
}

/// Copies rows `start..end` of a rank-2 tensor.
pub fn slice_rows<T: Scalar>(x: &Tensor<T>, start: usize, end: usize) -> Result<Tensor<T>> {
    if x.ndim() != 2 || start >= end || end > x.shape()[0] {
        return Err(Error::Input(format!(
            "slice_rows {start}..{end} invalid for shape {:?}",
            x.shape()
        )));
    }
    let cols = x.shape()[1];
    let data = x.data()[start * cols..end * cols].to_vec();
    Tensor::new(vec![end - start, cols], data)
}

/// Copies columns `start..end` of a rank-2 tensor.
pub fn slice_cols<T: Scalar>(x: &Tensor<T>, start: usize, end: usize) -> Result<Tensor<T>> {
    if x.ndim() != 2 || start >= end || end > x.shape()[1] {
        return Err(Error::Input(format!(
            "slice_cols {start}..{end} invalid for shape {:?}",
            x.shape()
        )));
    }
    let (rows, cols) = (x.shape()[0], x.shape()[1]);
    let w = end - start;
    let mut data = Vec::with_capacity(rows * w);
    for r in 0..rows {
        data.extend_from_slice(&x.data()[r * cols + start..r * cols + end]);
    }
    Tensor::new(vec![rows, w], data)
}

/// Sum of all elements as a `[1]` tensor.
pub fn sum<T: Scalar>(x: &Tensor<T>) -> Tensor<T> {
    let mut acc = T::ZERO;
    for &v in x.data() {
        acc += v;
    }
    Tensor::scalar(acc)
}
