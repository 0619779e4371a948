//! Finite-difference verification of taped gradients.

use super::tape::{Tape, Var};
use super::{Scalar, Tensor};
use crate::error::{Error, Result};

/// Relative-error floor: entries where both routes are below this magnitude
/// compare against the floor instead of each other.
const REL_FLOOR: f64 = 1e-8;

fn eval_scalar<T, F>(f: &F, x: &Tensor<T>) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let mut tape = Tape::new();
    let v = tape.leaf(x.clone());
    let out = f(&mut tape, v)?;
    let value = tape.value(out);
    if value.len() != 1 {
        return Err(Error::Input(format!(
            "grad_check target must be scalar, got shape {:?}",
            value.shape()
        )));
    }
    Ok(value.data()[0].to_f64())
}

/// Compares the taped gradient of a scalar computation `f(x)` against central
/// finite differences at every entry of `x`, returning the maximum relative
/// error `|analytic - numeric| / max(|analytic|, |numeric|, 1e-8)`.
///
/// `f` must be a pure function of its input: it is re-run twice per checked
/// entry with perturbed values.
pub fn grad_check<T, F>(f: F, x: &Tensor<T>, eps: T) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let all: Vec<usize> = (0..x.len()).collect();
    grad_check_entries(f, x, eps, &all)
}

/// [`grad_check`] restricted to the given entry indices, for parameter
/// tensors too large to probe exhaustively.
pub fn grad_check_entries<T, F>(f: F, x: &Tensor<T>, eps: T, entries: &[usize]) -> Result<f64>
where
    T: Scalar,
    F: Fn(&mut Tape<T>, Var) -> Result<Var>,
{
    let analytic = {
        let mut tape = Tape::new();
        let v = tape.leaf(x.clone());
        let out = f(&mut tape, v)?;
        if tape.value(out).len() != 1 {
            return Err(Error::Input(format!(
                "grad_check target must be scalar, got shape {:?}",
                tape.value(out).shape()
            )));
        }
        tape.backward(out)?;
        match tape.grad(v) {
            Some(g) => g.clone(),
            None => Tensor::zeros(x.shape().to_vec()),
        }
    };

    let eps_f = eps.to_f64();
    let mut max_rel = 0.0f64;
    let mut probe = x.clone();
    for &i in entries {
        let original = probe.data()[i];
        probe.data_mut()[i] = original + eps;
        let plus = eval_scalar(&f, &probe)?;
        probe.data_mut()[i] = original - eps;
        let minus = eval_scalar(&f, &probe)?;
        probe.data_mut()[i] = original;

        let numeric = (plus - minus) / (2.0 * eps_f);
        let a = analytic.data()[i].to_f64();
        let denom = a.abs().max(numeric.abs()).max(REL_FLOOR);
        max_rel = max_rel.max((a - numeric).abs() / denom);
    }
    Ok(max_rel)
}

#[cfg(test)]
mod tests {
    use super::super::{ops, RngState};
    use super::*;

    #[test]
    fn sum_gradient_is_exact() {
        let mut rng = RngState::new(11);
        let x = Tensor::<f64>::rand_normal(vec![3, 3], 0.0, 1.0, &mut rng);
        let err = grad_check(|t, v| t.sum(v), &x, 1e-5).unwrap();
        assert!(err < 1e-10, "rel err {err}");
    }

    #[test]
    fn softmax_sum_gradient_is_conserved() {
        let mut rng = RngState::new(12);
        let x = Tensor::<f64>::rand_normal(vec![5], 0.0, 1.0, &mut rng);
        // sum(softmax(x)) is constant, so the stencil width does not bias the
        // difference quotient; a wide eps keeps rounding noise below the
        // threshold instead of amplifying it by 1/eps.
        let err = grad_check(
            |t, v| {
                let s = t.softmax(v, 0)?;
                t.sum(s)
            },
            &x,
            1.0,
        )
        .unwrap();
        assert!(err < 1e-7, "rel err {err}");
    }

    #[test]
    fn matmul_gradient_vs_finite_differences() {
        let mut rng = RngState::new(13);
        let a = Tensor::<f64>::rand_normal(vec![4, 5], 0.0, 1.0, &mut rng);
        let b = Tensor::<f64>::rand_normal(vec![5, 3], 0.0, 1.0, &mut rng);
        let err = grad_check(
            |t, v| {
                let bv = t.leaf(b.clone());
                let c = t.matmul(v, bv)?;
                t.sum(c)
            },
            &a,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-6, "rel err {err}");
    }

    #[test]
    fn layer_norm_gradient_vs_finite_differences() {
        let mut rng = RngState::new(14);
        let x = Tensor::<f64>::rand_normal(vec![8], 1.0, 2.0, &mut rng);
        let gamma = Tensor::<f64>::rand_normal(vec![8], 1.0, 0.1, &mut rng);
        let beta = Tensor::<f64>::rand_normal(vec![8], 0.0, 0.1, &mut rng);
        // weight the output so the gradient is not trivially uniform
        let w = Tensor::<f64>::rand_normal(vec![8], 0.0, 1.0, &mut rng);
        let err = grad_check(
            |t, v| {
                let g = t.leaf(gamma.clone());
                let bt = t.leaf(beta.clone());
                let wv = t.leaf(w.clone());
                let y = t.layer_norm(v, g, bt, 1e-6)?;
                let yw = t.mul(y, wv)?;
                t.sum(yw)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "rel err {err}");
    }

    #[test]
    fn gelu_gradient_on_grid() {
        // spread over [-3, 3] including points near the curvature peaks
        let xs: Vec<f64> = (0..25).map(|i| -3.0 + 6.0 * i as f64 / 24.0).collect();
        let x = Tensor::<f64>::new(vec![25], xs).unwrap();
        let err = grad_check(
            |t, v| {
                let g = t.gelu(v)?;
                t.sum(g)
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "rel err {err}");
    }

    #[test]
    fn all_ops_pass_gradcheck_on_random_shapes() {
        // weighted sums make every op's adjoint observable
        let mut rng = RngState::new(15);
        for trial in 0..4u64 {
            let rows = 2 + (trial as usize % 3) * 5; // up to 12
            let cols = 3 + (trial as usize % 2) * 13; // up to 16
            let x = Tensor::<f64>::rand_normal(vec![rows, cols], 0.0, 1.0, &mut rng);
            let w = Tensor::<f64>::rand_normal(vec![rows, cols], 0.0, 1.0, &mut rng);
            let bias = Tensor::<f64>::rand_normal(vec![cols], 0.0, 1.0, &mut rng);

            let err = grad_check(
                |t, v| {
                    let wv = t.leaf(w.clone());
                    let bv = t.leaf(bias.clone());
                    let a = t.add(v, bv)?;       // broadcast add
                    let m = t.mul(a, wv)?;       // elementwise mul
                    let sc = t.scale(m, 0.7)?;
                    let sm = t.softmax(sc, 1)?;
                    let tr = t.transpose(sm)?;
                    let prod = t.matmul(v, tr)?; // rows x rows
                    let g = t.gelu(prod)?;
                    let sl = t.slice_rows(g, 0, 1)?;
                    t.sum(sl)
                },
                &x,
                1e-5,
            )
            .unwrap();
            assert!(err < 1e-5, "trial {trial}: rel err {err}");
        }
    }

    #[test]
    fn cross_entropy_gradient_vs_finite_differences() {
        let mut rng = RngState::new(16);
        let logits = Tensor::<f64>::rand_normal(vec![3, 5], 0.0, 2.0, &mut rng);
        let labels = vec![4usize, 0, 2];
        let err = grad_check(
            |t, v| t.cross_entropy(v, &labels),
            &logits,
            1e-6,
        )
        .unwrap();
        assert!(err < 1e-6, "rel err {err}");

        // and the standalone dlogits published by the loss matches the tape
        let mut tape = Tape::new();
        let lv = tape.leaf(logits.clone());
        let loss = tape.cross_entropy(lv, &labels).unwrap();
        tape.backward(loss).unwrap();
        let probs = ops::softmax(&logits, 1).unwrap();
        for (b, &label) in labels.iter().enumerate() {
            for k in 0..5 {
                let expect =
                    (probs.at2(b, k) - if k == label { 1.0 } else { 0.0 }) / labels.len() as f64;
                let got = tape.grad(lv).unwrap().at2(b, k);
                assert!((expect - got).abs() < 1e-12);
            }
        }
    }
}
