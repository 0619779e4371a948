//! Learnable arrays and their canonical names.
//!
//! Every array is addressable by a dotted name such as `block.3.attn.wq`.
//! Iteration order of [`ViTParams::named`] is the declaration order below;
//! the checkpoint format sorts names lexicographically on top of it.

use super::{ViTConfig, INIT_STD};
use crate::error::{Error, Result};
use crate::tensor::{RngState, Scalar, Tensor};

/// Arrays of one encoder block.
#[derive(Clone, Debug, PartialEq)]
pub struct BlockParams<T: Scalar> {
    pub ln1_gamma: Tensor<T>,
    pub ln1_beta: Tensor<T>,
    pub wq: Tensor<T>,
    pub bq: Tensor<T>,
    pub wk: Tensor<T>,
    pub bk: Tensor<T>,
    pub wv: Tensor<T>,
    pub bv: Tensor<T>,
    pub wo: Tensor<T>,
    pub bo: Tensor<T>,
    pub ln2_gamma: Tensor<T>,
    pub ln2_beta: Tensor<T>,
    pub mlp_w1: Tensor<T>,
    pub mlp_b1: Tensor<T>,
    pub mlp_w2: Tensor<T>,
    pub mlp_b2: Tensor<T>,
}

/// Complete parameter set of one model instance.
#[derive(Clone, Debug, PartialEq)]
pub struct ViTParams<T: Scalar> {
    pub patch_proj_w: Tensor<T>,
    pub patch_proj_b: Tensor<T>,
    pub class_token: Tensor<T>,
    pub pos_embed: Tensor<T>,
    pub blocks: Vec<BlockParams<T>>,
    pub final_ln_gamma: Tensor<T>,
    pub final_ln_beta: Tensor<T>,
    pub head_w: Tensor<T>,
    pub head_b: Tensor<T>,
}

/// Canonical `(name, shape)` pairs implied by a configuration, in
/// declaration order.
pub(crate) fn expected_shapes(cfg: &ViTConfig) -> Vec<(String, Vec<usize>)> {
    let d = cfg.embed_dim;
    let hidden = cfg.hidden_dim();
    let mut out = vec![
        ("patch_proj.w".to_string(), vec![cfg.patch_dim(), d]),
        ("patch_proj.b".to_string(), vec![d]),
        ("class_token".to_string(), vec![1, d]),
        ("pos_embed".to_string(), vec![cfg.num_tokens(), d]),
    ];
    for i in 0..cfg.depth {
        let b = |suffix: &str| format!("block.{i}.{suffix}");
        out.push((b("ln1.gamma"), vec![d]));
        out.push((b("ln1.beta"), vec![d]));
        out.push((b("attn.wq"), vec![d, d]));
        out.push((b("attn.bq"), vec![d]));
        out.push((b("attn.wk"), vec![d, d]));
        out.push((b("attn.bk"), vec![d]));
        out.push((b("attn.wv"), vec![d, d]));
        out.push((b("attn.bv"), vec![d]));
        out.push((b("attn.wo"), vec![d, d]));
        out.push((b("attn.bo"), vec![d]));
        out.push((b("ln2.gamma"), vec![d]));
        out.push((b("ln2.beta"), vec![d]));
        out.push((b("mlp.w1"), vec![d, hidden]));
        out.push((b("mlp.b1"), vec![hidden]));
        out.push((b("mlp.w2"), vec![hidden, d]));
        out.push((b("mlp.b2"), vec![d]));
    }
    out.push(("final_ln.gamma".to_string(), vec![d]));
    out.push(("final_ln.beta".to_string(), vec![d]));
    out.push(("head.w".to_string(), vec![d, cfg.num_classes]));
    out.push(("head.b".to_string(), vec![cfg.num_classes]));
    out
}

impl<T: Scalar> ViTParams<T> {
    /// Random initialization: projection, attention, MLP and head weights
    /// draw from a truncated normal (three-sigma rejection) with standard
    /// deviation [`INIT_STD`]; class token and positional embeddings draw
    /// from the untruncated normal with the same deviation; biases and
    /// layer-norm betas start at zero, layer-norm gammas at one. Draw order
    /// is the declaration order, so a seed fixes every array bitwise.
    pub fn init(cfg: &ViTConfig, rng: &mut RngState) -> Result<Self> {
        cfg.validate()?;
        let d = cfg.embed_dim;
        let hidden = cfg.hidden_dim();
        let trunc = |shape: Vec<usize>, rng: &mut RngState| {
            Tensor::rand_truncated_normal(shape, 0.0, INIT_STD, rng)
        };

        let patch_proj_w = trunc(vec![cfg.patch_dim(), d], rng);
        let patch_proj_b = Tensor::zeros(vec![d]);
        let class_token = Tensor::rand_normal(vec![1, d], 0.0, INIT_STD, rng);
        let pos_embed = Tensor::rand_normal(vec![cfg.num_tokens(), d], 0.0, INIT_STD, rng);

        let mut blocks = Vec::with_capacity(cfg.depth);
        for _ in 0..cfg.depth {
            blocks.push(BlockParams {
                ln1_gamma: Tensor::ones(vec![d]),
                ln1_beta: Tensor::zeros(vec![d]),
                wq: trunc(vec![d, d], rng),
                bq: Tensor::zeros(vec![d]),
                wk: trunc(vec![d, d], rng),
                bk: Tensor::zeros(vec![d]),
                wv: trunc(vec![d, d], rng),
                bv: Tensor::zeros(vec![d]),
                wo: trunc(vec![d, d], rng),
                bo: Tensor::zeros(vec![d]),
                ln2_gamma: Tensor::ones(vec![d]),
                ln2_beta: Tensor::zeros(vec![d]),
                mlp_w1: trunc(vec![d, hidden], rng),
                mlp_b1: Tensor::zeros(vec![hidden]),
                mlp_w2: trunc(vec![hidden, d], rng),
                mlp_b2: Tensor::zeros(vec![d]),
            });
        }

        Ok(ViTParams {
            patch_proj_w,
            patch_proj_b,
            class_token,
            pos_embed,
            blocks,
            final_ln_gamma: Tensor::ones(vec![d]),
            final_ln_beta: Tensor::zeros(vec![d]),
            head_w: trunc(vec![d, cfg.num_classes], rng),
            head_b: Tensor::zeros(vec![cfg.num_classes]),
        })
    }

    /// All-zero arrays; encoder blocks then act as the identity on the token
    /// sequence (only the residual paths carry signal). Mostly for tests.
    pub fn zeros(cfg: &ViTConfig) -> Result<Self> {
        cfg.validate()?;
        let arrays: Vec<Tensor<T>> = expected_shapes(cfg)
            .into_iter()
            .map(|(_, shape)| Tensor::zeros(shape))
            .collect();
        Self::from_arrays(cfg, arrays)
    }

    /// Rebuilds the struct from arrays in declaration order.
    pub(crate) fn from_arrays(cfg: &ViTConfig, arrays: Vec<Tensor<T>>) -> Result<Self> {
        let expected = expected_shapes(cfg);
        if arrays.len() != expected.len() {
            return Err(Error::Config(format!(
                "expected {} arrays, got {}",
                expected.len(),
                arrays.len()
            )));
        }
        for ((name, shape), arr) in expected.iter().zip(&arrays) {
            if arr.shape() != shape.as_slice() {
                return Err(Error::Config(format!(
                    "array `{name}` has shape {:?}, expected {shape:?}",
                    arr.shape()
                )));
            }
        }
        let mut it = arrays.into_iter();
        let mut next = || it.next().expect("length checked");
        let patch_proj_w = next();
        let patch_proj_b = next();
        let class_token = next();
        let pos_embed = next();
        let mut blocks = Vec::with_capacity(cfg.depth);
        for _ in 0..cfg.depth {
            blocks.push(BlockParams {
                ln1_gamma: next(),
                ln1_beta: next(),
                wq: next(),
                bq: next(),
                wk: next(),
                bk: next(),
                wv: next(),
                bv: next(),
                wo: next(),
                bo: next(),
                ln2_gamma: next(),
                ln2_beta: next(),
                mlp_w1: next(),
                mlp_b1: next(),
                mlp_w2: next(),
                mlp_b2: next(),
            });
        }
        Ok(ViTParams {
            patch_proj_w,
            patch_proj_b,
            class_token,
            pos_embed,
            blocks,
            final_ln_gamma: next(),
            final_ln_beta: next(),
            head_w: next(),
            head_b: next(),
        })
    }

    /// `(canonical name, array)` pairs in declaration order.
    pub fn named(&self) -> Vec<(String, &Tensor<T>)> {
        let mut out: Vec<(String, &Tensor<T>)> = vec![
            ("patch_proj.w".to_string(), &self.patch_proj_w),
            ("patch_proj.b".to_string(), &self.patch_proj_b),
            ("class_token".to_string(), &self.class_token),
            ("pos_embed".to_string(), &self.pos_embed),
        ];
        for (i, blk) in self.blocks.iter().enumerate() {
            let b = |suffix: &str| format!("block.{i}.{suffix}");
            out.push((b("ln1.gamma"), &blk.ln1_gamma));
            out.push((b("ln1.beta"), &blk.ln1_beta));
            out.push((b("attn.wq"), &blk.wq));
            out.push((b("attn.bq"), &blk.bq));
            out.push((b("attn.wk"), &blk.wk));
            out.push((b("attn.bk"), &blk.bk));
            out.push((b("attn.wv"), &blk.wv));
            out.push((b("attn.bv"), &blk.bv));
            out.push((b("attn.wo"), &blk.wo));
            out.push((b("attn.bo"), &blk.bo));
            out.push((b("ln2.gamma"), &blk.ln2_gamma));
            out.push((b("ln2.beta"), &blk.ln2_beta));
            out.push((b("mlp.w1"), &blk.mlp_w1));
            out.push((b("mlp.b1"), &blk.mlp_b1));
            out.push((b("mlp.w2"), &blk.mlp_w2));
            out.push((b("mlp.b2"), &blk.mlp_b2));
        }
        out.push(("final_ln.gamma".to_string(), &self.final_ln_gamma));
        out.push(("final_ln.beta".to_string(), &self.final_ln_beta));
        out.push(("head.w".to_string(), &self.head_w));
        out.push(("head.b".to_string(), &self.head_b));
        out
    }

    /// Mutable counterpart of [`ViTParams::named`], same order.
    pub fn named_mut(&mut self) -> Vec<(String, &mut Tensor<T>)> {
        let mut out: Vec<(String, &mut Tensor<T>)> = vec![
            ("patch_proj.w".to_string(), &mut self.patch_proj_w),
            ("patch_proj.b".to_string(), &mut self.patch_proj_b),
            ("class_token".to_string(), &mut self.class_token),
            ("pos_embed".to_string(), &mut self.pos_embed),
        ];
        for (i, blk) in self.blocks.iter_mut().enumerate() {
            let b = |suffix: &str| format!("block.{i}.{suffix}");
            out.push((b("ln1.gamma"), &mut blk.ln1_gamma));
            out.push((b("ln1.beta"), &mut blk.ln1_beta));
            out.push((b("attn.wq"), &mut blk.wq));
            out.push((b("attn.bq"), &mut blk.bq));
            out.push((b("attn.wk"), &mut blk.wk));
            out.push((b("attn.bk"), &mut blk.bk));
            out.push((b("attn.wv"), &mut blk.wv));
            out.push((b("attn.bv"), &mut blk.bv));
            out.push((b("attn.wo"), &mut blk.wo));
            out.push((b("attn.bo"), &mut blk.bo));
            out.push((b("ln2.gamma"), &mut blk.ln2_gamma));
            out.push((b("ln2.beta"), &mut blk.ln2_beta));
            out.push((b("mlp.w1"), &mut blk.mlp_w1));
            out.push((b("mlp.b1"), &mut blk.mlp_b1));
            out.push((b("mlp.w2"), &mut blk.mlp_w2));
            out.push((b("mlp.b2"), &mut blk.mlp_b2));
        }
        out.push(("final_ln.gamma".to_string(), &mut self.final_ln_gamma));
        out.push(("final_ln.beta".to_string(), &mut self.final_ln_beta));
        out.push(("head.w".to_string(), &mut self.head_w));
        out.push(("head.b".to_string(), &mut self.head_b));
        out
    }

    /// Verifies that every array has the shape implied by `cfg`, naming the
    /// first offending array.
    pub fn validate_against(&self, cfg: &ViTConfig) -> Result<()> {
        cfg.validate()?;
        let expected = expected_shapes(cfg);
        let named = self.named();
        if named.len() != expected.len() {
            return Err(Error::Config(format!(
                "parameter set has {} arrays, config implies {}",
                named.len(),
                expected.len()
            )));
        }
        for ((name, tensor), (ename, eshape)) in named.iter().zip(&expected) {
            if name != ename {
                return Err(Error::Config(format!(
                    "unexpected array `{name}` where `{ename}` was expected"
                )));
            }
            if tensor.shape() != eshape.as_slice() {
                return Err(Error::Config(format!(
                    "array `{name}` has shape {:?}, expected {eshape:?}",
                    tensor.shape()
                )));
            }
        }
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> ViTParams<U> {
        ViTParams {
            patch_proj_w: self.patch_proj_w.cast(),
            patch_proj_b: self.patch_proj_b.cast(),
            class_token: self.class_token.cast(),
            pos_embed: self.pos_embed.cast(),
            blocks: self
                .blocks
                .iter()
                .map(|b| BlockParams {
                    ln1_gamma: b.ln1_gamma.cast(),
                    ln1_beta: b.ln1_beta.cast(),
                    wq: b.wq.cast(),
                    bq: b.bq.cast(),
                    wk: b.wk.cast(),
                    bk: b.bk.cast(),
                    wv: b.wv.cast(),
                    bv: b.bv.cast(),
                    wo: b.wo.cast(),
                    bo: b.bo.cast(),
                    ln2_gamma: b.ln2_gamma.cast(),
                    ln2_beta: b.ln2_beta.cast(),
                    mlp_w1: b.mlp_w1.cast(),
                    mlp_b1: b.mlp_b1.cast(),
                    mlp_w2: b.mlp_w2.cast(),
                    mlp_b2: b.mlp_b2.cast(),
                })
                .collect(),
            final_ln_gamma: self.final_ln_gamma.cast(),
            final_ln_beta: self.final_ln_beta.cast(),
            head_w: self.head_w.cast(),
            head_b: self.head_b.cast(),
        }
    }

    /// Total number of learnable scalars.
    pub fn num_scalars(&self) -> usize {
        self.named().iter().map(|(_, t)| t.len()).sum()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn init_is_deterministic() {
        let cfg = ViTConfig::tiny(3);
        let a = ViTParams::<f32>::init(&cfg, &mut RngState::new(7)).unwrap();
        let b = ViTParams::<f32>::init(&cfg, &mut RngState::new(7)).unwrap();
        assert_eq!(a, b);
        let c = ViTParams::<f32>::init(&cfg, &mut RngState::new(8)).unwrap();
        assert_ne!(a, c);
    }

    #[test]
    fn layer_norm_gammas_are_exactly_one() {
        let cfg = ViTConfig::tiny(3);
        let p = ViTParams::<f64>::init(&cfg, &mut RngState::new(0)).unwrap();
        for blk in &p.blocks {
            assert!(blk.ln1_gamma.data().iter().all(|&g| g == 1.0));
            assert!(blk.ln2_gamma.data().iter().all(|&g| g == 1.0));
        }
        assert!(p.final_ln_gamma.data().iter().all(|&g| g == 1.0));
        assert!(p.patch_proj_b.data().iter().all(|&b| b == 0.0));
    }

    #[test]
    fn patch_projection_sample_std_near_target() {
        // base config projection has 589824 entries, enough for the
        // truncated-normal sample deviation to settle
        let cfg = ViTConfig::base16(11);
        let p = ViTParams::<f64>::init(&cfg, &mut RngState::new(1)).unwrap();
        let data = p.patch_proj_w.data();
        let n = data.len() as f64;
        assert!(data.len() >= 100_000);
        let mean = data.iter().sum::<f64>() / n;
        let var = data.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
        assert!((var.sqrt() - INIT_STD).abs() < 0.002, "std {}", var.sqrt());
    }

    #[test]
    fn named_matches_expected_shapes() {
        let cfg = ViTConfig::tiny(5);
        let p = ViTParams::<f32>::init(&cfg, &mut RngState::new(3)).unwrap();
        let named = p.named();
        let expected = expected_shapes(&cfg);
        assert_eq!(named.len(), expected.len());
        for ((n, t), (en, es)) in named.iter().zip(&expected) {
            assert_eq!(n, en);
            assert_eq!(t.shape(), es.as_slice());
        }
        p.validate_against(&cfg).unwrap();
        assert!(named.iter().any(|(n, _)| n == "block.1.attn.wq"));
    }

    #[test]
    fn validate_names_first_offender() {
        let cfg = ViTConfig::tiny(3);
        let mut p = ViTParams::<f32>::init(&cfg, &mut RngState::new(3)).unwrap();
        p.head_w = Tensor::zeros(vec![64, 4]);
        let err = p.validate_against(&cfg).unwrap_err();
        assert!(err.to_string().contains("head.w"), "{err}");
    }
}
