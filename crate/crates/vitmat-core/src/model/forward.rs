//! Forward pass, both taped (for training) and plain (for inference).

use super::{Mode, ViTConfig, ViTParams, LAYER_NORM_EPS};
use crate::error::{Error, Result};
use crate::tensor::{RngState, Scalar, Tape, Tensor, Var};

/// Rearranges a normalized `[H, W, 3]` image into `[N, patch_size^2 * 3]`
/// patch rows. Patches are taken row-major over the patch grid; within a
/// patch, pixels run row-major with the three channel values interleaved
/// per pixel (the flattening of the `[p, p, 3]` sub-block).
pub fn patchify<T: Scalar>(image: &Tensor<T>, patch_size: usize) -> Result<Tensor<T>> {
    let shape = image.shape();
    if shape.len() != 3 || shape[2] != 3 {
        return Err(Error::Config(format!(
            "patchify expects an [H, W, 3] tensor, got {shape:?}"
        )));
    }
    let (h, w) = (shape[0], shape[1]);
    if patch_size == 0 || h % patch_size != 0 || w % patch_size != 0 {
        return Err(Error::Config(format!(
            "image {h}x{w} not divisible into {patch_size}-pixel patches"
        )));
    }
    let (ph, pw) = (h / patch_size, w / patch_size);
    let row_len = patch_size * patch_size * 3;
    let mut data = Vec::with_capacity(ph * pw * row_len);
    for py in 0..ph {
        for px in 0..pw {
            for dy in 0..patch_size {
                let y = py * patch_size + dy;
                let x0 = px * patch_size;
                let start = (y * w + x0) * 3;
                data.extend_from_slice(&image.data()[start..start + patch_size * 3]);
            }
        }
    }
    Tensor::new(vec![ph * pw, row_len], data)
}

/// Per-block tape handles.
pub struct BlockVars {
    ln1_gamma: Var,
    ln1_beta: Var,
    wq: Var,
    bq: Var,
    wk: Var,
    bk: Var,
    wv: Var,
    bv: Var,
    wo: Var,
    bo: Var,
    ln2_gamma: Var,
    ln2_beta: Var,
    mlp_w1: Var,
    mlp_b1: Var,
    mlp_w2: Var,
    mlp_b2: Var,
}

/// Tape handles for every parameter array, registered in the same order as
/// [`ViTParams::named`] so gradients can be read back by name.
pub struct ParamVars {
    patch_proj_w: Var,
    patch_proj_b: Var,
    class_token: Var,
    pos_embed: Var,
    blocks: Vec<BlockVars>,
    final_ln_gamma: Var,
    final_ln_beta: Var,
    head_w: Var,
    head_b: Var,
}

impl ParamVars {
    /// Copies every parameter array onto the tape as a leaf.
    pub fn register<T: Scalar>(tape: &mut Tape<T>, params: &ViTParams<T>) -> Self {
        Self::build(params, |_, tensor| tape.leaf(tensor.clone()))
    }

    /// Like [`ParamVars::register`], but wires `override_name` to an var
    /// already on the tape instead of a fresh leaf. Gradient checks use this
    /// to probe a single named array.
    pub fn register_with_override<T: Scalar>(
        tape: &mut Tape<T>,
        params: &ViTParams<T>,
        override_name: &str,
        override_var: Var,
    ) -> Self {
        Self::build(params, |name, tensor| {
            if name == override_name {
                override_var
            } else {
                tape.leaf(tensor.clone())
            }
        })
    }

    fn build<T: Scalar>(
        params: &ViTParams<T>,
        mut make: impl FnMut(&str, &Tensor<T>) -> Var,
    ) -> Self {
        let patch_proj_w = make("patch_proj.w", &params.patch_proj_w);
        let patch_proj_b = make("patch_proj.b", &params.patch_proj_b);
        let class_token = make("class_token", &params.class_token);
        let pos_embed = make("pos_embed", &params.pos_embed);
        let mut blocks = Vec::with_capacity(params.blocks.len());
        for (i, blk) in params.blocks.iter().enumerate() {
            let name = |suffix: &str| format!("block.{i}.{suffix}");
            blocks.push(BlockVars {
                ln1_gamma: make(&name("ln1.gamma"), &blk.ln1_gamma),
                ln1_beta: make(&name("ln1.beta"), &blk.ln1_beta),
                wq: make(&name("attn.wq"), &blk.wq),
                bq: make(&name("attn.bq"), &blk.bq),
                wk: make(&name("attn.wk"), &blk.wk),
                bk: make(&name("attn.bk"), &blk.bk),
                wv: make(&name("attn.wv"), &blk.wv),
                bv: make(&name("attn.bv"), &blk.bv),
                wo: make(&name("attn.wo"), &blk.wo),
                bo: make(&name("attn.bo"), &blk.bo),
                ln2_gamma: make(&name("ln2.gamma"), &blk.ln2_gamma),
                ln2_beta: make(&name("ln2.beta"), &blk.ln2_beta),
                mlp_w1: make(&name("mlp.w1"), &blk.mlp_w1),
                mlp_b1: make(&name("mlp.b1"), &blk.mlp_b1),
                mlp_w2: make(&name("mlp.w2"), &blk.mlp_w2),
                mlp_b2: make(&name("mlp.b2"), &blk.mlp_b2),
            });
        }
        ParamVars {
            patch_proj_w,
            patch_proj_b,
            class_token,
            pos_embed,
            blocks,
            final_ln_gamma: make("final_ln.gamma", &params.final_ln_gamma),
            final_ln_beta: make("final_ln.beta", &params.final_ln_beta),
            head_w: make("head.w", &params.head_w),
            head_b: make("head.b", &params.head_b),
        }
    }

    /// Vars in the order of [`ViTParams::named`].
    pub fn in_named_order(&self) -> Vec<Var> {
        let mut out = vec![
            self.patch_proj_w,
            self.patch_proj_b,
            self.class_token,
            self.pos_embed,
        ];
        for b in &self.blocks {
            out.extend_from_slice(&[
                b.ln1_gamma, b.ln1_beta, b.wq, b.bq, b.wk, b.bk, b.wv, b.bv, b.wo, b.bo,
                b.ln2_gamma, b.ln2_beta, b.mlp_w1, b.mlp_b1, b.mlp_w2, b.mlp_b2,
            ]);
        }
        out.extend_from_slice(&[
            self.final_ln_gamma,
            self.final_ln_beta,
            self.head_w,
            self.head_b,
        ]);
        out
    }
}

/// Token embedding: projected patches behind the class token, plus the
/// positional table. Row 0 is `class_token + pos[0]`; row `i >= 1` is
/// `patch_i W + b + pos[i]`.
fn embed<T: Scalar>(tape: &mut Tape<T>, pv: &ParamVars, patches: Var) -> Result<Var> {
    let proj = tape.matmul(patches, pv.patch_proj_w)?;
    let proj = tape.add(proj, pv.patch_proj_b)?;
    let tokens = tape.concat_rows(&[pv.class_token, proj])?;
    tape.add(tokens, pv.pos_embed)
}

/// Multi-head self-attention with per-head scaled dot products. Returns the
/// projected output and, when requested, each head's attention matrix.
fn mhsa<T: Scalar>(
    tape: &mut Tape<T>,
    bv: &BlockVars,
    x: Var,
    cfg: &ViTConfig,
    collect_attn: Option<&mut Vec<Var>>,
) -> Result<Var> {
    let d_k = cfg.head_dim();
    let inv_sqrt_dk = T::from_f64(1.0 / (d_k as f64).sqrt());

    let q = tape.matmul(x, bv.wq)?;
    let q = tape.add(q, bv.bq)?;
    let k = tape.matmul(x, bv.wk)?;
    let k = tape.add(k, bv.bk)?;
    let v = tape.matmul(x, bv.wv)?;
    let v = tape.add(v, bv.bv)?;

    let mut heads = Vec::with_capacity(cfg.heads);
    let mut attns = Vec::with_capacity(cfg.heads);
    for h in 0..cfg.heads {
        let (lo, hi) = (h * d_k, (h + 1) * d_k);
        let qh = tape.slice_cols(q, lo, hi)?;
        let kh = tape.slice_cols(k, lo, hi)?;
        let vh = tape.slice_cols(v, lo, hi)?;
        let kt = tape.transpose(kh)?;
        let scores = tape.matmul(qh, kt)?;
        let scores = tape.scale(scores, inv_sqrt_dk)?;
        let attn = tape.softmax(scores, 1)?;
        attns.push(attn);
        heads.push(tape.matmul(attn, vh)?);
    }
    if let Some(sink) = collect_attn {
        sink.extend(attns);
    }
    let concat = tape.concat_cols(&heads)?;
    let out = tape.matmul(concat, bv.wo)?;
    tape.add(out, bv.bo)
}

struct DropoutCtx<'a> {
    rate: f64,
    rng: &'a mut RngState,
}

fn maybe_dropout<T: Scalar>(
    tape: &mut Tape<T>,
    x: Var,
    ctx: &mut Option<DropoutCtx<'_>>,
) -> Result<Var> {
    match ctx {
        Some(c) => tape.dropout(x, c.rate, c.rng),
        None => Ok(x),
    }
}

/// Pre-LN encoder block: `y = x + MHSA(LN1(x)); z = y + MLP(LN2(y))` with
/// `MLP = W2 gelu(W1 . + b1) + b2`.
fn encoder_block<T: Scalar>(
    tape: &mut Tape<T>,
    bv: &BlockVars,
    x: Var,
    cfg: &ViTConfig,
    dropout: &mut Option<DropoutCtx<'_>>,
    collect_attn: Option<&mut Vec<Var>>,
) -> Result<Var> {
    let eps = T::from_f64(LAYER_NORM_EPS);
    let ln1 = tape.layer_norm(x, bv.ln1_gamma, bv.ln1_beta, eps)?;
    let attn = mhsa(tape, bv, ln1, cfg, collect_attn)?;
    let attn = maybe_dropout(tape, attn, dropout)?;
    let y = tape.add(x, attn)?;

    let ln2 = tape.layer_norm(y, bv.ln2_gamma, bv.ln2_beta, eps)?;
    let hidden = tape.matmul(ln2, bv.mlp_w1)?;
    let hidden = tape.add(hidden, bv.mlp_b1)?;
    let act = tape.gelu(hidden)?;
    let out = tape.matmul(act, bv.mlp_w2)?;
    let out = tape.add(out, bv.mlp_b2)?;
    let out = maybe_dropout(tape, out, dropout)?;
    tape.add(y, out)
}

/// Records the full forward pass on `tape` and returns the `[1, K]` logits
/// var (the class-token row through the head).
pub fn logits_on_tape<T: Scalar>(
    tape: &mut Tape<T>,
    pv: &ParamVars,
    patches: Tensor<T>,
    cfg: &ViTConfig,
    mode: Mode,
    rng: Option<&mut RngState>,
) -> Result<Var> {
    logits_with_attention(tape, pv, patches, cfg, mode, rng, None)
}

fn logits_with_attention<T: Scalar>(
    tape: &mut Tape<T>,
    pv: &ParamVars,
    patches: Tensor<T>,
    cfg: &ViTConfig,
    mode: Mode,
    rng: Option<&mut RngState>,
    mut collect_attn: Option<&mut Vec<Var>>,
) -> Result<Var> {
    let mut dropout = match (mode, cfg.dropout_rate, rng) {
        (Mode::Train, rate, Some(rng)) if rate > 0.0 => Some(DropoutCtx { rate, rng }),
        (Mode::Train, rate, None) if rate > 0.0 => {
            return Err(Error::Config(
                "train-mode forward with dropout requires an rng".into(),
            ));
        }
        _ => None,
    };

    let patches = tape.leaf(patches);
    let mut x = embed(tape, pv, patches)?;
    x = maybe_dropout(tape, x, &mut dropout)?;
    for bv in &pv.blocks {
        x = encoder_block(tape, bv, x, cfg, &mut dropout, collect_attn.as_deref_mut())?;
    }
    let eps = T::from_f64(LAYER_NORM_EPS);
    let x = tape.layer_norm(x, pv.final_ln_gamma, pv.final_ln_beta, eps)?;
    let cls = tape.slice_rows(x, 0, 1)?;
    let logits = tape.matmul(cls, pv.head_w)?;
    tape.add(logits, pv.head_b)
}

/// Runs one image through the model, returning `[K]` logits. The image must
/// already be normalized to an `[image_size, image_size, 3]` tensor. In
/// infer mode the result is a pure function of `(image, params)`.
pub fn forward<T: Scalar>(
    image: &Tensor<T>,
    params: &ViTParams<T>,
    cfg: &ViTConfig,
    mode: Mode,
    rng: Option<&mut RngState>,
) -> Result<Tensor<T>> {
    params.validate_against(cfg)?;
    let patches = patchify(image, cfg.patch_size)?;
    expect_patch_rows(&patches, cfg)?;
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params);
    let out = logits_on_tape(&mut tape, &pv, patches, cfg, mode, rng)?;
    tape.value(out).clone().reshaped(vec![cfg.num_classes])
}

/// [`forward`] that also returns every attention matrix, indexed by block
/// then head. Inference-mode only; used to audit attention row sums.
pub fn forward_with_attention<T: Scalar>(
    image: &Tensor<T>,
    params: &ViTParams<T>,
    cfg: &ViTConfig,
) -> Result<(Tensor<T>, Vec<Tensor<T>>)> {
    params.validate_against(cfg)?;
    let patches = patchify(image, cfg.patch_size)?;
    expect_patch_rows(&patches, cfg)?;
    let mut tape = Tape::new();
    let pv = ParamVars::register(&mut tape, params);
    let mut attn_vars = Vec::new();
    let out = logits_with_attention(
        &mut tape,
        &pv,
        patches,
        cfg,
        Mode::Infer,
        None,
        Some(&mut attn_vars),
    )?;
    let logits = tape.value(out).clone().reshaped(vec![cfg.num_classes])?;
    let attns = attn_vars.iter().map(|&v| tape.value(v).clone()).collect();
    Ok((logits, attns))
}

fn expect_patch_rows<T: Scalar>(patches: &Tensor<T>, cfg: &ViTConfig) -> Result<()> {
    if patches.shape() != [cfg.num_patches(), cfg.patch_dim()] {
        return Err(Error::Config(format!(
            "patch matrix {:?} does not match config ({} x {})",
            patches.shape(),
            cfg.num_patches(),
            cfg.patch_dim()
        )));
    }
    Ok(())
}
