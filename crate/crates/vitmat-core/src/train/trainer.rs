//! The training loop: seeded batch iteration, taped forward/backward, Adam
//! updates, validation monitoring and checkpointing.

use std::fs;
use std::io::Write as _;
use std::path::Path;

use super::adam::{adam_step, AdamState};
use super::TrainConfig;
use crate::augment::{apply_train_pipeline, io, normalize};
use crate::data::DatasetIndex;
use crate::error::{Error, Result};
use crate::eval::{argmax, predict_logits};
use crate::model::{
    logits_on_tape, patchify, save_checkpoint, Mode, ParamVars, ViTConfig, ViTParams,
};
use crate::tensor::{RngState, Scalar, Tape, Tensor};

// Stream salts: epoch shuffles and per-image augmentation draw from
// distinct substream families of the run seed.
const SHUFFLE_SALT: u64 = 0x5348_5546;
const AUG_SALT: u64 = 0x0041_5547;

/// Aggregates of one epoch over its training partition.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochStats {
    pub mean_loss: f64,
    pub accuracy: f64,
}

/// One history row; `val_acc` is absent when no validation partition exists.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRow {
    pub epoch: usize,
    pub train_loss: f64,
    pub train_acc: f64,
    pub val_acc: Option<f64>,
}

/// Everything a finished run hands back: the best parameters (by validation
/// accuracy, earliest epoch on ties; the final parameters when no validation
/// partition exists), the final parameters, and the per-epoch history.
pub struct FitOutcome<T: Scalar> {
    pub params: ViTParams<T>,
    pub final_params: ViTParams<T>,
    pub history: Vec<EpochRow>,
    pub best_epoch: Option<usize>,
    pub best_val_acc: Option<f64>,
}

fn fisher_yates(ids: &mut [usize], rng: &mut RngState) {
    for i in (1..ids.len()).rev() {
        let j = rng.bounded(i as u64 + 1) as usize;
        ids.swap(i, j);
    }
}

/// Runs one epoch: seeded shuffle, batches of `batch_size` (the last batch
/// may be short and is kept), per image augment -> normalize -> forward in
/// train mode, one batch cross-entropy backward and one Adam step per batch.
/// Returns the mean loss and the argmax accuracy over the augmented samples
/// as trained.
pub fn train_epoch<T: Scalar>(
    params: &mut ViTParams<T>,
    state: &mut AdamState<T>,
    model_cfg: &ViTConfig,
    cfg: &TrainConfig,
    index: &DatasetIndex,
    sample_ids: &[usize],
    epoch: usize,
) -> Result<EpochStats> {
    if index.num_classes() != model_cfg.num_classes {
        return Err(Error::Config(format!(
            "dataset has {} classes but the model expects {}",
            index.num_classes(),
            model_cfg.num_classes
        )));
    }
    if sample_ids.is_empty() {
        return Err(Error::Input("training partition is empty".into()));
    }

    let mut order = sample_ids.to_vec();
    let mut shuffle_rng = RngState::substream2(cfg.seed ^ SHUFFLE_SALT, epoch as u64, 0);
    fisher_yates(&mut order, &mut shuffle_rng);

    let mut total_loss = 0.0f64;
    let mut correct = 0usize;
    for batch in order.chunks(cfg.batch_size) {
        let mut tape: Tape<T> = Tape::new();
        let pv = ParamVars::register(&mut tape, params);
        let mut logit_vars = Vec::with_capacity(batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        for &sid in batch {
            let sample = &index.samples()[sid];
            let img = io::read_image(&sample.path)?;
            let mut rng = RngState::substream2(cfg.seed ^ AUG_SALT, epoch as u64, sid as u64);
            let augmented =
                apply_train_pipeline(&img, &cfg.augment, model_cfg.image_size, &mut rng)?;
            let input: Tensor<T> = normalize(&augmented, &cfg.normalize);
            let patches = patchify(&input, model_cfg.patch_size)?;
            let lv = logits_on_tape(
                &mut tape,
                &pv,
                patches,
                model_cfg,
                Mode::Train,
                Some(&mut rng),
            )?;
            logit_vars.push(lv);
            labels.push(sample.class);
        }

        for (lv, &label) in logit_vars.iter().zip(&labels) {
            if argmax(tape.value(*lv).data()) == label {
                correct += 1;
            }
        }

        let logits = tape.concat_rows(&logit_vars)?;
        let loss_var = tape.cross_entropy(logits, &labels)?;
        total_loss += tape.value(loss_var).data()[0].to_f64() * batch.len() as f64;
        tape.backward(loss_var)?;

        let grads: Vec<Tensor<T>> = pv
            .in_named_order()
            .iter()
            .zip(params.named())
            .map(|(&var, (_, p))| {
                tape.grad(var)
                    .cloned()
                    .unwrap_or_else(|| Tensor::zeros(p.shape().to_vec()))
            })
            .collect();
        adam_step(params, &grads, state, cfg.learning_rate)?;
    }

    Ok(EpochStats {
        mean_loss: total_loss / sample_ids.len() as f64,
        accuracy: correct as f64 / sample_ids.len() as f64,
    })
}

/// Clean accuracy on a partition: resize + normalize + infer-mode forward,
/// argmax against the label. No augmentation, no votes.
fn partition_accuracy<T: Scalar>(
    params: &ViTParams<T>,
    model_cfg: &ViTConfig,
    cfg: &TrainConfig,
    index: &DatasetIndex,
    ids: &[usize],
) -> Result<f64> {
    let mut correct = 0usize;
    for &sid in ids {
        let sample = &index.samples()[sid];
        let img = io::read_image(&sample.path)?;
        let logits = predict_logits(params, model_cfg, &cfg.normalize, &img)?;
        if argmax(logits.data()) == sample.class {
            correct += 1;
        }
    }
    Ok(correct as f64 / ids.len() as f64)
}

/// Full training run over `cfg.epochs` epochs. When `val_ids` is nonempty,
/// validation accuracy is recorded per epoch and the best-validation
/// parameter set is retained (ties keep the earlier epoch). When
/// `checkpoint_dir` is given, `final.vitc` and `best.vitc` are written
/// there, plus `epoch_N.vitc` every `checkpoint_every` epochs.
pub fn fit<T: Scalar>(
    model_cfg: &ViTConfig,
    cfg: &TrainConfig,
    index: &DatasetIndex,
    train_ids: &[usize],
    val_ids: &[usize],
    checkpoint_dir: Option<&Path>,
) -> Result<FitOutcome<T>> {
    model_cfg.validate()?;
    cfg.validate()?;
    if let Some(dir) = checkpoint_dir {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }

    let mut params = ViTParams::<T>::init(model_cfg, &mut RngState::new(cfg.seed))?;
    let mut state = AdamState::for_params(&params);
    let mut history = Vec::with_capacity(cfg.epochs);
    let mut best: Option<(usize, f64, ViTParams<T>)> = None;

    for epoch in 1..=cfg.epochs {
        let stats = train_epoch(
            &mut params,
            &mut state,
            model_cfg,
            cfg,
            index,
            train_ids,
            epoch - 1,
        )
        .map_err(|e| Error::Input(format!("epoch {epoch}: {e}")))?;

        let val_acc = if val_ids.is_empty() {
            None
        } else {
            Some(partition_accuracy(&params, model_cfg, cfg, index, val_ids)?)
        };
        if let Some(acc) = val_acc {
            let improved = match &best {
                None => true,
                Some((_, best_acc, _)) => acc > *best_acc,
            };
            if improved {
                best = Some((epoch, acc, params.clone()));
            }
        }
        history.push(EpochRow {
            epoch,
            train_loss: stats.mean_loss,
            train_acc: stats.accuracy,
            val_acc,
        });

        if let Some(dir) = checkpoint_dir {
            if cfg.checkpoint_every > 0 && epoch % cfg.checkpoint_every == 0 {
                save_checkpoint(&params, model_cfg, &dir.join(format!("epoch_{epoch}.vitc")))?;
            }
        }
    }

    let (best_epoch, best_val_acc, best_params) = match best {
        Some((e, acc, p)) => (Some(e), Some(acc), p),
        None => (None, None, params.clone()),
    };
    if let Some(dir) = checkpoint_dir {
        save_checkpoint(&params, model_cfg, &dir.join("final.vitc"))?;
        save_checkpoint(&best_params, model_cfg, &dir.join("best.vitc"))?;
    }
    Ok(FitOutcome {
        params: best_params,
        final_params: params,
        history,
        best_epoch,
        best_val_acc,
    })
}

/// Writes history as CSV with columns `epoch,train_loss,train_acc,val_acc`;
/// the last column is empty when no validation partition existed.
pub fn write_history_csv(history: &[EpochRow], path: &Path) -> Result<()> {
    let mut buf = Vec::new();
    writeln!(buf, "epoch,train_loss,train_acc,val_acc").expect("vec write");
    for row in history {
        let val = row.val_acc.map(|v| v.to_string()).unwrap_or_default();
        writeln!(
            buf,
            "{},{},{},{}",
            row.epoch, row.train_loss, row.train_acc, val
        )
        .expect("vec write");
    }
    fs::write(path, buf).map_err(|e| Error::io(path, e))
}
