//! Subcommand implementations.

use std::fs;
use std::path::{Path, PathBuf};

use vitmat_core::augment::{io as image_io, tta_variants, AugPolicy};
use vitmat_core::data::manifest::{read_split_manifest, write_split_manifest, DatasetManifest};
use vitmat_core::data::{
    class_histogram, kfold, merge_datasets, scan_dataset, stratified_split, ClassAliasMap,
    DatasetIndex, SplitSpec,
};
use vitmat_core::error::{Error, Result};
use vitmat_core::eval::{
    cv_evaluate, emit_report, evaluate_partition, format_mean_std, render_confusion, tta_predict,
    ReportFormat, TtaOptions,
};
use vitmat_core::model::{check_class_count, load_checkpoint, ViTConfig};
use vitmat_core::tensor::{RngState, Scalar};
use vitmat_core::train::{fit, write_history_csv, Precision, TrainConfig};

use crate::config::{FoldSpec, RunConfig};
use crate::{CliError, CliResult, TRAINING_FAILURE};

fn scan_or_report(root: &Path, name: &str) -> Result<DatasetIndex> {
    let outcome = scan_dataset(root, name)?;
    if !outcome.skipped.is_empty() {
        eprintln!(
            "warning: skipped {} non-image file(s) under {}",
            outcome.skipped.len(),
            root.display()
        );
    }
    Ok(outcome.index)
}

fn print_histogram(index: &DatasetIndex) {
    let histogram = class_histogram(index);
    println!(
        "dataset `{}`: {} samples, {} classes",
        index.name(),
        index.len(),
        index.num_classes()
    );
    for (name, count) in index.classes().iter().zip(&histogram.counts) {
        println!("  {name}: {count}");
    }
    println!("imbalance ratio (max/min): {:.3}", histogram.imbalance_ratio);
}

pub fn cmd_scan(root: &Path, name: &str, out: Option<&Path>) -> CliResult {
    let index = scan_or_report(root, name)?;
    print_histogram(&index);
    if let Some(path) = out {
        DatasetManifest::from_index(&index).write(path)?;
        println!("manifest written to {}", path.display());
    }
    Ok(())
}

/// Loads the dataset(s) a command operates on: one named entry, or every
/// configured dataset merged under the alias map (identity when absent).
fn load_run_dataset(cfg: &RunConfig, set: Option<&str>, merge: bool) -> Result<DatasetIndex> {
    if !merge {
        let entry = cfg.dataset(set)?;
        return scan_or_report(&entry.root, &entry.name);
    }
    if cfg.datasets.len() < 2 {
        return Err(Error::Config(
            "--merge needs at least two datasets in the config".into(),
        ));
    }
    let mut indices = Vec::new();
    for entry in &cfg.datasets {
        indices.push(scan_or_report(&entry.root, &entry.name)?);
    }
    let refs: Vec<&DatasetIndex> = indices.iter().collect();
    let alias = match &cfg.alias_map {
        Some(path) => ClassAliasMap::from_json_file(path)?,
        None => ClassAliasMap::identity_for(&refs),
    };
    let mut merged = merge_datasets(&indices[0], &indices[1], &alias)?;
    for next in &indices[2..] {
        merged = merge_datasets(&merged, next, &alias)?;
    }
    Ok(merged)
}

pub struct MergeArgs<'a> {
    pub config: Option<&'a Path>,
    pub roots: Vec<(String, PathBuf)>,
    pub alias: Option<&'a Path>,
    pub out: Option<&'a Path>,
}

pub fn cmd_merge(args: MergeArgs<'_>) -> CliResult {
    let mut indices = Vec::new();
    let mut alias_path = args.alias.map(Path::to_path_buf);
    if let Some(config_path) = args.config {
        let cfg = RunConfig::load(config_path)?;
        for entry in &cfg.datasets {
            indices.push(scan_or_report(&entry.root, &entry.name)?);
        }
        if alias_path.is_none() {
            alias_path = cfg.alias_map.clone();
        }
    }
    for (name, root) in &args.roots {
        indices.push(scan_or_report(root, name)?);
    }
    if indices.len() < 2 {
        return Err(Error::Config("merge needs at least two datasets".into()).into());
    }
    let refs: Vec<&DatasetIndex> = indices.iter().collect();
    let alias = match &alias_path {
        Some(path) => ClassAliasMap::from_json_file(path)?,
        None => ClassAliasMap::identity_for(&refs),
    };
    let mut merged = merge_datasets(&indices[0], &indices[1], &alias)?;
    for next in &indices[2..] {
        merged = merge_datasets(&merged, next, &alias)?;
    }
    print_histogram(&merged);
    if let Some(path) = args.out {
        DatasetManifest::from_index(&merged).write(path)?;
        println!("manifest written to {}", path.display());
    }
    Ok(())
}

pub fn cmd_split(
    root: &Path,
    name: &str,
    spec: &SplitSpec,
    out: &Path,
) -> CliResult {
    spec.validate()?;
    let index = scan_or_report(root, name)?;
    let split = stratified_split(&index, spec)?;
    write_split_manifest(&index, &split, out)?;
    println!(
        "split `{}`: {} train / {} val / {} test -> {}",
        index.name(),
        split.train.len(),
        split.val.len(),
        split.test.len(),
        out.display()
    );
    Ok(())
}

pub struct TrainArgs<'a> {
    pub config: RunConfig,
    pub train_set: Option<&'a str>,
    pub merge: bool,
}

pub fn cmd_train(args: TrainArgs<'_>) -> CliResult {
    let cfg = args.config;
    cfg.validate()?;
    let split_spec = cfg.split.ok_or_else(|| {
        Error::Config("training requires a `split` block in the config".into())
    })?;

    let index = load_run_dataset(&cfg, args.train_set, args.merge)?;
    let split = stratified_split(&index, &split_spec)?;
    let model_cfg = cfg.model.resolve(index.num_classes())?;

    // nothing failed: from here on the output directory may be created
    let out_dir = cfg.resolved_output_dir();
    cfg.write_effective(&out_dir)?;
    write_split_manifest(&index, &split, &out_dir.join("split.json"))?;

    match cfg.train.precision {
        Precision::F32 => run_training::<f32>(&model_cfg, &cfg.train, &index, &split.train, &split.val, &out_dir),
        Precision::F64 => run_training::<f64>(&model_cfg, &cfg.train, &index, &split.train, &split.val, &out_dir),
    }
}

fn run_training<T: Scalar>(
    model_cfg: &ViTConfig,
    train_cfg: &TrainConfig,
    index: &DatasetIndex,
    train_ids: &[usize],
    val_ids: &[usize],
    out_dir: &Path,
) -> CliResult {
    let ckpt_dir = out_dir.join("checkpoints");
    let outcome = fit::<T>(model_cfg, train_cfg, index, train_ids, val_ids, Some(&ckpt_dir))
        .map_err(|e| CliError::phase(TRAINING_FAILURE, e))?;
    write_history_csv(&outcome.history, &out_dir.join("history.csv"))
        .map_err(|e| CliError::phase(TRAINING_FAILURE, e))?;

    let last = outcome.history.last().expect("at least one epoch");
    match (outcome.best_epoch, outcome.best_val_acc) {
        (Some(epoch), Some(acc)) => println!(
            "trained {} epochs: final train acc {:.4}, best val acc {:.4} (epoch {epoch})",
            outcome.history.len(),
            last.train_acc,
            acc
        ),
        _ => println!(
            "trained {} epochs: final train acc {:.4}",
            outcome.history.len(),
            last.train_acc
        ),
    }
    println!("checkpoints under {}", ckpt_dir.display());
    Ok(())
}

pub struct EvalArgs<'a> {
    pub checkpoint: &'a Path,
    pub config: Option<RunConfig>,
    pub root: Option<&'a Path>,
    pub name: &'a str,
    pub test_set: Option<&'a str>,
    pub merge: bool,
    pub manifest: Option<&'a Path>,
    pub partition: &'a str,
    pub tta: bool,
    pub tta_count: usize,
    pub seed: u64,
    pub out_dir: Option<&'a Path>,
}

pub fn cmd_eval(args: EvalArgs<'_>) -> CliResult {
    let (params, ckpt_cfg) = load_checkpoint(args.checkpoint)?;

    let index = match (&args.root, &args.config) {
        (Some(root), _) => scan_or_report(root, args.name)?,
        (None, Some(cfg)) => load_run_dataset(cfg, args.test_set, args.merge)?,
        (None, None) => {
            return Err(Error::Config(
                "eval needs --root or --config to locate the dataset".into(),
            )
            .into());
        }
    };
    check_class_count(&ckpt_cfg, index.num_classes())?;

    let ids: Vec<usize> = match args.manifest {
        None => (0..index.len()).collect(),
        Some(path) => {
            let split = read_split_manifest(&index, path)?;
            match args.partition {
                "train" => split.train,
                "val" => split.val,
                "test" => split.test,
                other => {
                    return Err(Error::Input(format!("unknown partition `{other}`")).into());
                }
            }
        }
    };
    if ids.is_empty() {
        return Err(Error::Input("selected partition is empty".into()).into());
    }

    let normalize = args
        .config
        .as_ref()
        .map(|c| c.train.normalize.clone())
        .unwrap_or_default();
    let tta = if args.tta {
        let policy = args
            .config
            .as_ref()
            .map(|c| c.train.augment.clone())
            .unwrap_or_default();
        Some(TtaOptions {
            policy,
            count: args.tta_count,
            seed: args.seed,
        })
    } else {
        None
    };

    let mut report = evaluate_partition(&params, &ckpt_cfg, &normalize, &index, &ids, tta.as_ref())?;
    report.checkpoint = Some(args.checkpoint.display().to_string());

    let out_dir = args
        .out_dir
        .map(Path::to_path_buf)
        .or_else(|| args.config.as_ref().map(|c| c.resolved_output_dir()))
        .unwrap_or_else(|| PathBuf::from("."));
    fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    emit_report(&report, &out_dir.join("report.json"), ReportFormat::Json)?;
    emit_report(&report, &out_dir.join("report.csv"), ReportFormat::Csv)?;
    let cm = vitmat_core::eval::ConfusionMatrix::from_rows(&report.confusion)?;
    render_confusion(&cm, &out_dir.join("confusion.pgm"), &out_dir.join("confusion.csv"))?;

    println!(
        "evaluated {} samples of `{}`: overall accuracy {:.4}{}",
        ids.len(),
        index.name(),
        report.overall_accuracy,
        if args.tta {
            format!(" (tta x{})", args.tta_count)
        } else {
            String::new()
        }
    );
    println!("reports under {}", out_dir.display());
    Ok(())
}

pub struct CvArgs<'a> {
    pub config: RunConfig,
    pub train_set: Option<&'a str>,
    pub merge: bool,
    pub k: Option<usize>,
    pub seed: Option<u64>,
}

pub fn cmd_cv(args: CvArgs<'_>) -> CliResult {
    let cfg = args.config;
    cfg.validate()?;
    let fold_spec = cfg.folds.unwrap_or(FoldSpec {
        k: 5,
        seed: cfg.effective_seed(),
    });
    let k = args.k.unwrap_or(fold_spec.k);
    let seed = args.seed.unwrap_or(fold_spec.seed);

    let index = load_run_dataset(&cfg, args.train_set, args.merge)?;
    let model_cfg = cfg.model.resolve(index.num_classes())?;
    let (plan, warnings) = kfold(&index, k, seed)?;
    for warning in &warnings {
        eprintln!("warning: {warning}");
    }

    let out_dir = cfg.resolved_output_dir();
    cfg.write_effective(&out_dir)?;

    let report = match cfg.train.precision {
        Precision::F32 => cv_evaluate::<f32>(&model_cfg, &cfg.train, &index, &plan),
        Precision::F64 => cv_evaluate::<f64>(&model_cfg, &cfg.train, &index, &plan),
    }
    .map_err(|e| CliError::phase(TRAINING_FAILURE, e))?;

    for (fold, fold_report) in report.fold_reports.iter().enumerate() {
        emit_report(
            fold_report,
            &out_dir.join(format!("fold_{fold}.report.json")),
            ReportFormat::Json,
        )?;
        println!(
            "fold {fold}: accuracy {:.4}",
            fold_report.overall_accuracy
        );
    }
    let summary_path = out_dir.join("cv_summary.json");
    let json = serde_json::to_vec_pretty(&report.summary).map_err(Error::from)?;
    fs::write(&summary_path, json).map_err(|e| Error::io(&summary_path, e))?;
    println!(
        "{}-fold accuracy: {}",
        k,
        format_mean_std(report.summary.mean, report.summary.std)
    );
    Ok(())
}

pub struct PredictArgs<'a> {
    pub checkpoint: &'a Path,
    pub image: &'a Path,
    pub classes: Option<&'a Path>,
    pub tta: bool,
    pub tta_count: usize,
    pub seed: u64,
}

pub fn cmd_predict(args: PredictArgs<'_>) -> CliResult {
    let (params, cfg) = load_checkpoint(args.checkpoint)?;
    let img = image_io::read_image(args.image)?;

    let class_names: Vec<String> = match args.classes {
        Some(path) => {
            let manifest = DatasetManifest::read(path)?;
            if manifest.classes.len() != cfg.num_classes {
                return Err(Error::Checkpoint(
                    vitmat_core::CheckpointError::ClassCountMismatch {
                        expected: manifest.classes.len(),
                        found: cfg.num_classes,
                    },
                )
                .into());
            }
            manifest.classes
        }
        None => (0..cfg.num_classes).map(|i| format!("class_{i}")).collect(),
    };

    let consts = vitmat_core::augment::NormalizeConst::default();
    if args.tta {
        let vote = tta_predict(
            &params,
            &cfg,
            &consts,
            &img,
            &AugPolicy::default(),
            args.tta_count,
            &mut RngState::new(args.seed),
        )?;
        println!("{}", class_names[vote.class]);
        for (name, votes) in class_names.iter().zip(&vote.votes) {
            println!("  {name}: {votes}");
        }
        if vote.tie {
            println!("  (tie resolved to the lowest class id)");
        }
    } else {
        let logits =
            vitmat_core::eval::predict_logits(&params, &cfg, &consts, &img)?;
        let class = vitmat_core::eval::argmax(logits.data());
        println!("{}", class_names[class]);
    }
    Ok(())
}

pub struct PreviewArgs<'a> {
    pub image: &'a Path,
    pub count: usize,
    pub seed: u64,
    pub size: usize,
    pub out_dir: &'a Path,
    pub policy: AugPolicy,
}

pub fn cmd_augment_preview(args: PreviewArgs<'_>) -> CliResult {
    if args.count == 0 {
        return Err(Error::Input("preview count must be at least 1".into()).into());
    }
    let img = image_io::read_image(args.image)?;
    let mut rng = RngState::new(args.seed);
    let variants = tta_variants(&img, &args.policy, args.size, &mut rng, args.count)?;
    fs::create_dir_all(args.out_dir).map_err(|e| Error::io(args.out_dir, e))?;
    for (i, variant) in variants.iter().enumerate() {
        let path = args.out_dir.join(format!("preview_{i:02}.ppm"));
        image_io::write_ppm(variant, &path)?;
        println!("{}", path.display());
    }
    Ok(())
}
