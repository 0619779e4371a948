//! `vitmat`: batch experiments over directory-per-class image datasets.
//!
//! Exit codes: 0 success, 1 configuration or input error, 2 ingestion/IO
//! error, 3 training failure, 4 model/dataset class mismatch.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use vitmat_core::augment::AugPolicy;
use vitmat_core::data::SplitSpec;
use vitmat_core::error::Error;
use vitmat_core::CheckpointError;

use config::RunConfig;

pub(crate) const TRAINING_FAILURE: u8 = 3;

/// Command error: either a core error with a default exit-code mapping, or
/// one pinned to a phase-specific code.
pub(crate) enum CliError {
    Core(Error),
    Phase { code: u8, source: Error },
}

impl CliError {
    pub(crate) fn phase(code: u8, source: Error) -> Self {
        CliError::Phase { code, source }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Phase { code, .. } => *code,
            CliError::Core(err) => match err {
                Error::Config(_)
                | Error::Input(_)
                | Error::Split { .. }
                | Error::AliasMissing { .. }
                | Error::Serde(_) => 1,
                Error::Ingestion(_) | Error::Io { .. } | Error::ImageDecode { .. } => 2,
                Error::Dimension { .. } | Error::Axis { .. } | Error::Numeric { .. } => 3,
                Error::Checkpoint(CheckpointError::ClassCountMismatch { .. }) => 4,
                Error::Checkpoint(_) => 2,
            },
        }
    }

    fn message(&self) -> String {
        match self {
            CliError::Core(e) | CliError::Phase { source: e, .. } => e.to_string(),
        }
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        CliError::Core(e)
    }
}

pub(crate) type CliResult = Result<(), CliError>;

#[derive(Parser)]
#[command(name = "vitmat", version, about = "Material-classification experiments: scan, split, train, evaluate")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Index a directory-per-class dataset and print its class histogram.
    Scan {
        /// Dataset root containing one subdirectory per class.
        #[arg(long)]
        root: PathBuf,
        /// Dataset name recorded in the manifest.
        #[arg(long)]
        name: String,
        /// Write the dataset manifest JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Merge datasets under a class-alias map.
    Merge {
        /// Run config listing the datasets (alternative to --root/--name pairs).
        #[arg(long)]
        config: Option<PathBuf>,
        /// Dataset roots, repeatable; pairs up with --name.
        #[arg(long = "root")]
        roots: Vec<PathBuf>,
        /// Dataset names, repeatable; pairs up with --root.
        #[arg(long = "name")]
        names: Vec<String>,
        /// Alias map JSON ({dataset: {source_class: merged_class}});
        /// defaults to exact-name identity after normalization.
        #[arg(long)]
        alias: Option<PathBuf>,
        /// Write the merged dataset manifest JSON here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Stratified train/val/test split, written as a JSON manifest.
    Split {
        #[arg(long)]
        root: PathBuf,
        #[arg(long, default_value = "dataset")]
        name: String,
        #[arg(long, default_value_t = 0.7)]
        train: f64,
        #[arg(long, default_value_t = 0.0)]
        val: f64,
        #[arg(long, default_value_t = 0.3)]
        test: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Split manifest output path.
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model per the run config; writes checkpoints and history.
    Train {
        #[arg(long)]
        config: PathBuf,
        /// Train on this named dataset (default: the first one).
        #[arg(long)]
        train_set: Option<String>,
        /// Merge every configured dataset (alias map applies) before training.
        #[arg(long)]
        merge: bool,
        #[arg(long)]
        epochs: Option<usize>,
        #[arg(long)]
        learning_rate: Option<f64>,
        #[arg(long)]
        batch_size: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        /// `f32` or `f64`.
        #[arg(long)]
        precision: Option<String>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on a dataset or split partition.
    Eval {
        #[arg(long)]
        checkpoint: PathBuf,
        /// Dataset root (alternative to --config/--test-set).
        #[arg(long)]
        root: Option<PathBuf>,
        #[arg(long, default_value = "dataset")]
        name: String,
        #[arg(long)]
        config: Option<PathBuf>,
        /// Evaluate on this named dataset from the config.
        #[arg(long)]
        test_set: Option<String>,
        /// Merge every configured dataset before evaluating.
        #[arg(long)]
        merge: bool,
        /// Split manifest restricting evaluation to one partition.
        #[arg(long)]
        manifest: Option<PathBuf>,
        #[arg(long, default_value = "test")]
        partition: String,
        /// Aggregate votes over augmented copies.
        #[arg(long)]
        tta: bool,
        #[arg(long, default_value_t = 5)]
        tta_count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// K-fold cross-validation: per-fold reports plus a mean ± std summary.
    Cv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        train_set: Option<String>,
        #[arg(long)]
        merge: bool,
        #[arg(long)]
        k: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out_dir: Option<PathBuf>,
    },
    /// Classify one image, optionally with test-time-augmentation votes.
    Predict {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        image: PathBuf,
        /// Dataset manifest supplying class names.
        #[arg(long)]
        classes: Option<PathBuf>,
        #[arg(long)]
        tta: bool,
        #[arg(long, default_value_t = 5)]
        tta_count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a deterministic grid of augmented copies of one image.
    AugmentPreview {
        #[arg(long)]
        image: PathBuf,
        #[arg(long, default_value_t = 4)]
        count: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output side length in pixels.
        #[arg(long, default_value_t = 224)]
        size: usize,
        #[arg(long, default_value = ".")]
        out_dir: PathBuf,
        /// Run config supplying the augmentation policy (defaults otherwise).
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

fn apply_train_overrides(
    cfg: &mut RunConfig,
    epochs: Option<usize>,
    learning_rate: Option<f64>,
    batch_size: Option<usize>,
    seed: Option<u64>,
    precision: Option<&str>,
    out_dir: Option<PathBuf>,
) -> Result<(), Error> {
    if let Some(v) = epochs {
        cfg.train.epochs = v;
    }
    if let Some(v) = learning_rate {
        cfg.train.learning_rate = v;
    }
    if let Some(v) = batch_size {
        cfg.train.batch_size = v;
    }
    if let Some(v) = seed {
        cfg.train.seed = v;
        cfg.seed = Some(v);
    }
    if let Some(p) = precision {
        cfg.train.precision = match p {
            "f32" => vitmat_core::train::Precision::F32,
            "f64" => vitmat_core::train::Precision::F64,
            other => {
                return Err(Error::Config(format!(
                    "unknown precision `{other}` (expected `f32` or `f64`)"
                )));
            }
        };
    }
    if let Some(dir) = out_dir {
        cfg.output_dir = dir;
    }
    Ok(())
}

fn run(cli: Cli) -> CliResult {
    match cli.command {
        Command::Scan { root, name, out } => commands::cmd_scan(&root, &name, out.as_deref()),
        Command::Merge {
            config,
            roots,
            names,
            alias,
            out,
        } => {
            if roots.len() != names.len() {
                return Err(Error::Config(format!(
                    "{} --root flags for {} --name flags",
                    roots.len(),
                    names.len()
                ))
                .into());
            }
            commands::cmd_merge(commands::MergeArgs {
                config: config.as_deref(),
                roots: names.into_iter().zip(roots).collect(),
                alias: alias.as_deref(),
                out: out.as_deref(),
            })
        }
        Command::Split {
            root,
            name,
            train,
            val,
            test,
            seed,
            out,
        } => {
            let spec = SplitSpec::new(train, val, test, seed)?;
            commands::cmd_split(&root, &name, &spec, &out)
        }
        Command::Train {
            config,
            train_set,
            merge,
            epochs,
            learning_rate,
            batch_size,
            seed,
            precision,
            out_dir,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            apply_train_overrides(
                &mut cfg,
                epochs,
                learning_rate,
                batch_size,
                seed,
                precision.as_deref(),
                out_dir,
            )?;
            commands::cmd_train(commands::TrainArgs {
                config: cfg,
                train_set: train_set.as_deref(),
                merge,
            })
        }
        Command::Eval {
            checkpoint,
            root,
            name,
            config,
            test_set,
            merge,
            manifest,
            partition,
            tta,
            tta_count,
            seed,
            out_dir,
        } => {
            let cfg = match config {
                Some(path) => Some(RunConfig::load(&path)?),
                None => None,
            };
            commands::cmd_eval(commands::EvalArgs {
                checkpoint: &checkpoint,
                config: cfg,
                root: root.as_deref(),
                name: &name,
                test_set: test_set.as_deref(),
                merge,
                manifest: manifest.as_deref(),
                partition: &partition,
                tta,
                tta_count,
                seed,
                out_dir: out_dir.as_deref(),
            })
        }
        Command::Cv {
            config,
            train_set,
            merge,
            k,
            seed,
            out_dir,
        } => {
            let mut cfg = RunConfig::load(&config)?;
            if let Some(dir) = out_dir {
                cfg.output_dir = dir;
            }
            commands::cmd_cv(commands::CvArgs {
                config: cfg,
                train_set: train_set.as_deref(),
                merge,
                k,
                seed,
            })
        }
        Command::Predict {
            checkpoint,
            image,
            classes,
            tta,
            tta_count,
            seed,
        } => commands::cmd_predict(commands::PredictArgs {
            checkpoint: &checkpoint,
            image: &image,
            classes: classes.as_deref(),
            tta,
            tta_count,
            seed,
        }),
        Command::AugmentPreview {
            image,
            count,
            seed,
            size,
            out_dir,
            config,
        } => {
            let policy = match config {
                Some(path) => RunConfig::load(&path)?.train.augment,
                None => AugPolicy::default(),
            };
            commands::cmd_augment_preview(commands::PreviewArgs {
                image: &image,
                count,
                seed,
                size,
                out_dir: &out_dir,
                policy,
            })
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            eprintln!("error: {}", err.message());
            ExitCode::from(err.exit_code())
        }
    }
}
