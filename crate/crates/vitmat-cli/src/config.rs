//! Run configuration: one JSON file describing datasets, model, training,
//! and the split or fold mode. Command-line flags override file values; the
//! effective merged configuration is echoed into the output directory.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use vitmat_core::data::SplitSpec;
use vitmat_core::error::{Error, Result};
use vitmat_core::model::ViTConfig;
use vitmat_core::train::TrainConfig;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetEntry {
    pub name: String,
    pub root: PathBuf,
}

/// Model selection: a named preset plus optional field overrides. The class
/// count always comes from the scanned dataset.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    /// `"base16"` (default) or `"tiny"`.
    pub preset: Option<String>,
    pub image_size: Option<usize>,
    pub patch_size: Option<usize>,
    pub embed_dim: Option<usize>,
    pub depth: Option<usize>,
    pub heads: Option<usize>,
    pub mlp_ratio: Option<f64>,
    pub dropout_rate: Option<f64>,
}

impl ModelSpec {
    pub fn resolve(&self, num_classes: usize) -> Result<ViTConfig> {
        let mut cfg = match self.preset.as_deref() {
            None | Some("base16") => ViTConfig::base16(num_classes),
            Some("tiny") => ViTConfig::tiny(num_classes),
            Some(other) => {
                return Err(Error::Config(format!(
                    "unknown model preset `{other}` (expected `base16` or `tiny`)"
                )));
            }
        };
        if let Some(v) = self.image_size {
            cfg.image_size = v;
        }
        if let Some(v) = self.patch_size {
            cfg.patch_size = v;
        }
        if let Some(v) = self.embed_dim {
            cfg.embed_dim = v;
        }
        if let Some(v) = self.depth {
            cfg.depth = v;
        }
        if let Some(v) = self.heads {
            cfg.heads = v;
        }
        if let Some(v) = self.mlp_ratio {
            cfg.mlp_ratio = v;
        }
        if let Some(v) = self.dropout_rate {
            cfg.dropout_rate = v;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldSpec {
    pub k: usize,
    pub seed: u64,
}

impl Default for FoldSpec {
    fn default() -> Self {
        FoldSpec { k: 5, seed: 0 }
    }
}

/// The full run description.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub datasets: Vec<DatasetEntry>,
    pub alias_map: Option<PathBuf>,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub split: Option<SplitSpec>,
    pub folds: Option<FoldSpec>,
    pub output_dir: PathBuf,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let cfg: RunConfig = serde_json::from_slice(&bytes)?;
        Ok(cfg)
    }

    /// Validation shared by every command; commands with extra requirements
    /// (a split, a fold plan) check those separately.
    pub fn validate(&self) -> Result<()> {
        if self.split.is_some() && self.folds.is_some() {
            return Err(Error::Config(
                "exactly one of `split` and `folds` may be set".into(),
            ));
        }
        if let Some(split) = &self.split {
            split.validate()?;
        }
        self.train.validate()?;
        for entry in &self.datasets {
            if !entry.root.exists() {
                return Err(Error::Config(format!(
                    "dataset `{}` root {} does not exist",
                    entry.name,
                    entry.root.display()
                )));
            }
        }
        if let Some(alias) = &self.alias_map {
            if !alias.exists() {
                return Err(Error::Config(format!(
                    "alias map {} does not exist",
                    alias.display()
                )));
            }
        }
        Ok(())
    }

    /// The effective run seed: the top-level override when present, the
    /// training seed otherwise.
    pub fn effective_seed(&self) -> u64 {
        self.seed.unwrap_or(self.train.seed)
    }

    /// Dataset entry by name, or the first entry when no name is given.
    pub fn dataset(&self, name: Option<&str>) -> Result<&DatasetEntry> {
        match name {
            Some(n) => self
                .datasets
                .iter()
                .find(|d| d.name == n)
                .ok_or_else(|| Error::Config(format!("no dataset named `{n}` in config"))),
            None => self
                .datasets
                .first()
                .ok_or_else(|| Error::Config("config lists no datasets".into())),
        }
    }

    /// Output directory after the `VITMAT_OUT` environment override.
    pub fn resolved_output_dir(&self) -> PathBuf {
        match std::env::var_os("VITMAT_OUT") {
            Some(dir) if !dir.is_empty() => PathBuf::from(dir),
            _ => {
                if self.output_dir.as_os_str().is_empty() {
                    PathBuf::from("out")
                } else {
                    self.output_dir.clone()
                }
            }
        }
    }

    /// Echoes the merged configuration into the output directory.
    pub fn write_effective(&self, dir: &Path) -> Result<()> {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = dir.join("effective_config.json");
        let json = serde_json::to_vec_pretty(self)?;
        fs::write(&path, json).map_err(|e| Error::io(&path, e))
    }
}
