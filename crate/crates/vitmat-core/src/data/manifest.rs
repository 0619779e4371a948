//! JSON manifests for datasets, splits and fold plans.
//!
//! Split and fold manifests are flat JSON arrays of
//! `{path, class, partition}` / `{path, class, fold}` records so they can be
//! consumed without this crate.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{DatasetIndex, FoldPlan, SplitAssignment};
use crate::error::{Error, Result};

/// Serializable summary of a scanned dataset.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub name: String,
    pub classes: Vec<String>,
    pub per_class_counts: Vec<usize>,
    pub total: usize,
    pub samples: Vec<SampleRecord>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleRecord {
    pub path: String,
    pub class: String,
}

impl DatasetManifest {
    pub fn from_index(index: &DatasetIndex) -> Self {
        DatasetManifest {
            name: index.name().to_string(),
            classes: index.classes().to_vec(),
            per_class_counts: index.per_class_counts().to_vec(),
            total: index.len(),
            samples: index
                .samples()
                .iter()
                .map(|s| SampleRecord {
                    path: s.path.display().to_string(),
                    class: index.classes()[s.class].clone(),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(self)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_slice(&bytes)?)
    }
}

/// One row of a split manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplitRecord {
    pub path: String,
    pub class: String,
    pub partition: String,
}

/// One row of a fold manifest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FoldRecord {
    pub path: String,
    pub class: String,
    pub fold: usize,
}

/// Flattens a split into manifest rows, ordered by sample id.
pub fn split_records(index: &DatasetIndex, split: &SplitAssignment) -> Vec<SplitRecord> {
    let mut partition_of = vec![""; index.len()];
    for &i in &split.train {
        partition_of[i] = "train";
    }
    for &i in &split.val {
        partition_of[i] = "val";
    }
    for &i in &split.test {
        partition_of[i] = "test";
    }
    index
        .samples()
        .iter()
        .zip(partition_of)
        .map(|(s, partition)| SplitRecord {
            path: s.path.display().to_string(),
            class: index.classes()[s.class].clone(),
            partition: partition.to_string(),
        })
        .collect()
}

pub fn write_split_manifest(
    index: &DatasetIndex,
    split: &SplitAssignment,
    path: &Path,
) -> Result<()> {
    let json = serde_json::to_vec_pretty(&split_records(index, split))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}

/// Rebuilds a split against `index` by matching manifest paths.
pub fn read_split_manifest(index: &DatasetIndex, path: &Path) -> Result<SplitAssignment> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let records: Vec<SplitRecord> = serde_json::from_slice(&bytes)?;
    let mut split = SplitAssignment::default();
    for record in &records {
        let id = index
            .samples()
            .iter()
            .position(|s| s.path.display().to_string() == record.path)
            .ok_or_else(|| {
                Error::Input(format!("manifest path {} not in dataset", record.path))
            })?;
        match record.partition.as_str() {
            "train" => split.train.push(id),
            "val" => split.val.push(id),
            "test" => split.test.push(id),
            other => {
                return Err(Error::Input(format!("unknown partition `{other}`")));
            }
        }
    }
    split.train.sort_unstable();
    split.val.sort_unstable();
    split.test.sort_unstable();
    Ok(split)
}

/// Flattens a fold plan into manifest rows, ordered by sample id.
pub fn fold_records(index: &DatasetIndex, plan: &FoldPlan) -> Vec<FoldRecord> {
    index
        .samples()
        .iter()
        .zip(&plan.assignment)
        .map(|(s, &fold)| FoldRecord {
            path: s.path.display().to_string(),
            class: index.classes()[s.class].clone(),
            fold,
        })
        .collect()
}

pub fn write_fold_manifest(index: &DatasetIndex, plan: &FoldPlan, path: &Path) -> Result<()> {
    let json = serde_json::to_vec_pretty(&fold_records(index, plan))?;
    fs::write(path, json).map_err(|e| Error::io(path, e))
}
