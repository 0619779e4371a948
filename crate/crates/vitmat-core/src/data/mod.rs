//! Dataset ingestion, class-alias merging, stratified splitting and k-fold
//! planning.
//!
//! A dataset on disk is a directory of class subdirectories, each holding
//! image files. [`DatasetIndex`] is the in-memory view: an ordered class
//! registry, an ordered sample list, and per-class counts. Ordering is
//! deterministic everywhere (classes lexicographic, samples by class then
//! file name), so two scans of the same tree are identical and splits are
//! pure functions of `(index, seed)`.

pub mod manifest;
mod merge;
mod scan;
mod split;
pub mod synth;

pub use merge::{merge_datasets, normalize_class_name, ClassAliasMap};
pub use scan::{scan_dataset, ScanOutcome};
pub use split::{kfold, stratified_split, FoldPlan, SplitAssignment, SplitSpec};

use std::path::PathBuf;

use crate::error::{Error, Result};

/// One indexed image: where it lives and which class it belongs to.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Sample {
    pub path: PathBuf,
    pub class: usize,
}

/// Ordered view of a dataset: class registry, samples, per-class counts.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct DatasetIndex {
    name: String,
    classes: Vec<String>,
    samples: Vec<Sample>,
    per_class_counts: Vec<usize>,
}

impl DatasetIndex {
    /// Builds an index from raw parts, normalizing order: classes are sorted
    /// lexicographically (ids remapped accordingly) and samples sorted by
    /// `(class, path)`. Every class must own at least one sample.
    pub fn from_parts(
        name: impl Into<String>,
        classes: Vec<String>,
        samples: Vec<(PathBuf, usize)>,
    ) -> Result<Self> {
        let name = name.into();
        if classes.is_empty() {
            return Err(Error::Ingestion(format!("dataset `{name}` has no classes")));
        }
        let mut order: Vec<usize> = (0..classes.len()).collect();
        order.sort_by(|&a, &b| classes[a].cmp(&classes[b]));
        if order.windows(2).any(|w| classes[w[0]] == classes[w[1]]) {
            return Err(Error::Ingestion(format!(
                "dataset `{name}` has duplicate class names"
            )));
        }
        let mut remap = vec![0usize; classes.len()];
        for (new_id, &old_id) in order.iter().enumerate() {
            remap[old_id] = new_id;
        }
        let sorted_classes: Vec<String> = order.iter().map(|&i| classes[i].clone()).collect();

        let mut sorted_samples: Vec<Sample> = samples
            .into_iter()
            .map(|(path, class)| {
                if class >= remap.len() {
                    return Err(Error::Ingestion(format!(
                        "sample {} references class id {class} out of range",
                        path.display()
                    )));
                }
                Ok(Sample {
                    path,
                    class: remap[class],
                })
            })
            .collect::<Result<_>>()?;
        sorted_samples.sort_by(|a, b| a.class.cmp(&b.class).then_with(|| a.path.cmp(&b.path)));

        let mut per_class_counts = vec![0usize; sorted_classes.len()];
        for s in &sorted_samples {
            per_class_counts[s.class] += 1;
        }
        if let Some(empty) = per_class_counts.iter().position(|&c| c == 0) {
            return Err(Error::Ingestion(format!(
                "class `{}` of dataset `{name}` has no samples",
                sorted_classes[empty]
            )));
        }
        Ok(DatasetIndex {
            name,
            classes: sorted_classes,
            samples: sorted_samples,
            per_class_counts,
        })
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn num_classes(&self) -> usize {
        self.classes.len()
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn per_class_counts(&self) -> &[usize] {
        &self.per_class_counts
    }

    /// Sample indices belonging to one class, in index order.
    pub fn class_sample_ids(&self, class: usize) -> Vec<usize> {
        self.samples
            .iter()
            .enumerate()
            .filter(|(_, s)| s.class == class)
            .map(|(i, _)| i)
            .collect()
    }

    pub fn class_id(&self, name: &str) -> Option<usize> {
        self.classes.iter().position(|c| c == name)
    }
}

/// Per-class counts recomputed from the sample list, plus the imbalance
/// ratio (largest class count over smallest).
#[derive(Clone, Debug, PartialEq)]
pub struct Histogram {
    pub counts: Vec<usize>,
    pub imbalance_ratio: f64,
}

/// Recounts classes by walking the samples; also yields the max/min ratio
/// quantifying how imbalanced the dataset is.
pub fn class_histogram(index: &DatasetIndex) -> Histogram {
    let mut counts = vec![0usize; index.num_classes()];
    for s in index.samples() {
        counts[s.class] += 1;
    }
    let max = counts.iter().copied().max().unwrap_or(0);
    let min = counts.iter().copied().min().unwrap_or(0);
    Histogram {
        counts,
        imbalance_ratio: if min == 0 { f64::INFINITY } else { max as f64 / min as f64 },
    }
}

/// Shared helper: fixture index with synthetic paths under `name/<class>/`.
#[cfg(test)]
pub(crate) fn fixture_index(name: &str, class_names: &[&str], counts: &[usize]) -> DatasetIndex {
    synth::index_with_counts(name, class_names, counts).unwrap()
}
