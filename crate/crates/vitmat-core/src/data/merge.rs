//! Combining two datasets under a class-alias map.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::DatasetIndex;
use crate::error::{Error, Result};

/// Canonical form used for alias matching: lowercase with spaces and
/// hyphens replaced by underscores, so `Cement-Granular` and
/// `cement granular` both become `cement_granular`.
pub fn normalize_class_name(name: &str) -> String {
    name.to_lowercase()
        .chars()
        .map(|c| if c == ' ' || c == '-' { '_' } else { c })
        .collect()
}

/// Total mapping `(dataset, source class) -> merged class`. Keys are stored
/// normalized; lookups normalize their inputs, so callers can pass raw
/// directory names.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ClassAliasMap {
    map: BTreeMap<String, BTreeMap<String, String>>,
}

impl ClassAliasMap {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn insert(&mut self, dataset: &str, source: &str, merged: &str) {
        self.map
            .entry(dataset.to_string())
            .or_default()
            .insert(normalize_class_name(source), normalize_class_name(merged));
    }

    pub fn lookup(&self, dataset: &str, class: &str) -> Option<&str> {
        self.map
            .get(dataset)?
            .get(&normalize_class_name(class))
            .map(String::as_str)
    }

    /// Identity alias: every class of every index maps to its own normalized
    /// name, so exact-name matches across datasets merge and everything else
    /// stays distinct.
    pub fn identity_for(indices: &[&DatasetIndex]) -> Self {
        let mut map = Self::new();
        for index in indices {
            for class in index.classes() {
                map.insert(index.name(), class, class);
            }
        }
        map
    }

    pub fn from_json_file(path: &Path) -> Result<Self> {
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let raw: BTreeMap<String, BTreeMap<String, String>> = serde_json::from_slice(&bytes)?;
        let mut out = Self::new();
        for (dataset, entries) in raw {
            for (source, merged) in entries {
                out.insert(&dataset, &source, &merged);
            }
        }
        Ok(out)
    }

    pub fn to_json_file(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_vec_pretty(&self.map)?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }
}

/// Merges two indices into one. Every class of both inputs must be covered
/// by the alias map; merged class names are the distinct alias targets,
/// sorted. Sample multisets are preserved, so the merge is commutative up to
/// class ordering.
pub fn merge_datasets(
    a: &DatasetIndex,
    b: &DatasetIndex,
    alias: &ClassAliasMap,
) -> Result<DatasetIndex> {
    let mut merged_names: Vec<String> = Vec::new();
    let mut samples: Vec<(std::path::PathBuf, usize)> = Vec::with_capacity(a.len() + b.len());

    let id_of = |name: &str, merged_names: &mut Vec<String>| -> usize {
        match merged_names.iter().position(|n| n == name) {
            Some(i) => i,
            None => {
                merged_names.push(name.to_string());
                merged_names.len() - 1
            }
        }
    };

    for index in [a, b] {
        for sample in index.samples() {
            let source = &index.classes()[sample.class];
            let target = alias.lookup(index.name(), source).ok_or_else(|| {
                Error::AliasMissing {
                    dataset: index.name().to_string(),
                    class: source.clone(),
                }
            })?;
            let id = id_of(target, &mut merged_names);
            samples.push((sample.path.clone(), id));
        }
    }

    let mut names = [a.name(), b.name()];
    names.sort();
    DatasetIndex::from_parts(format!("{}+{}", names[0], names[1]), merged_names, samples)
}
