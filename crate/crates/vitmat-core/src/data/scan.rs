//! Directory-per-class dataset ingestion.

use std::fs;
use std::path::{Path, PathBuf};

use super::DatasetIndex;
use crate::augment::io::is_supported_extension;
use crate::error::{Error, Result};

/// Result of a scan: the index plus every file that was skipped for not
/// being a readable image format.
#[derive(Clone, Debug)]
pub struct ScanOutcome {
    pub index: DatasetIndex,
    pub skipped: Vec<PathBuf>,
}

/// Walks `root/<class>/<files>`, building a deterministic index: classes
/// sorted lexicographically, files sorted by name within each class. Files
/// without a supported image extension are skipped and reported. A root
/// without class directories, or a class directory without a single image,
/// is an ingestion error.
pub fn scan_dataset(root: &Path, name: &str) -> Result<ScanOutcome> {
    let entries = fs::read_dir(root).map_err(|e| Error::io(root, e))?;
    let mut class_dirs: Vec<(String, PathBuf)> = Vec::new();
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(root, e))?;
        let path = entry.path();
        if path.is_dir() {
            let class_name = entry.file_name().to_string_lossy().into_owned();
            class_dirs.push((class_name, path));
        }
    }
    if class_dirs.is_empty() {
        return Err(Error::Ingestion(format!(
            "root {} contains no class directories",
            root.display()
        )));
    }
    class_dirs.sort_by(|a, b| a.0.cmp(&b.0));

    let mut classes = Vec::with_capacity(class_dirs.len());
    let mut samples: Vec<(PathBuf, usize)> = Vec::new();
    let mut skipped = Vec::new();
    for (class_id, (class_name, dir)) in class_dirs.into_iter().enumerate() {
        let mut files: Vec<PathBuf> = fs::read_dir(&dir)
            .map_err(|e| Error::io(&dir, e))?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.is_file())
            .collect();
        files.sort();
        let mut count = 0usize;
        for file in files {
            if is_supported_extension(&file) {
                samples.push((file, class_id));
                count += 1;
            } else {
                skipped.push(file);
            }
        }
        if count == 0 {
            return Err(Error::Ingestion(format!(
                "class `{class_name}` has no readable images under {}",
                dir.display()
            )));
        }
        classes.push(class_name);
    }

    Ok(ScanOutcome {
        index: DatasetIndex::from_parts(name, classes, samples)?,
        skipped,
    })
}
