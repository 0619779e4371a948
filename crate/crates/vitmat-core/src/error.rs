//! Error types shared across the crate.

use std::path::PathBuf;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

/// Unified error type for tensor math, model assembly, data handling,
/// training and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// Shapes of two operands are incompatible for an operation.
    #[error("{op}: dimension mismatch between {lhs:?} and {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    /// An axis argument does not exist for the given shape.
    #[error("{op}: axis {axis} invalid for shape {shape:?}")]
    Axis {
        op: &'static str,
        axis: usize,
        shape: Vec<usize>,
    },

    /// An operation produced a non-finite value.
    #[error("{op}: produced a non-finite value")]
    Numeric { op: &'static str },

    /// A model or run configuration is inconsistent.
    #[error("configuration error: {0}")]
    Config(String),

    /// A caller-supplied value is out of range or otherwise unusable.
    #[error("input error: {0}")]
    Input(String),

    /// A dataset could not be ingested from disk.
    #[error("ingestion error: {0}")]
    Ingestion(String),

    /// A stratified split could not be realized for a class.
    #[error("split error for class `{class}`: {reason}")]
    Split { class: String, reason: String },

    /// A class is not covered by the alias map.
    #[error("alias map has no entry for class `{class}` of dataset `{dataset}`")]
    AliasMissing { dataset: String, class: String },

    /// Checkpoint file problems, each failure mode named.
    #[error("checkpoint error: {0}")]
    Checkpoint(#[from] CheckpointError),

    /// Filesystem failure with path context.
    #[error("i/o error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed image file.
    #[error("image decode error at {path}: {reason}")]
    ImageDecode { path: PathBuf, reason: String },

    /// Serialization/deserialization failure.
    #[error("serialization error: {0}")]
    Serde(#[from] serde_json::Error),
}

/// Distinct checkpoint failure modes.
#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("bad magic bytes (not a checkpoint file)")]
    BadMagic,
    #[error("unsupported format version {0}")]
    UnsupportedVersion(u16),
    #[error("file truncated while reading {context}")]
    Truncated { context: String },
    #[error("array `{name}` has shape {found:?}, expected {expected:?}")]
    ShapeMismatch {
        name: String,
        expected: Vec<usize>,
        found: Vec<usize>,
    },
    #[error("payload checksum mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("checkpoint has {found} classes but the run expects {expected}")]
    ClassCountMismatch { expected: usize, found: usize },
    #[error("unexpected trailing bytes after checksum")]
    TrailingBytes,
}

impl Error {
    /// Attaches path context to a filesystem error.
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
