use std::path::PathBuf;

use thiserror::Error;

/// Error type shared across the toolkit.
///
/// Variants are grouped so callers (notably the CLI) can map them onto
/// coarse categories: usage problems, data problems, and invariant
/// violations detected at runtime.
#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {context}: expected {expected:?}, got {actual:?}")]
    ShapeMismatch {
        context: String,
        expected: Vec<usize>,
        actual: Vec<usize>,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("network construction failed: {0}")]
    BadArchitecture(String),

    #[error("training aborted: {0}")]
    TrainingAborted(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("missing file: {}", .0.display())]
    MissingFile(PathBuf),

    #[error("digest mismatch for {path}: manifest records {expected}, file has {actual}")]
    DigestMismatch {
        path: String,
        expected: String,
        actual: String,
    },

    #[error("checkpoint format error: {0}")]
    Checkpoint(String),

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("image decode error: {0}")]
    Image(#[from] image::ImageError),
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
