use std::path::PathBuf;

use thiserror::Error;

/// Errors raised anywhere in the classification pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("row {row}: {message}")]
    MalformedRow { row: usize, message: String },

    #[error("row {row}: label value {value:?} is not in the label map")]
    InvalidLabel { row: usize, value: String },

    #[error("corpus is empty")]
    EmptyCorpus,

    #[error("column {0:?} not found in header")]
    MissingColumn(String),

    #[error("invalid fold count k={k}: {reason}")]
    InvalidFolds { k: usize, reason: String },

    #[error("line {line}: {message}")]
    MalformedClusterLine { line: usize, message: String },

    #[error("cluster file is empty")]
    EmptyClusterFile,

    #[error("{what} out of range: {value} (expected {expected})")]
    OutOfRange {
        what: &'static str,
        value: usize,
        expected: &'static str,
    },

    #[error("empty selection: {0}")]
    EmptySelection(&'static str),

    #[error("training data has a single class; at least two are required")]
    SingleClass,

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid hyperparameter {name}={value}: must be positive")]
    InvalidHyperparameter { name: &'static str, value: f64 },

    #[error("malformed decision profile: {0}")]
    MalformedProfile(String),

    #[error("length mismatch: {0}")]
    LengthMismatch(String),

    #[error("meta-feature leakage: {0}")]
    Leakage(String),

    #[error("unknown name {0:?}")]
    UnknownName(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("model file error: {0}")]
    ModelFormat(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
