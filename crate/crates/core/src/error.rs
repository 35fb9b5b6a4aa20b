use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("unknown class label {label} (model has {num_classes} classes)")]
    UnknownLabel { label: usize, num_classes: usize },

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("non-finite state at step {step} of a simulated path")]
    NonFiniteState { step: usize },

    #[error("class sizes: {0}")]
    ClassSizes(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("network widths {widths:?} incompatible: {reason}")]
    Widths { widths: Vec<usize>, reason: String },

    #[error("diffusion matrix a(x) is singular at grid index {index}")]
    SingularDiffusion { index: usize },

    #[error("need at least two classes present, found {0}")]
    SingleClass(usize),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// Configuration validation failure, carrying a dotted field path.
    #[error("config field `{path}`: {message}")]
    Config { path: String, message: String },

    #[error("record mismatch: {0}")]
    RecordMismatch(String),

    #[error("too many failed repetitions: {failed} of {total}")]
    TooManyFailures { failed: usize, total: usize },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn config(path: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Config {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
