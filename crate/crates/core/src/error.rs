use thiserror::Error;

use crate::hierarchy::HierarchyError;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Hierarchy(#[from] HierarchyError),

    #[error("invalid kernel configuration: {0}")]
    KernelConfig(String),

    #[error("feature dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("window is empty")]
    EmptyWindow,

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("all windows are empty; nothing to predict from")]
    NoExamples,

    #[error("configuration error: {0}")]
    Config(String),

    #[error("generator error: {0}")]
    Generator(String),

    #[error("dataset error at line {line}: {msg}")]
    Dataset { line: usize, msg: String },

    #[error("answer rejected: {0}")]
    Rejected(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
