use std::path::PathBuf;

use crate::compile::dsl::ParseError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("invalid tree: {}", .0.join("; "))]
    InvalidTree(Vec<String>),

    #[error("{kind} index {index} out of range (limit {limit})")]
    IndexOutOfRange {
        kind: &'static str,
        index: usize,
        limit: usize,
    },

    #[error("trajectory is empty")]
    EmptyTrajectory,

    #[error("invalid action {action} (action space has {limit} actions)")]
    InvalidAction { action: usize, limit: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unsupported format {found:?}, expected {expected:?}")]
    Format {
        expected: &'static str,
        found: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, got })
    }
}
