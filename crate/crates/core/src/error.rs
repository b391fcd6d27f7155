use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by the selection engine, scorers, toy models and harness.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty dataset")]
    EmptyDataset,

    #[error("invalid score for id {id:?}: {value}")]
    InvalidScore { id: String, value: f64 },

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("score missing for id {0:?}")]
    MissingScore(String),

    #[error("verification scoring failed for id {id:?}: {source}")]
    VerificationFailed {
        id: String,
        #[source]
        source: Box<Error>,
    },

    #[error("empty budget: prune rate {0} leaves nothing to select")]
    EmptyBudget(f64),

    #[error("invalid config: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("numerical instability: {0}")]
    NumericalInstability(String),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("covariance matrix is not positive definite (class {0})")]
    NotPositiveDefinite(usize),

    #[error("{0} is not implemented")]
    NotImplemented(&'static str),

    #[error("bad checkpoint: {0}")]
    Checkpoint(String),

    #[error("parse error at {path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{cell}: {source}")]
    Cell {
        cell: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            context: path.into(),
            source,
        }
    }

    /// The innermost error, looking through verification and cell wrappers.
    pub fn root(&self) -> &Error {
        match self {
            Error::VerificationFailed { source, .. } | Error::Cell { source, .. } => source.root(),
            other => other,
        }
    }

    /// True for failures caused by reading or writing files.
    pub fn is_io(&self) -> bool {
        matches!(self.root(), Error::Io { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
