//! Crate-wide error type.

use std::path::PathBuf;
use thiserror::Error;

use crate::convex_core::LpStatus;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot access {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed row {line}: {reason}")]
    MalformedRow { line: usize, reason: String },

    #[error("invalid input: {0}")]
    Validation(String),

    #[error("year {year} has only {weeks} raw weeks; 52 required")]
    IncompleteYear { year: i32, weeks: usize },

    #[error("linear program ended with status {status:?}: {detail}")]
    Lp { status: LpStatus, detail: String },

    #[error("barrier method did not converge: {0}")]
    BarrierNonConvergence(String),

    #[error("empty histogram cell (regime {regime}, week {week}) even after pooling")]
    EmptyCell { regime: usize, week: usize },

    #[error("regime {0} never observed in the series")]
    RegimeNeverObserved(usize),

    #[error("model/config mismatch: {0}")]
    ModelMismatch(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("serialization error: {0}")]
    Serde(String),

    #[error("internal error: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code class: 1 validation, 2 solver.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Lp { .. } | Error::BarrierNonConvergence(_) => 2,
            _ => 1,
        }
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Serde(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
