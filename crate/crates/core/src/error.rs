use std::path::PathBuf;

use thiserror::Error;

use crate::model::Parity;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("{what} is unreachable: {reason}")]
    Unreachable { what: &'static str, reason: String },

    #[error("eigensolver did not converge for the {parity} block (N = {n}) after {iterations} iterations")]
    NoConvergence { parity: Parity, n: usize, iterations: usize },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cache file {path} is malformed: {reason}")]
    CacheFormat { path: PathBuf, reason: String },
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    /// True for failures of the numerical pipeline (as opposed to bad input).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::NoConvergence { .. } | Error::Unreachable { .. } | Error::Internal(_))
    }
}
