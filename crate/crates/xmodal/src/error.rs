use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument violated an operation's precondition.
    #[error("invalid argument: {0}")]
    Argument(String),

    /// Vector or matrix dimensions do not chain.
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    /// An iterative decomposition hit its iteration cap without converging.
    #[error("decomposition failed: {0}")]
    Decomposition(String),

    /// A file did not match its on-disk format.
    #[error("format error in {what}: {detail}")]
    Format { what: String, detail: String },

    /// A sampling request cannot be satisfied by the dataset.
    #[error("infeasible: {0}")]
    Infeasible(String),

    /// A forward/backward cache was used with mismatched state.
    #[error("contract violation: {0}")]
    Contract(String),

    /// An optimizer produced a non-finite objective.
    #[error("divergence: {0}")]
    Divergence(String),

    /// A selection predicate matched nothing.
    #[error("empty selection: {0}")]
    EmptySelection(String),

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Format {
            what: what.into(),
            detail: detail.into(),
        }
    }
}
