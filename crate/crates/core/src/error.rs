use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Inconsistent shapes, bad sampler settings, empty inputs.
    #[error("configuration error: {0}")]
    Config(String),

    /// Argument outside the mathematical domain of an operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// Input data rejected during ingestion; `row` is 1-based and counts the header as row 1.
    #[error("data error at row {row}: {message}")]
    Data { row: usize, message: String },

    /// A quantity that cannot be estimated from the given input (e.g. constant samples).
    #[error("undefined: {0}")]
    Undefined(String),

    /// An internal invariant was broken, e.g. a zero count reached the sampler.
    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

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
