use std::io;
use std::path::PathBuf;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    /// Unreadable or unsupported image content.
    #[error("{0}")]
    Image(String),

    /// Input that violates a documented precondition.
    #[error("invalid input: {0}")]
    Invalid(String),

    /// Malformed CSV, reported with the offending line number.
    #[error("{path}:{line}: {msg}")]
    Csv {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    /// An internal invariant failed; indicates a bug or corrupt numeric input.
    #[error("internal invariant violated: {0}")]
    Internal(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
