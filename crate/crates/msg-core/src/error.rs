//! Crate-wide error type for I/O, format, and runtime failures.
//!
//! Contract violations in the numeric core panic instead; see
//! [`crate::autodiff`].

use std::path::PathBuf;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },

    /// Malformed file contents (WAV headers, checkpoints, manifests).
    #[error("{0}")]
    Format(String),

    /// Valid but unsupported input (codecs, rate ratios).
    #[error("{0}")]
    Unsupported(String),

    /// Invalid configuration.
    #[error("{0}")]
    Config(String),

    /// Failure while running (non-finite losses, missing pairs).
    #[error("{0}")]
    Runtime(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
