use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the localisation library.
#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    /// A timestamp or key could not be resolved.
    #[error("lookup error: {0}")]
    Lookup(String),

    /// The input cannot determine a unique answer (too few or coincident points).
    #[error("degenerate input: {0}")]
    Degenerate(String),

    /// ICP found no correspondence within the configured distance.
    #[error("no overlap between live and map clouds (iteration {iteration})")]
    NoOverlap { iteration: usize },

    #[error("empty input: {0}")]
    EmptyInput(String),

    /// Invalid configuration (unknown keys, bad values, bad overrides).
    #[error("config error: {0}")]
    Config(String),

    /// Malformed or version-mismatched file contents.
    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl std::fmt::Display) -> Self {
        Error::Format {
            path: path.into(),
            msg: msg.to_string(),
        }
    }
}
