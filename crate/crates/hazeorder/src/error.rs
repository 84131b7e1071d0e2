use std::path::PathBuf;
use thiserror::Error;

/// Errors produced by the dehazing library.
#[derive(Debug, Error)]
pub enum Error {
    /// Buffer lengths or map dimensions do not agree.
    #[error("structural error: {0}")]
    Structure(String),

    /// An invalid parameter value (even window, out-of-range fraction, ...).
    #[error("config error: {0}")]
    Config(String),

    /// A computation has no defined result (e.g. zero-variance ranks).
    #[error("undefined result: {0}")]
    Undefined(String),

    /// File decode/encode failure, tagged with the offending path.
    #[error("i/o error on {path}: {message}")]
    Io { path: PathBuf, message: String },

    /// Requested operation not available for this input (e.g. CIEDE2000 on grayscale).
    #[error("unsupported: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Io {
            path: path.into(),
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
