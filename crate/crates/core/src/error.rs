use std::path::PathBuf;

use thiserror::Error;

/// Errors raised across the toolkit.
///
/// Variants are grouped so that a front end can map them onto exit codes:
/// usage/config problems, data problems (I/O, formats, dimensions) and
/// numerical failures.
#[derive(Debug, Error)]
pub enum Error {
    #[error("empty input")]
    EmptyInput,

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("context size must be odd (got {0})")]
    EvenContext(usize),

    #[error("unsupported audio: {0}")]
    Audio(String),

    #[error("decay range too short")]
    DecayTooShort,

    #[error("invalid room geometry: {0}")]
    Geometry(String),

    #[error("no attention weights: model kind `{0}` has no attention stage")]
    NoAttention(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("backward called before any forward pass was recorded")]
    NoForward,

    #[error("corrupt checkpoint: {0}")]
    Checkpoint(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("config file: {0}")]
    Toml(#[from] toml::de::Error),
}

/// Broad classification of an [`Error`], used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Usage,
    Data,
    Numerical,
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Config(_) | Error::EvenContext(_) | Error::Toml(_) | Error::NoAttention(_) => {
                ErrorClass::Usage
            }
            Error::Numerical(_) | Error::NoForward => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
