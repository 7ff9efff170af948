use std::io;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error: {0}")]
    Io(#[from] io::Error),

    /// Malformed input at a known line or row (1-based).
    #[error("parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("input file not found: {}", .0.display())]
    MissingInput(std::path::PathBuf),

    #[error("configuration error: {0}")]
    Config(String),

    /// Input that parsed fine but cannot be used (empty corpus, all-OOV, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("infeasible transportation problem: {0}")]
    Infeasible(String),

    #[error("non-finite activation in layer {layer}")]
    NonFinite { layer: usize },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// Process exit status: 1 internal, 2 usage/configuration, 3 data.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io(_) => 1,
            Error::Config(_) | Error::MissingInput(_) => 2,
            _ => 3,
        }
    }

    pub(crate) fn parse(line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            line,
            message: message.into(),
        }
    }

    pub(crate) fn config(message: impl Into<String>) -> Self {
        Error::Config(message.into())
    }

    pub(crate) fn data(message: impl Into<String>) -> Self {
        Error::Data(message.into())
    }

    pub(crate) fn dim(message: impl Into<String>) -> Self {
        Error::Dimension(message.into())
    }
}
