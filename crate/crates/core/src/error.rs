use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error(transparent)]
    Gateway(#[from] GatewayError),

    #[error("training diverged: {0}")]
    Diverged(String),

    #[error("unsupported configuration: {0}")]
    Unsupported(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub fn validation(msg: impl Into<String>) -> Self {
        Error::Validation(msg.into())
    }
}

/// Failures talking to a language-model backend.
#[derive(Debug, Error)]
pub enum GatewayError {
    /// Network or server failure; the request may be retried.
    #[error("gateway transport error: {0}")]
    Transport(String),
    /// The backend answered with something that breaks the wire contract.
    #[error("gateway protocol error: {0}")]
    Protocol(String),
}

impl GatewayError {
    pub fn is_retriable(&self) -> bool {
        matches!(self, GatewayError::Transport(_))
    }
}
