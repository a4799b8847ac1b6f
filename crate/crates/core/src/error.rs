//! Crate-wide error type.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch at node `{node}`: expected {expected}, got {actual}")]
    ShapeMismatch {
        node: String,
        expected: String,
        actual: String,
    },

    #[error("non-finite values in {0}")]
    NonFinite(String),

    #[error("backward called before forward")]
    BackwardBeforeForward,

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad magic")]
    BadMagic,

    #[error("unsupported checkpoint version {0}")]
    UnsupportedVersion(u32),

    #[error("checkpoint mismatch: {0}")]
    CheckpointMismatch(String),

    #[error("parse error at position {position}: {message}")]
    Parse { position: usize, message: String },

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub fn parse(position: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            position,
            message: message.into(),
        }
    }

    pub fn arg(message: impl Into<String>) -> Self {
        Error::InvalidArgument(message.into())
    }
}
