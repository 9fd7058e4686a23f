//! Crate-wide error type, mapped onto CLI exit codes.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    /// Incompatible matrix or layer dimensions.
    #[error("shape mismatch: {0}")]
    Shape(String),

    /// An argument outside its documented domain (zero fan-in, r <= 0, ...).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// An operation called out of order, e.g. backward before forward.
    #[error("invalid state: {0}")]
    State(String),

    /// Bad experiment configuration (unknown key, unparsable value).
    #[error("config error: {0}")]
    Config(String),

    /// A malformed input file, with the offending line.
    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    /// Inconsistent data at use time (missing id, impossible split, ...).
    #[error("data error: {0}")]
    Data(String),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("serialization error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    /// CLI exit code: 1 usage/config, 2 data, 3 runtime.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidArgument(_) => 1,
            Error::Parse { .. } | Error::Data(_) | Error::Io(_) | Error::Json(_) => 2,
            Error::Shape(_) | Error::State(_) => 3,
        }
    }
}
