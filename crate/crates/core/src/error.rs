use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An input lies outside the domain of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("unknown template `{0}`")]
    UnknownTemplate(String),

    #[error("allocation has {got} layers but template `{template}` has {expected} slots")]
    LengthMismatch {
        template: String,
        expected: usize,
        got: usize,
    },

    #[error("spatial size underflow at slot {slot}: {height}x{width} cannot be pooled")]
    ShapeUnderflow {
        slot: usize,
        height: u64,
        width: u64,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("{path}:{line}: duplicate result for {key} (first seen on line {first_line})")]
    Conflict {
        path: PathBuf,
        line: u64,
        first_line: u64,
        key: String,
    },

    #[error("result references unknown architecture `{0}`")]
    UnresolvedArch(String),

    #[error("{0}")]
    Empty(&'static str),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
