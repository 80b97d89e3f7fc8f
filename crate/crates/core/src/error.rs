use thiserror::Error;

use crate::dyadic::{DyadicIndex, TreeConfig};

#[derive(Debug, Error)]
pub enum Error {
    #[error("interval {index} is not valid at depth {depth}")]
    InvalidIndex { index: DyadicIndex, depth: u32 },

    #[error("tree configuration mismatch: {left} vs {right}")]
    ConfigMismatch { left: TreeConfig, right: TreeConfig },

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("invalid multiplier family: {0}")]
    InvalidFamily(String),

    #[error("sign enumeration needs {signs} signs, above the limit of {limit}; use Monte Carlo")]
    EnumerationGuard { signs: usize, limit: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("parse error at {pointer}: {message}")]
    Parse { pointer: String, message: String },

    #[error("ratio undefined: {0}")]
    UndefinedRatio(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn parse(pointer: impl Into<String>, message: impl Into<String>) -> Self {
        Error::Parse {
            pointer: pointer.into(),
            message: message.into(),
        }
    }

    pub(crate) fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
