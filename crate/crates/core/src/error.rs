// SPDX-License-Identifier: MIT OR Apache-2.0

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("input of length {len} exceeds the naive-evaluation guard of {limit}")]
    SizeGuard { len: usize, limit: usize },

    #[error("degenerate series: {0}")]
    Degenerate(String),

    #[error("invalid variance profile: {0}")]
    Profile(String),

    #[error("quantile table has no level {level} for {kind}")]
    MissingLevel { level: f64, kind: String },

    #[error("unknown {what} `{name}`; available: {available}")]
    UnknownName {
        what: &'static str,
        name: String,
        available: String,
    },

    #[error("experiment configuration: {0}")]
    Config(String),

    #[error("i/o: {0}")]
    Io(String),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Config(format!("JSON: {e}"))
    }
}

pub type Result<T> = std::result::Result<T, Error>;
