use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    /// A record violates a data invariant. `index` names the offending
    /// correspondence id when there is one.
    #[error("{}{reason}", index.map(|i| format!("index {i}: ")).unwrap_or_default())]
    Invalid { index: Option<u64>, reason: String },

    #[error("index {index}: descriptor dimension {found}, expected {expected}")]
    DimensionMismatch { index: u64, expected: usize, found: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("degenerate input: {0}")]
    Degenerate(&'static str),

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn invalid(index: Option<u64>, reason: impl Into<String>) -> Self {
        Error::Invalid {
            index,
            reason: reason.into(),
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse { line, msg: msg.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
