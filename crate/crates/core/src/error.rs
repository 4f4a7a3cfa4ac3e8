use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error: {0}")]
    Parse(String),

    #[error("{path}: {message}")]
    ParseFile { path: PathBuf, message: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("clause {clause_id} of TS {spec_id} not found")]
    NotFound { spec_id: String, clause_id: String },

    #[error("unknown uid {0}")]
    UnknownUid(String),

    #[error("vector dimension mismatch: index has {expected}, got {actual}")]
    DimMismatch { expected: usize, actual: usize },

    #[error("text has no tokens to embed")]
    EmptyText,

    #[error("provider error{}: {message}", status.map(|s| format!(" (HTTP {s})")).unwrap_or_default())]
    Provider { status: Option<u16>, message: String },

    #[error("prompt is {len} characters, budget is {budget}")]
    PromptTooLarge { len: usize, budget: usize },

    #[error("duplicate entries: {}", .0.join(", "))]
    Duplicate(Vec<String>),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }
}
