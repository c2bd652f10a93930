use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Malformed textual input. `position` is a byte offset or a `line:col` pair,
    /// whichever the format naturally provides.
    #[error("parse error at {position}: {message}")]
    Parse { position: String, message: String },

    #[error("format error: {0}")]
    Format(String),

    #[error("shape mismatch in {op}: {detail}")]
    Shape { op: &'static str, detail: String },

    #[error("invalid argument: {0}")]
    Argument(String),

    #[error("invalid state: {0}")]
    State(String),

    #[error("fingerprint mismatch: expected parameters {expected}, index was built from {actual}")]
    Fingerprint { expected: String, actual: String },

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse_at(position: impl ToString, message: impl Into<String>) -> Self {
        Error::Parse {
            position: position.to_string(),
            message: message.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Short machine-readable name of the variant.
    pub fn kind(&self) -> &'static str {
        match self {
            Error::Parse { .. } => "parse",
            Error::Format(_) => "format",
            Error::Shape { .. } => "shape",
            Error::Argument(_) => "argument",
            Error::State(_) => "state",
            Error::Fingerprint { .. } => "fingerprint",
            Error::NonFinite(_) => "non_finite",
            Error::Io { .. } => "io",
            Error::Json(_) => "json",
        }
    }

    /// True for errors caused by bad input data rather than a bug or runtime failure.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Format(_) | Error::Io { .. } | Error::Json(_) | Error::Fingerprint { .. }
        )
    }
}
