//! Crate-wide error type.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error at {path}:{line}: {msg}")]
    Parse {
        path: String,
        line: usize,
        msg: String,
    },

    #[error("validation error{}: {msg}", fmt_at(.path, .line))]
    Validation {
        path: Option<String>,
        line: Option<usize>,
        msg: String,
    },

    #[error("invalid motif: {0}")]
    Motif(String),

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: String, detail: String },

    #[error("resource limit exceeded: {0}")]
    ResourceLimit(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("loss mask selects no nodes")]
    EmptyMask,

    #[error("training diverged at epoch {epoch}: loss is not finite")]
    Divergence {
        epoch: usize,
        report: Box<crate::train::TrainReport>,
    },
}

impl Error {
    pub(crate) fn validation(msg: impl Into<String>) -> Self {
        Error::Validation {
            path: None,
            line: None,
            msg: msg.into(),
        }
    }

    pub(crate) fn validation_at(path: &str, line: usize, msg: impl Into<String>) -> Self {
        Error::Validation {
            path: Some(path.to_string()),
            line: Some(line),
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(op: &str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op: op.to_string(),
            detail: detail.into(),
        }
    }
}

fn fmt_at(path: &Option<String>, line: &Option<usize>) -> String {
    match (path, line) {
        (Some(p), Some(l)) => format!(" at {p}:{l}"),
        (Some(p), None) => format!(" in {p}"),
        _ => String::new(),
    }
}

pub type Result<T> = std::result::Result<T, Error>;
