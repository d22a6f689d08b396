use std::io;

use thiserror::Error;

/// Errors produced by the library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error: {0}")]
    Io(#[from] io::Error),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invalid schema: {0}")]
    Schema(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("unknown entity type `{0}`")]
    UnknownType(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("relation `{relation}` is positives-only but got label {label} for ({e1}, {e2})")]
    PositivesOnlyViolation {
        relation: String,
        e1: String,
        e2: String,
        label: u8,
    },

    #[error("conflicting labels for cell {relation}({e1}, {e2})")]
    ConflictingTuple {
        relation: String,
        e1: String,
        e2: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("empty training set")]
    EmptyTrainingSet,

    #[error("numerical divergence: {0}")]
    Divergence(String),

    #[error("model format error: {0}")]
    Format(String),

    #[error("zero variance: projection subset has no spread")]
    ZeroVariance,
}

impl Error {
    pub(crate) fn parse(path: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.to_string(),
            line,
            message: message.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
