use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("file is not indexed: {0}")]
    UnindexedFile(String),

    #[error("unknown unit: {0}")]
    UnknownUnit(String),

    #[error("unit {id} is a {actual}, expected a Function")]
    NotAFunction { id: String, actual: String },

    #[error("invalid graph: {0}")]
    InvalidGraph(String),

    #[error("unknown document: {0}")]
    UnknownDocument(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("dimension mismatch for {doc_id}: expected {expected}, got {actual}")]
    DimensionMismatch {
        doc_id: String,
        expected: usize,
        actual: usize,
    },

    #[error("zero-norm vector: {0}")]
    ZeroVector(String),

    #[error("scorer failed on batch [{first}..{last}] ({size} pairs): {message}")]
    Scorer {
        first: String,
        last: String,
        size: usize,
        message: String,
    },

    #[error("gold labels contain a single class ({0}); both classes are required")]
    SingleClass(&'static str),

    #[error("{0}")]
    Precondition(String),

    #[error("budget {budget} is smaller than the task text ({needed} characters)")]
    BudgetTooSmall { budget: usize, needed: usize },
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
