use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed table: {0}")]
    Csv(#[from] csv::Error),
    #[error("invalid schema: {0}")]
    Schema(String),
    #[error("header does not match schema: expected {expected:?}, found {found:?}")]
    HeaderMismatch { expected: Vec<String>, found: Vec<String> },
    #[error("no usable rows ({dropped} dropped)")]
    NoRows { dropped: usize },
    #[error("unknown variable `{0}`")]
    UnknownVariable(String),
    #[error("variable `{name}` is {actual}, expected {expected}")]
    WrongKind {
        name: String,
        expected: &'static str,
        actual: &'static str,
    },
    #[error("part index {index} out of range for variable `{variable}` ({parts} parts)")]
    PartOutOfRange {
        variable: String,
        index: usize,
        parts: usize,
    },
    #[error("illegal edit: {0}")]
    IllegalEdit(String),
    #[error("grid with {0} cells cannot be indexed")]
    GridTooLarge(String),
    #[error("invalid partition: {0}")]
    InvalidPartition(String),
    #[error("unreachable target: {0}")]
    Unreachable(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("invalid result document: {0}")]
    Document(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
