use std::path::PathBuf;

use thiserror::Error;

/// Errors produced by every stage of the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty corpus")]
    EmptyCorpus,
    #[error("malformed JSON at line {line}: {message}")]
    MalformedLine { line: usize, message: String },
    #[error("missing or empty field `{field}` at line {line}")]
    MissingField { line: usize, field: &'static str },
    #[error("duplicate id `{id}` at line {line}")]
    DuplicateId { line: usize, id: String },

    #[error("empty matrix")]
    EmptyMatrix,
    #[error("bad magic")]
    BadMagic,
    #[error("unsupported version {0}")]
    UnsupportedVersion(u32),
    #[error("unsupported dtype {0}")]
    UnsupportedDtype(u32),
    #[error("truncated: expected {expected} bytes, found {found}")]
    Truncated { expected: u64, found: u64 },
    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },
    #[error("row count mismatch: corpus has {corpus} samples, embeddings have {matrix} rows")]
    RowCountMismatch { corpus: usize, matrix: usize },
    #[error("alignment hash mismatch: corpus {corpus:#018x}, embeddings {matrix:#018x}")]
    AlignmentMismatch { corpus: u64, matrix: u64 },
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("single-language corpus")]
    SingleLanguage,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("target size {requested} exceeds pool size {available}")]
    TargetExceedsPool { requested: usize, available: usize },
    #[error("missing id in score file: {0}")]
    MissingScore(String),
    #[error("non-finite score for id {0}")]
    NonFiniteScore(String),
    #[error("unknown id: {0}")]
    UnknownId(String),
    #[error("subset smaller than 2")]
    SubsetTooSmall,
    #[error("zero-norm row: {0}")]
    ZeroNorm(String),

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl ToString) -> Self {
        Error::Format {
            path: path.into(),
            message: message.to_string(),
        }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
