use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: malformed annotation: {reason}")]
    MalformedLine { line: usize, reason: String },

    #[error("line {line}: annotation text {annotated:?} does not match document text {found:?}")]
    SurfaceMismatch {
        line: usize,
        annotated: String,
        found: String,
    },

    #[error("label sequence is not valid BILOU at position {position}")]
    InvalidSequence { position: usize },

    #[error("line {line}: expected {expected} values, found {found}")]
    DimMismatch {
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("embedding file contains no vectors")]
    EmptyFile,

    #[error("bad magic bytes: expected {expected:?}")]
    BadMagic { expected: &'static str },

    #[error("payload truncated: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("document {doc_id:?} has {tokens} tokens but embeddings have {rows} rows")]
    TokenCountMismatch {
        doc_id: String,
        tokens: usize,
        rows: usize,
    },

    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("empty sequence")]
    EmptySequence,

    #[error("cache does not match this model: {0}")]
    CacheMismatch(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("transition mask admits no path of length {len}")]
    NoValidPath { len: usize },

    #[error("no embeddings for document {0:?}")]
    MissingEmbeddings(String),

    #[error("non-finite loss at epoch {epoch}, document {doc_id:?}")]
    NonFiniteLoss { epoch: usize, doc_id: String },

    #[error("corrupt checkpoint: {0}")]
    CorruptCheckpoint(String),

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("prediction on span ({start}, {end}) which is not a gold span")]
    UnknownSpan { start: usize, end: usize },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error("{path}: {source}")]
    InFile {
        path: PathBuf,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn in_file(self, path: impl Into<PathBuf>) -> Self {
        Error::InFile {
            path: path.into(),
            source: Box::new(self),
        }
    }
}
