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

    #[error(transparent)]
    RawIo(#[from] std::io::Error),

    #[error("{path}:{line}: malformed document line: {message}")]
    MalformedLine {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("shard language mismatch: document {id} has lang {found:?}, shard is {expected}")]
    LangMismatch {
        id: String,
        expected: String,
        found: Option<String>,
    },

    #[error("invalid document: {0}")]
    InvalidDocument(String),

    #[error("no text to identify")]
    NoText,

    #[error("scorer error: {0}")]
    Scorer(String),

    #[error("missing score key {0:?}")]
    MissingScore(String),

    #[error("image decode error: {0}")]
    ImageDecode(String),

    #[error("non-finite value in embedding row {0}")]
    NonFinite(usize),

    #[error("zero-norm embedding in row {0}")]
    ZeroVector(usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("config error: {0}")]
    Config(String),

    #[error("stage {stage} failed: {message}")]
    Stage { stage: String, message: String },

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
