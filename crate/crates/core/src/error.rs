use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("sentence {sentence}, position {position}: {message}")]
    InvalidTags {
        sentence: usize,
        position: usize,
        message: String,
    },

    #[error("invalid spans: {0}")]
    InvalidSpans(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("non-finite gradient in tensor `{0}`")]
    NonFinite(String),

    #[error("vocabulary mismatch: {0}")]
    VocabMismatch(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("format error: {0}")]
    Format(String),

    #[error("decoding failed: {0}")]
    Decode(String),

    #[error("unsupported format: {0}")]
    UnsupportedFormat(String),

    #[error("wrong model kind: expected {expected}, found {found}")]
    WrongKind { expected: String, found: String },

    #[error("corrupt archive: {0}")]
    CorruptArchive(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
