use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{source_name}:{line}: {message}")]
    Malformed {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("duplicate question id `{0}`")]
    DuplicateId(String),

    #[error("vector dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("question `{id}` has {expected} tokens but {found} contextual vectors")]
    Misaligned {
        id: String,
        expected: usize,
        found: usize,
    },

    #[error("unknown question id `{0}`")]
    UnknownQuestion(String),

    #[error("question `{0}` has no tokens")]
    EmptyQuestion(String),

    #[error("feedback set is empty")]
    EmptyFeedback,

    #[error("corpus has no answer text; disable the translation language model (trlm)")]
    MissingAnswers,

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("vocabulary too small: need at least {minimum} terms, got {got}")]
    VocabTooSmall { minimum: usize, got: usize },

    #[error("insufficient data: {0}")]
    Insufficient(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(source_name: impl Into<String>, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            source_name: source_name.into(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by the caller's configuration rather than by input data.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_) | Error::MissingAnswers | Error::VocabTooSmall { .. })
    }
}
