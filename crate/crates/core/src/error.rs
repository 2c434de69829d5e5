use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, PcgError>;

#[derive(Debug, Error)]
pub enum PcgError {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("wav {path}: {message}")]
    Wav { path: PathBuf, message: String },

    #[error("duplicate id `{0}`")]
    DuplicateId(String),

    #[error("dimension mismatch: expected {expected}, got {actual} (id `{id}`)")]
    DimensionMismatch {
        id: String,
        expected: usize,
        actual: usize,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("input too short: {what} needs at least {required} samples, got {actual}")]
    InputTooShort {
        what: &'static str,
        required: usize,
        actual: usize,
    },

    #[error("no label for id `{0}`")]
    MissingLabel(String),

    #[error("not enough training points: k = {k}, have {available}")]
    NotEnoughPoints { k: usize, available: usize },

    #[error("AUROC undefined: scores contain a single class")]
    SingleClass,

    #[error("length mismatch: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("{0}")]
    Other(String),
}

impl PcgError {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        PcgError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        PcgError::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }

    /// Errors caused by bad user input (files, flags, configuration) as
    /// opposed to failures while running a stage.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            PcgError::Parse { .. }
                | PcgError::DuplicateId(_)
                | PcgError::DimensionMismatch { .. }
                | PcgError::InvalidConfig(_)
                | PcgError::MissingLabel(_)
                | PcgError::Wav { .. }
        )
    }
}
