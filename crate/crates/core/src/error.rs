use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("I/O error on {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("truncated record at byte offset {offset}: {trailing} trailing bytes do not form a full triple")]
    TruncatedRecord { offset: u64, trailing: usize },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("non-positive count {0}")]
    NonPositiveCount(f64),

    #[error("cell ({word}, {context}) is not observed in the table")]
    UnobservedCell { word: u32, context: u32 },

    #[error("zero marginal for id {id}")]
    ZeroMarginal { id: u32 },

    #[error("id {id} out of range for vocabulary of size {vocab_size}")]
    IdOutOfRange { id: u64, vocab_size: usize },

    #[error("vocabulary size mismatch: {expected} vs {found}")]
    VocabMismatch { expected: usize, found: usize },

    #[error("dimension mismatch: {expected} vs {found}")]
    DimMismatch { expected: usize, found: usize },

    #[error("non-finite value in epoch {epoch} at cell ({word}, {context})")]
    NonFinite { epoch: usize, word: u32, context: u32 },

    #[error("vectors must have equal length: {0} vs {1}")]
    LengthMismatch(usize, usize),

    #[error("correlation needs at least two observations, got {0}")]
    TooFewObservations(usize),

    #[error("correlation undefined: input vector is constant")]
    ConstantVector,

    #[error("empty {0}")]
    Empty(&'static str),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}
