use std::io;
use std::path::PathBuf;

use thiserror::Error;

use crate::providers::ProviderError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}:{line}: {message}", path.display())]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{}: duplicate id {id:?} on lines {first_line} and {second_line}", path.display())]
    DuplicateId {
        path: PathBuf,
        id: String,
        first_line: usize,
        second_line: usize,
    },

    #[error("schema violation: {0}")]
    Schema(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: io::Error,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("degenerate input for record {id:?}: {reason}")]
    DegenerateInput { id: String, reason: String },

    #[error("unknown record id {0:?}")]
    UnknownId(String),

    #[error("review item {0} is already adjudicated")]
    AlreadyAdjudicated(String),

    #[error("length mismatch: {predictions} predictions for {gold} gold labels")]
    LengthMismatch { predictions: usize, gold: usize },

    #[error(transparent)]
    Provider(#[from] ProviderError),
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
