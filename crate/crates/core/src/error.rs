use thiserror::Error;

use crate::dlt::DltError;
use crate::eval::EvalError;
use crate::prob_backends::ModelError;
use crate::stimuli::StimuliError;
use crate::storage::{ProfileFailure, StorageError};

/// Broad failure class, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Usage,
    Data,
    Backend,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Model(#[from] ModelError),
    #[error(transparent)]
    Storage(#[from] StorageError),
    #[error(transparent)]
    Dlt(#[from] DltError),
    #[error(transparent)]
    Stimuli(#[from] StimuliError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{0}")]
    Usage(String),
    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },
}

impl From<ProfileFailure> for Error {
    fn from(f: ProfileFailure) -> Self {
        Error::Storage(f.error)
    }
}

fn model_kind(e: &ModelError) -> ErrorKind {
    match e {
        ModelError::Transport(_)
        | ModelError::Protocol(_)
        | ModelError::Server(_)
        | ModelError::ContextLength { .. } => ErrorKind::Backend,
        ModelError::Parameter(_) => ErrorKind::Usage,
        _ => ErrorKind::Data,
    }
}

impl Error {
    pub fn kind(&self) -> ErrorKind {
        match self {
            Error::Model(e) => model_kind(e),
            Error::Storage(StorageError::Model(e)) => model_kind(e),
            Error::Stimuli(StimuliError::UnknownCondition(_)) => ErrorKind::Usage,
            Error::Usage(_) => ErrorKind::Usage,
            _ => ErrorKind::Data,
        }
    }

    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }
}
