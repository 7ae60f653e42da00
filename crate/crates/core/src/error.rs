use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("tuple {index}: arity {arity} is below the minimum of 2")]
    MalformedTuple { index: usize, arity: usize },

    #[error("tuple {index}: {kind} id {id} is out of bounds (vocabulary holds {bound})")]
    OutOfVocabulary {
        index: usize,
        kind: &'static str,
        id: u32,
        bound: usize,
    },

    #[error("unknown entity id {0}")]
    UnknownEntity(u32),

    #[error("unknown relation id {0}")]
    UnknownRelation(u32),

    #[error("conditional entropy is undefined: relation {0} has no entities")]
    UndefinedEntropy(u32),

    #[error("entity {0} has an empty neighborhood")]
    EmptyNeighborhood(u32),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("corpus is empty: no task produced any record")]
    EmptyCorpus,

    #[error("invariant violated: {0}")]
    Invariant(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
