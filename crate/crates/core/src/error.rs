use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid bounding box: {0}")]
    InvalidBox(String),

    #[error("invalid embedding: {0}")]
    InvalidEmbedding(String),

    #[error("invalid quality attributes: {0}")]
    InvalidQuality(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("degenerate template: the mean of the input embeddings has zero norm")]
    DegenerateTemplate,

    #[error("lifecycle violation: {0}")]
    Lifecycle(String),

    #[error("invalid scene script: {0}")]
    InvalidScript(String),

    #[error("insufficient data: {0}")]
    Insufficient(String),

    #[error("evaluation error: {0}")]
    Evaluation(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
