use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("empty network")]
    EmptyNetwork,

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("unknown node `{0}`")]
    UnknownNode(String),

    #[error("unknown node id {0}")]
    UnknownNodeId(usize),

    #[error("node `{node}` labelled both `{first}` and `{second}`")]
    ConflictingLabel {
        node: String,
        first: String,
        second: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("numerical failure at iteration {iteration}{}: {message}", .interaction.map(|i| format!(", interaction {i}")).unwrap_or_default())]
    Numerical {
        iteration: usize,
        interaction: Option<usize>,
        message: String,
    },

    #[error("internal consistency: {0}")]
    Internal(String),

    #[error("no predictions to score")]
    EmptyPredictions,

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::Numerical { .. })
    }
}

pub type Result<T> = std::result::Result<T, Error>;
