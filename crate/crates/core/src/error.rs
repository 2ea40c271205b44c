use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
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

    #[error("duplicate id {0:?}")]
    DuplicateId(String),

    #[error("infeasible: {0}")]
    Infeasible(String),

    #[error("unknown concept id {0:?}")]
    UnknownConcept(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("template error: {0}")]
    Template(String),

    #[error("transport failure after {attempts} attempt(s): {message}")]
    Transport { attempts: usize, message: String },

    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),

    #[error("backend returned status {status}: {body}")]
    BackendStatus { status: u16, body: String },

    #[error("embedding failed for {text:?}: {message}")]
    Embedding { text: String, message: String },

    #[error("index snapshot: {0}")]
    Snapshot(String),

    #[error("missing cache entry: {0}")]
    MissingCache(String),

    #[error("no gold entry for document {0:?}")]
    MissingGold(String),

    #[error("selector not found: {0}")]
    SelectorNotFound(String),

    #[error("invalid config at {path}: {message}")]
    Config { path: String, message: String },

    #[error("missing prerequisite stage {stage:?}: {detail}")]
    MissingPrerequisite { stage: String, detail: String },

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
}
