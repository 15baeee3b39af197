use std::io;
use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("unknown vertex type `{0}`")]
    UnknownType(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("duplicate name `{0}`")]
    DuplicateName(String),

    #[error("{what} index {index} out of range (< {bound})")]
    IndexOutOfRange {
        what: String,
        index: usize,
        bound: usize,
    },

    #[error("graph is not heterogeneous: {types} vertex types + {relations} relations must exceed 2")]
    NotHeterogeneous { types: usize, relations: usize },

    #[error("metapath `{name}` is not type-compatible at step {step}")]
    IncompatibleChain { name: String, step: usize },

    #[error("invalid synthetic spec: {0}")]
    InvalidSynthetic(String),

    #[error("shape mismatch in {op}: {detail}")]
    ShapeMismatch { op: &'static str, detail: String },

    #[error("non-finite value produced by {0}")]
    NonFinite(&'static str),

    #[error("missing model parameter `{0}`")]
    MissingParam(String),

    #[error("vertex type `{0}` has no raw features and cannot be projected")]
    FeaturelessProjection(String),

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("execution order is invalid: {0}")]
    InvalidOrder(String),

    #[error("trace does not match plan: {0}")]
    TraceMismatch(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    File {
        path: PathBuf,
        #[source]
        source: io::Error,
    },

    #[error(transparent)]
    Io(#[from] io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }

    pub(crate) fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::ShapeMismatch {
            op,
            detail: detail.into(),
        }
    }

    pub(crate) fn file(path: impl Into<PathBuf>, source: io::Error) -> Self {
        Error::File {
            path: path.into(),
            source,
        }
    }
}
