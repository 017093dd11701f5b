use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {msg}")]
    Parse {
        path: PathBuf,
        line: usize,
        msg: String,
    },

    #[error("knowledge graph is empty: {0}")]
    EmptyGraph(String),

    #[error("unknown entity `{0}`")]
    UnknownEntity(String),

    #[error("unknown relation `{0}`")]
    UnknownRelation(String),

    #[error("relations outside the task frequency band [{min}, {max}]: {relations:?}")]
    FrequencyBand {
        min: usize,
        max: usize,
        relations: Vec<String>,
    },

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("no true tail for head `{head}` under relation `{relation}`")]
    EmptyTruth { head: String, relation: String },

    #[error("synthetic generation failed: {0}")]
    Generation(String),

    #[error("missing embeddings for ids: {0:?}")]
    Vocabulary(Vec<String>),

    #[error("{op}: dimension mismatch ({detail})")]
    Shape { op: &'static str, detail: String },

    #[error("{op}: length mismatch ({left} vs {right})")]
    LengthMismatch {
        op: &'static str,
        left: usize,
        right: usize,
    },

    #[error("{0}: empty input")]
    Empty(&'static str),

    #[error("backward requires a scalar loss, got shape {0:?}")]
    NonScalar(Vec<usize>),

    #[error("non-finite gradient in parameter `{0}`")]
    NonFiniteGradient(String),

    #[error("training diverged at step {step}: loss is not finite")]
    Divergence { step: u64 },

    #[error("task for relation `{0}` has too few training pairs")]
    SkipTask(String),

    #[error("malformed file: {0}")]
    Format(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn shape(op: &'static str, detail: impl Into<String>) -> Self {
        Error::Shape {
            op,
            detail: detail.into(),
        }
    }

    /// Process exit code: 1 usage/config, 2 data, 3 numerical.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::FrequencyBand { .. } => 1,
            Error::Shape { .. }
            | Error::LengthMismatch { .. }
            | Error::NonScalar(_)
            | Error::NonFiniteGradient(_)
            | Error::Divergence { .. } => 3,
            _ => 2,
        }
    }
}
