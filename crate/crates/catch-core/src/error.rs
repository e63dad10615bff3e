//! Crate-wide error type with process exit-code mapping.

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("config error: {0}")]
    Config(String),

    #[error("{path}:{line}: parse error: {message}")]
    Parse {
        path: String,
        line: usize,
        message: String,
    },

    #[error("invariant violation: {0}")]
    Invariant(String),

    #[error("missing embedding for key `{0}`")]
    MissingEmbedding(String),

    #[error("dimension mismatch in {context}: expected {expected}, found {found}")]
    DimensionMismatch {
        expected: usize,
        found: usize,
        context: String,
    },

    #[error("zero-norm vector: {0}")]
    ZeroNorm(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("coverage gap, {} utterance(s) missing embeddings: {}", .0.len(), .0.join(", "))]
    Coverage(Vec<String>),

    #[error("client error: {0}")]
    Client(String),

    #[error("io error on `{path}`: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },

    #[error("internal error: {0}")]
    Internal(String),

    #[error("[{stage}] {source}")]
    Staged {
        stage: String,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Tag an error with the pipeline stage it came from.
    pub fn with_stage(self, stage: &str) -> Self {
        Error::Staged {
            stage: stage.to_string(),
            source: Box::new(self),
        }
    }

    /// Process exit code: 1 config, 2 data, 3 client, 4 internal.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) | Error::InvalidParameter(_) | Error::Io { .. } => 1,
            Error::Parse { .. }
            | Error::Invariant(_)
            | Error::MissingEmbedding(_)
            | Error::DimensionMismatch { .. }
            | Error::ZeroNorm(_)
            | Error::Coverage(_) => 2,
            Error::Client(_) => 3,
            Error::Internal(_) => 4,
            Error::Staged { source, .. } => source.exit_code(),
        }
    }
}
