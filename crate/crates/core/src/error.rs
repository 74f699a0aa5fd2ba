use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("malformed {what}: {message}")]
    Format { what: String, message: String },

    #[error("cannot build an index over an empty corpus")]
    EmptyIndex,

    #[error("duplicate id: {0}")]
    DuplicateId(String),

    #[error("unknown chunk id: {0}")]
    UnknownChunk(String),

    #[error("unknown article id: {0}")]
    UnknownArticle(String),

    #[error("the corpus already contains a negative sentinel chunk")]
    SentinelAlreadyPresent,

    #[error("vector dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("zero vector has no direction")]
    ZeroVector,

    #[error("embedding failed for chunk {chunk_id}: {source}")]
    Embedding {
        chunk_id: String,
        #[source]
        source: ProviderError,
    },

    #[error(transparent)]
    Provider(#[from] ProviderError),

    #[error("metric requires at least one evaluation record")]
    EmptyRecords,
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(what: impl Into<String>, message: impl std::fmt::Display) -> Self {
        Error::Format {
            what: what.into(),
            message: message.to_string(),
        }
    }

    /// True when the failure came from a remote model provider.
    pub fn is_provider_failure(&self) -> bool {
        matches!(self, Error::Provider(_) | Error::Embedding { .. })
    }
}

/// Failure reported by an embedding or LLM backend.
#[derive(Debug, Clone, Error)]
pub enum ProviderError {
    #[error("provider timed out: {0}")]
    Timeout(String),

    #[error("provider unreachable: {0}")]
    Unavailable(String),

    #[error("provider returned an unusable response: {0}")]
    BadResponse(String),
}

impl ProviderError {
    /// Transport-level failures may succeed on a later attempt.
    pub fn is_retriable(&self) -> bool {
        matches!(self, ProviderError::Timeout(_) | ProviderError::Unavailable(_))
    }
}
