use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// Image or text-box geometry that the renderer cannot work with.
    #[error("invalid geometry: {0}")]
    InvalidGeometry(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    /// A bad configuration value, detected before any expensive work starts.
    #[error("configuration error: {0}")]
    Config(String),

    #[error("failed to decode image {path}: {source}")]
    Decode {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },

    #[error("sum fusion of antipodal embeddings is undefined (norm of sum {norm:e})")]
    DegenerateFusion { norm: f64 },

    #[error("index build failed for id {id}: {reason}")]
    Build { id: u64, reason: String },

    #[error("store format error at byte offset {offset}: {reason}")]
    Format { offset: u64, reason: String },

    #[error("encoder unavailable after {attempts} attempts: {message}")]
    Unavailable { attempts: u32, message: String },

    #[error("encoder protocol error: {0}")]
    Protocol(String),

    /// The server rejected the request (HTTP 4xx).
    #[error("request rejected with status {status}: {message}")]
    Caller { status: u16, message: String },

    #[error("manifest {path}:{line}: {reason}")]
    Manifest {
        path: PathBuf,
        line: usize,
        reason: String,
    },

    #[error("listing {id}: {source}")]
    Listing {
        id: u64,
        #[source]
        source: Box<Error>,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn for_listing(self, id: u64) -> Self {
        match self {
            e @ Error::Listing { .. } => e,
            other => Error::Listing {
                id,
                source: Box::new(other),
            },
        }
    }

    /// True for errors caused by the caller's configuration rather than by
    /// runtime conditions. The CLI maps these to a usage exit code.
    pub fn is_config(&self) -> bool {
        match self {
            Error::Config(_) => true,
            Error::Listing { source, .. } => source.is_config(),
            _ => false,
        }
    }
}
