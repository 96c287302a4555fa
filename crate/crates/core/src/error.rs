use std::path::PathBuf;

use thiserror::Error;

/// Errors produced anywhere in the recommendation pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("bad magic: expected {expected:?}, found {found:?}")]
    BadMagic { expected: [u8; 4], found: [u8; 4] },

    #[error("unsupported format version {found} (expected {expected})")]
    VersionMismatch { expected: u32, found: u32 },

    #[error("truncated payload: expected {expected} bytes, found {found}")]
    TruncatedPayload { expected: usize, found: usize },

    #[error("non-finite value at index {index}")]
    NonFinite { index: usize },

    #[error("invariant violated: {0}")]
    Invariant(String),

    #[error("malformed document: {0}")]
    Malformed(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("clip id mismatch: expected {expected}, found {found}")]
    ClipMismatch { expected: String, found: String },

    #[error("boundary out of range: {0}")]
    BoundaryRange(String),

    #[error("boundary times are not ascending at position {0}")]
    NotAscending(usize),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("degenerate embedding (pre-normalization norm {norm:e})")]
    DegenerateEmbedding { norm: f64 },

    #[error("segmenter mismatch: checkpoint was trained with {trained}, requested {requested}")]
    SegmenterMismatch { trained: String, requested: String },

    #[error("catalog too small: need {needed}, have {available}")]
    CatalogTooSmall { needed: usize, available: usize },

    #[error("empty embedding sequence")]
    EmptySequence,

    #[error("target {0} is not in the ranked list")]
    MissingTarget(String),

    #[error("non-finite loss at epoch {epoch}, batch {batch}: {detail}")]
    NonFiniteLoss { epoch: usize, batch: usize, detail: String },

    #[error("invalid configuration: {0}")]
    Config(String),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invariant(msg: impl Into<String>) -> Self {
        Error::Invariant(msg.into())
    }
}
