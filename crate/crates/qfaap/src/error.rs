use std::path::PathBuf;

/// Crate-wide error type.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("grasp label {index} lies outside the {height}x{width} canvas")]
    LabelOutsideCanvas {
        index: usize,
        height: usize,
        width: usize,
    },

    #[error("no grasp candidate: every pixel is excluded")]
    NoCandidate,

    #[error("hand mask is empty")]
    EmptyMask,

    #[error("non-finite value encountered in {0}")]
    NonFinite(String),

    #[error("invalid depth at grasp pixel ({row},{col}): no valid neighborhood fallback")]
    InvalidDepth { row: usize, col: usize },

    #[error("rigid transform rejected: {0}")]
    NonRigidTransform(String),

    #[error("dataset error: {0}")]
    Dataset(String),

    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("png error: {0}")]
    Png(String),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
