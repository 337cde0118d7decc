use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: expected {expected}, got {actual}")]
    ShapeMismatch { expected: String, actual: String },

    #[error("invalid cube: {0}")]
    InvalidCube(String),

    #[error("invalid mask: {0}")]
    InvalidMask(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("malformed file {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("dimension mismatch in {path}: header declares {declared} values, payload holds {found}")]
    DimensionMismatch {
        path: PathBuf,
        declared: usize,
        found: usize,
    },

    #[error("fewer than {needed} candidate patches in search window ({available} available)")]
    TooFewCandidates { needed: usize, available: usize },

    #[error("pixel ({row}, {col}) of frame {frame} is not covered by any patch")]
    Uncovered { frame: usize, row: usize, col: usize },

    #[error("zero-variance spectrum")]
    ZeroVariance,

    #[error("non-finite patch group")]
    Svd,

    #[error("reconstruction diverged at iteration {0}")]
    Diverged(usize),

    #[error("image error: {0}")]
    Image(#[from] image::ImageError),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn shape(expected: impl std::fmt::Display, actual: impl std::fmt::Display) -> Self {
        Error::ShapeMismatch {
            expected: expected.to_string(),
            actual: actual.to_string(),
        }
    }
}
