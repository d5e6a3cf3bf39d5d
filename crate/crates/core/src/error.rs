use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("degenerate training data: {0}")]
    DegenerateData(String),

    #[error("unknown corridor {id} (world has {count})")]
    UnknownCorridor { id: usize, count: usize },

    #[error("voxel map has no calibrated likelihoods")]
    Uncalibrated,

    #[error("malformed raster {path}: {reason}")]
    Raster { path: PathBuf, reason: String },

    #[error("malformed file {path}: {reason}")]
    Parse { path: PathBuf, reason: String },

    #[error("missing input {0}")]
    MissingInput(PathBuf),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidInput(msg.into())
    }

    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub(crate) fn degenerate(msg: impl Into<String>) -> Self {
        Error::DegenerateData(msg.into())
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Parse { path: path.into(), reason: reason.into() }
    }

    /// Process exit code used by the command-line driver. Each error family
    /// gets its own code so scripts can tell them apart.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::InvalidInput(_) => 2,
            Error::Config(_) => 3,
            Error::DegenerateData(_) => 4,
            Error::UnknownCorridor { .. } => 5,
            Error::Uncalibrated => 6,
            Error::Raster { .. } => 7,
            Error::Parse { .. } => 8,
            Error::MissingInput(_) => 9,
            Error::Shape(_) => 10,
            Error::Io(_) => 11,
        }
    }
}
