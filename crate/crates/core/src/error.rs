use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("non-positive disparity has no depth (d = {0})")]
    NonPositiveDisparity(f64),

    #[error("non-positive depth has no disparity (z = {0})")]
    NonPositiveDepth(f64),

    #[error("invalid camera: {0}")]
    InvalidCamera(String),

    #[error("invalid rig: {0}")]
    InvalidRig(String),

    #[error("calibration line {line}: {message}")]
    Calibration { line: usize, message: String },

    #[error("image is {width}x{height}, descriptors need at least {min}x{min}")]
    ImageTooSmall { width: usize, height: usize, min: usize },

    #[error("degenerate support set: {0}")]
    DegenerateSupport(String),

    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("invalid scene: {constraint}")]
    InvalidScene { constraint: String },

    #[error("{what}: expected {expected}, found {found}")]
    SizeMismatch {
        what: String,
        expected: String,
        found: String,
    },

    #[error("missing artifact: {0}")]
    MissingArtifact(PathBuf),

    #[error("{path}: {message}")]
    Parse { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: {source}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn scene(constraint: impl Into<String>) -> Self {
        Error::InvalidScene {
            constraint: constraint.into(),
        }
    }
}
