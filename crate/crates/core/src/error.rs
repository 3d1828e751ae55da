use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid volume: {0}")]
    InvalidVolume(String),
    #[error("grid mismatch: {0}")]
    GridMismatch(String),
    #[error("invalid orientation: {0}")]
    InvalidOrientation(String),
    #[error("trilinear interpolation is not defined for label volumes")]
    InterpolationOnLabels,
    #[error("empty input: {0}")]
    EmptyInput(&'static str),
    #[error("nifti: {0}")]
    Nifti(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("instance id {0} is outside every known id range")]
    InvalidInstanceId(u32),
    #[error("invalid label: {0}")]
    InvalidLabel(String),
    #[error("invalid spec: {0}")]
    InvalidSpec(String),
    #[error("predictor failed: {0}")]
    Predictor(String),
    #[error("undefined metric: {0}")]
    Undefined(String),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
