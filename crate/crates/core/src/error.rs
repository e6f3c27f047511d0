use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema violation at field `{field}`: {detail}")]
    Schema { field: String, detail: String },

    #[error("object {id} lies outside the map bounds")]
    ObjectOutOfBounds { id: u32 },

    #[error("duplicate object id {0}")]
    DuplicateId(u32),

    #[error("invalid map: {0}")]
    InvalidMap(String),

    #[error("sensor pose ({x}, {y}) lies inside object {id}")]
    PoseInsideObject { id: u32, x: f64, y: f64 },

    #[error("sensor pose ({x}, {y}) lies outside the map bounds")]
    PoseOutOfBounds { x: f64, y: f64 },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("scan mismatch: {0}")]
    ScanMismatch(String),

    #[error("likelihood model returned {value} for particle {index}")]
    InvalidLikelihood { index: usize, value: f64 },

    #[error("particle set is not normalized")]
    NotNormalized,

    #[error("the map has no free space to place particles in")]
    NoFreeSpace,

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("csv output: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
