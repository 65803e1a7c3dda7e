use std::path::PathBuf;

/// Errors produced by the correction methods, metrics and dataset tooling.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: {left_w}x{left_h} vs {right_w}x{right_h}")]
    DimensionMismatch {
        left_w: usize,
        left_h: usize,
        right_w: usize,
        right_h: usize,
    },
    #[error("image too small: {width}x{height}, need at least {min}x{min}")]
    TooSmall { width: usize, height: usize, min: usize },
    #[error("invalid image: {0}")]
    InvalidImage(String),
    #[error("covariance is near singular (smallest eigenvalue {min_eigenvalue:e})")]
    NearSingularCovariance { min_eigenvalue: f64 },
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("no complete frames found under {0}")]
    EmptyDataset(PathBuf),
    #[error("dataset mixes triplet and pair frames under {0}")]
    MixedLayout(PathBuf),
    #[error("cannot split {scenes} scene(s) into {needed} non-empty part(s)")]
    TooFewScenes { scenes: usize, needed: usize },
    #[error("no frames in the test split")]
    NoTestFrames,
    #[error("benchmark requires a dataset with ground truth (triplet layout)")]
    MissingGroundTruth,
    #[error("config error: {0}")]
    Config(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("image codec error on {path}: {source}")]
    Codec {
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

    /// True for failures raised by a correction method itself, as opposed to
    /// bad input data or I/O.
    pub fn is_method_error(&self) -> bool {
        matches!(self, Error::NearSingularCovariance { .. })
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
