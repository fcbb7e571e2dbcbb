use std::path::PathBuf;

/// Errors produced by the library.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("invalid coordinate: {0}")]
    InvalidCoordinate(String),
    #[error("invalid vector: norm {norm} is not 1")]
    InvalidVector { norm: f64 },
    #[error("invalid dimensions: {0}")]
    InvalidDimensions(String),
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: String, actual: String },
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("class id {id} out of range for {num_classes} classes")]
    ClassOutOfRange { id: u8, num_classes: usize },
    #[error("invalid probabilities: {0}")]
    InvalidProbabilities(String),
    #[error("metric undefined: {0}")]
    UndefinedMetric(String),
    #[error("empty input: {0}")]
    Empty(String),
    #[error("duplicate sample id `{0}` in manifest")]
    DuplicateSampleId(String),
    #[error("unsupported format in {path}: {reason}")]
    UnsupportedFormat { path: PathBuf, reason: String },
    #[error("malformed data in {path}: {reason}")]
    Malformed { path: PathBuf, reason: String },
    #[error("predictor failed: {0}")]
    Predictor(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn malformed(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Malformed {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
