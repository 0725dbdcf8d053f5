use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Errors produced anywhere in the pipeline.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("manifest {path}: {message}")]
    Manifest { path: PathBuf, message: String },

    #[error("degenerate MOS range: min {min} equals max {max}")]
    DegenerateRange { min: f64, max: f64 },

    #[error("decode {path}: {message}")]
    Decode { path: PathBuf, message: String },

    #[error("invalid frame: {0}")]
    InvalidFrame(String),

    #[error("index out of range: {0}")]
    InvalidIndex(String),

    #[error("invalid prompt set: {0}")]
    Prompt(String),

    #[error("encoder error: {0}")]
    Encoder(String),

    /// A caller handed an adapter input that breaks its interface contract.
    #[error("contract violation: {0}")]
    Contract(String),

    #[error("shape mismatch: {0}")]
    Shape(String),

    #[error("stale cache for `{video_id}`: {reason}")]
    StaleCache { video_id: String, reason: String },

    #[error("cache {path}: {message}")]
    Cache { path: PathBuf, message: String },

    #[error("aggregation error: |sum of HVS weights| = {0:e} is not above 1e-6")]
    Aggregation(f64),

    #[error("loss error: {0}")]
    Loss(String),

    #[error("training error: {0}")]
    Training(String),

    #[error("undefined correlation: {0}")]
    UndefinedCorrelation(String),

    #[error("polynomial fit error: {0}")]
    Fit(String),

    #[error("config error: {0}")]
    Config(String),

    #[error("checkpoint {path}: {message}")]
    Checkpoint { path: PathBuf, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

impl Error {
    pub(crate) fn manifest(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Manifest {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn decode(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Decode {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn cache(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Cache {
            path: path.into(),
            message: message.into(),
        }
    }

    pub(crate) fn checkpoint(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Checkpoint {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for problems with the input data rather than with the program or
    /// environment. The CLI maps these onto exit code 2.
    pub fn is_data_error(&self) -> bool {
        matches!(
            self,
            Error::Manifest { .. }
                | Error::DegenerateRange { .. }
                | Error::Decode { .. }
                | Error::InvalidFrame(_)
                | Error::StaleCache { .. }
                | Error::Cache { .. }
                | Error::UndefinedCorrelation(_)
        )
    }
}
