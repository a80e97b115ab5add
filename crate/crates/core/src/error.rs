use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Every failure the library can report.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid band: {0}")]
    InvalidBand(String),

    #[error("too short: needed {needed} samples, {available} available")]
    TooShort { needed: usize, available: usize },

    #[error("epoch has an empty baseline window")]
    EmptyBaseline,

    #[error("data covariance has numerical rank {rank}, fewer than the {requested} requested components")]
    RankDeficient { rank: usize, requested: usize },

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("band {name} ({low_hz}-{high_hz} Hz) exceeds the Nyquist frequency {nyquist_hz} Hz")]
    BandOutOfRange {
        name: String,
        low_hz: f64,
        high_hz: f64,
        nyquist_hz: f64,
    },

    #[error("training labels contain a single class")]
    SingleClass,

    #[error("pooled covariance is singular; use a positive shrinkage")]
    SingularCovariance,

    #[error("too few samples: {0}")]
    TooFewSamples(String),

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input")]
    Empty,

    #[error("ads without any rating: {0:?}")]
    MissingRatings(Vec<String>),

    #[error("input vector is constant")]
    ConstantInput,

    #[error("invalid p-value {0} (must lie in [0, 1])")]
    InvalidP(f64),

    #[error("invalid generator spec: {0}")]
    InvalidSpec(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{context}: {source}")]
    Json {
        context: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    pub(crate) fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    pub(crate) fn json(context: impl Into<String>, source: serde_json::Error) -> Self {
        Error::Json {
            context: context.into(),
            source,
        }
    }
}
