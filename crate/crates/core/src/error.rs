use thiserror::Error;

#[derive(Debug, Error)]
pub enum EbeError {
    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("value out of range: {0}")]
    OutOfRange(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("episode already terminated; reset before stepping")]
    EpisodeOver,

    #[error("not enough samples: have {have}, need {need}")]
    InsufficientSamples { have: usize, need: usize },

    #[error("invalid model file: {0}")]
    ModelFormat(String),

    #[error("invalid config:\n{0}")]
    Config(String),

    #[error("malformed csv: {0}")]
    Csv(String),

    #[error("unknown metric `{0}`")]
    UnknownMetric(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = EbeError> = std::result::Result<T, E>;
