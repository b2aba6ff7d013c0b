use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("insufficient data: need at least {needed} drops, got {got}")]
    InsufficientData { needed: usize, got: usize },

    #[error("value {value} outside the unit interval")]
    Domain { value: f64 },

    #[error("standard cloud has zero entropy and the drop differs from its expectation")]
    ZeroEntropy,

    #[error("evidence window holds no transmissions")]
    NoEvidence,

    #[error("no individual trust cloud for the target yet")]
    InsufficientEvidence,

    #[error("device {device} has no eligible router/destination pair within its neighbourhood")]
    NoNeighbor { device: usize },

    #[error("training already reached the round limit of {max_rounds}")]
    TrainingExhausted { max_rounds: usize },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("metric undefined: {0}")]
    UndefinedMetric(&'static str),

    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
