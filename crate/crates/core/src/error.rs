use thiserror::Error;

/// Errors raised while building scenarios, parsing configuration or running experiments.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("missing required configuration key `{0}`")]
    MissingKey(String),

    #[error("value out of range for `{key}`: {reason}")]
    OutOfRange { key: String, reason: String },

    #[error("training exceeds cycle: pilots need {training_s:.3e} s of a {cycle_s:.3e} s cycle")]
    TrainingExceedsCycle { training_s: f64, cycle_s: f64 },

    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },

    #[error("empty input: {0}")]
    Empty(&'static str),

    #[error("unknown mode `{0}`")]
    UnknownMode(String),

    #[error("unknown preset `{0}`")]
    UnknownPreset(String),

    #[error("io error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
