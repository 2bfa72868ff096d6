use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("source index {index} out of range for {n} sources")]
    SourceOutOfRange { index: usize, n: usize },

    #[error("hypothesis index {index} out of range for {m} hypotheses")]
    HypothesisOutOfRange { index: usize, m: usize },

    #[error("observation {observation} out of range for source {source_index}")]
    ObservationOutOfRange {
        source_index: usize,
        observation: usize,
    },

    #[error("operation requires likelihood-backed sources")]
    WrongBacking,

    #[error("infeasible problem: constraints cannot be met for hypotheses {hypotheses:?}")]
    Infeasible { hypotheses: Vec<usize> },

    #[error("{n} sources exceed the exhaustive-enumeration limit of {limit}")]
    TooLarge { n: usize, limit: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
