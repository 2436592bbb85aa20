use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),
    #[error("distribution is not normalized (sum = {sum})")]
    Normalization { sum: f64 },
    #[error("negative probability {value} for key {key}")]
    NegativeProbability { key: String, value: f64 },
    #[error("missing key: {0}")]
    MissingKey(String),
    #[error("parse error: {0}")]
    Parse(String),
    #[error("unsupported model: {0}")]
    Unsupported(String),
    #[error("infeasible sampler configuration: {0}")]
    Infeasible(String),
    #[error("invalid layer: {0}")]
    InvalidLayer(String),
    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),
    #[error("invalid cycle: {0}")]
    InvalidCycle(String),
    #[error("unknown edge {0}")]
    UnknownEdge(usize),
    #[error("insufficient data: {0}")]
    InsufficientData(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
