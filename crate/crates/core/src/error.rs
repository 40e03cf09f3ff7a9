use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("trajectory {index} became non-finite at step {step} (t = {time})")]
    NonFinite { index: usize, step: u64, time: f64 },

    #[error("not enough data: {0}")]
    InsufficientData(String),

    #[error("sampling too coarse: position moved {jump:.3} between samples (limit {limit:.3})")]
    SamplingTooCoarse { jump: f64, limit: f64 },

    #[error("exponential tail fit refused: {0}")]
    FitRefused(String),

    #[error("no local minimum between the flight-time maxima; supply a cutoff explicitly")]
    NoCutoff,
}

impl Error {
    pub(crate) fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }
}
