use thiserror::Error;

/// Errors raised by model construction, inference, and the samplers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid model: {0}")]
    InvalidModel(String),

    #[error("state has length {found}, model has {expected} nodes")]
    LengthMismatch { expected: usize, found: usize },

    #[error("state entry {index} is {value}, expected 0 or 1")]
    NonBinary { index: usize, value: u8 },

    #[error("parameter vector has {found} values, layout needs {expected}")]
    LayoutMismatch { expected: usize, found: usize },

    #[error("data contains hidden entries; route it through the hidden-variable API")]
    HiddenEntries,

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("expectation {value} for {what} lies outside [0, 1]")]
    ExpectationOutOfRange { what: String, value: f64 },

    #[error("{k} nodes exceeds the enumeration cap of {cap}")]
    EnumerationCap { k: usize, cap: usize },

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("inconsistent beliefs: {0}")]
    InconsistentBeliefs(String),

    #[error("negative coupling {weight} on ({i}, {j}); Swendsen-Wang needs couplings >= 0")]
    NegativeCoupling { i: usize, j: usize, weight: f64 },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
