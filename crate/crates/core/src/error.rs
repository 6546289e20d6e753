use thiserror::Error;

/// Errors returned by the simulator and the analysis drivers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("unsupported register size {0} (supported: {min}..={max} qubits)", min = crate::hilbert::MIN_QUBITS, max = crate::hilbert::MAX_QUBITS)]
    Size(usize),

    #[error("state with {got} qubits where {expected} were expected")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("no collapse overlap: no rescaled point falls inside another size's range")]
    NoCollapseOverlap,

    #[error("state of {0} qubits exceeds the memory budget")]
    Capacity(usize),

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn invalid<T>(msg: impl Into<String>) -> Result<T> {
    Err(Error::Invalid(msg.into()))
}
