use thiserror::Error;

/// Errors raised by chain construction, propagation, optimization and compilation.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid chain spec: {0}")]
    InvalidSpec(String),

    #[error("representation mismatch: {0}")]
    Representation(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid pulse: {0}")]
    InvalidPulse(String),

    #[error("channel mismatch: {0}")]
    ChannelMismatch(String),

    #[error("invalid site or qubit index: {0}")]
    InvalidIndex(String),

    #[error("matrix is not unitary (defect {0:.3e})")]
    NotUnitary(f64),

    #[error("Lie closure did not terminate within {cap} elements")]
    ClosureCap { cap: usize },

    #[error("zero element has no membership residual")]
    ZeroElement,

    #[error("chain of {0} sites exceeds the dense simulation limit")]
    TooLarge(usize),

    #[error("pulse library has no entry for {0} and synthesis is disabled")]
    MissingPulse(String),

    #[error("invalid circuit: {0}")]
    InvalidCircuit(String),

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
