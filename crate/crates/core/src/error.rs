use thiserror::Error;

/// Errors produced by the simulation and analysis routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("qubit count mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("{what} of {got} exceeds the cap of {cap}")]
    CapExceeded {
        what: &'static str,
        got: usize,
        cap: usize,
    },

    #[error("index {index} out of range (size {size})")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("time {t} outside [0, {total}]")]
    TimeOutOfRange { t: f64, total: f64 },

    #[error("unsupported antiderivative order {0} (expected 1, 2 or 3)")]
    UnsupportedOrder(usize),

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("propagator lost unitarity: max |U^dag U - I| = {0:.3e}")]
    NonUnitary(f64),

    #[error("non-finite value encountered: {0}")]
    NonFinite(String),

    #[error("symbol {0} cannot be resolved against the ansatz")]
    UnresolvedSymbol(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error("{0}")]
    Unreachable(String),
}

pub type Result<T> = std::result::Result<T, Error>;
