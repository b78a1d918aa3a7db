use thiserror::Error;

/// Errors raised by every module of the toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("Majorana mode {mode} out of range 1..={n_modes}")]
    ModeOutOfRange { mode: usize, n_modes: usize },

    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid index set: {0}")]
    InvalidIndexSet(String),

    #[error("matrix is not unitary (deviation {0:e})")]
    NotUnitary(f64),

    #[error("matrix is not antisymmetric (deviation {0:e})")]
    NotAntisymmetric(f64),

    #[error("odd matrix dimension {0}")]
    OddDimension(usize),

    #[error("unphysical input: {0}")]
    Unphysical(String),

    #[error("unsupported: {0}")]
    Unsupported(String),

    #[error("budget exceeded: {0}")]
    Budget(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no convergence: {0}")]
    Convergence(String),

    #[error("{n} qubits exceeds the dense cap of {cap}")]
    SizeCap { n: usize, cap: usize },

    #[error("config error: {0}")]
    Config(String),

    #[error("parse error: {0}")]
    Parse(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
