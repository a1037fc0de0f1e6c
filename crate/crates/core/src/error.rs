use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("decomposition failed to converge for input of shape {shape:?}")]
    Numeric { shape: Vec<usize> },

    #[error("matrix is not unitary (max |U†U - I| = {deviation:e})")]
    NonUnitary { deviation: f64 },

    #[error("{n} qubits exceeds the capacity of {max} qubits")]
    Capacity { n: usize, max: usize },

    #[error("index {index} out of range for {what} of size {size}")]
    OutOfRange { what: &'static str, index: usize, size: usize },

    #[error("expected a bitstring of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("invalid grouping: {0}")]
    Grouping(String),

    #[error("invalid argument: {0}")]
    Invalid(String),

    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("config error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
