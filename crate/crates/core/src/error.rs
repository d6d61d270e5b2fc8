use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid model parameters n={n}, k={k}: {rule}")]
    InvalidParams {
        n: usize,
        k: usize,
        rule: &'static str,
    },

    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),

    #[error("vertex index {index} out of range 1..={n}")]
    IndexOutOfRange { index: usize, n: usize },

    #[error("operation requires a labeled configuration")]
    NotLabeled,

    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },

    #[error("state space of {size} states exceeds the cap of {cap}")]
    StateSpaceTooLarge { size: u128, cap: usize },

    #[error("kernel entry out of range at state {state}: {what} = {value}")]
    KernelOutOfRange {
        state: usize,
        what: &'static str,
        value: f64,
    },

    #[error("coupled kernel entry negative at ({i}, {j}): {value}")]
    NegativeCoupledEntry { i: usize, j: usize, value: f64 },

    #[error("ordered start required: x={x} < y={y}")]
    UnorderedStart { x: usize, y: usize },

    #[error("invalid collector spec n={n}, k={k}, residual={residual}")]
    InvalidCollector { n: usize, k: usize, residual: usize },

    #[error("parameter regime violated: {0}")]
    RegimeViolation(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
