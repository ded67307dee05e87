use thiserror::Error;

/// Errors raised by the numerical and statistical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    /// A Cholesky pivot of a Gram matrix fell below the relative tolerance,
    /// usually because selected columns are collinear.
    #[error("singular Gram matrix: pivot {pivot:e} at column {column} is below the relative tolerance")]
    SingularGram { column: usize, pivot: f64 },

    #[error("index {index} out of range for size {size}")]
    IndexOutOfRange { index: usize, size: usize },

    #[error("duplicate index {0} in index set")]
    DuplicateIndex(usize),

    #[error("dimension mismatch in {what}: expected {expected}, found {found}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        found: usize,
    },

    #[error("non-finite value at row {row}, column {col}")]
    NonFinite { row: usize, col: usize },

    #[error("the number of sign-flip transformations must be at least 1")]
    InvalidB,

    #[error("selecting {requested} variables exceeds the capacity of {capacity}")]
    CapacityExceeded { requested: usize, capacity: usize },

    #[error("coordinate descent did not converge at lambda {lambda:e} within {iterations} sweeps")]
    NoConvergence { lambda: f64, iterations: usize },

    #[error("subset is empty")]
    EmptySubset,

    #[error("subset of size {0} exceeds the brute-force limit of 20")]
    SubsetTooLarge(usize),

    #[error("residual degrees of freedom must be positive, got {0}")]
    NonPositiveDf(i64),

    #[error("rho must lie in [0, 1), got {0}")]
    InvalidRho(f64),

    #[error("the signal X*beta is identically zero")]
    ZeroSignal,

    #[error("invalid combiner weights: {0}")]
    InvalidWeights(&'static str),

    #[error("invalid argument: {0}")]
    InvalidArgument(&'static str),
}

pub type Result<T, E = Error> = core::result::Result<T, E>;
