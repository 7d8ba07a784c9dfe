use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("invalid time grid: {0}")]
    InvalidGrid(String),

    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("operation requires {expected} boundary conditions")]
    WrongBoundary { expected: &'static str },

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("domain error: {0}")]
    Domain(String),

    #[error("atomic measure has {atoms} atoms after coalescing, cap is {cap}")]
    AtomCap { atoms: usize, cap: usize },

    #[error("boundary leak {ratio:.3e} exceeds {threshold:.3e} at step {step}")]
    BoundaryLeak {
        step: usize,
        ratio: f64,
        threshold: f64,
    },

    /// A property that holds by construction failed numerically.
    #[error("internal invariant violated: {0}")]
    Invariant(String),

    #[error("parse error: {0}")]
    Parse(String),
}

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected == actual {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, actual })
    }
}
