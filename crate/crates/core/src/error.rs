use thiserror::Error;

/// Errors raised by the numerical and categorical operations.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum MirrorError {
    #[error("Im(tau) must be positive (got {0})")]
    NonConvergent(f64),
    #[error("truncation window {needed} exceeds the cap of {cap} terms")]
    TruncationCapExceeded { needed: u64, cap: u64 },
    #[error("derivative order {order} exceeds the supported maximum {max}")]
    DerivativeOrder { order: u32, max: u32 },
    #[error("matrix is not nilpotent: N^{0} != 0")]
    NotNilpotent(usize),
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("objects live over different modular parameters")]
    MixedModularParam,
    #[error("morphisms do not form a composable chain: {0}")]
    ChainMismatch(String),
    #[error("lines are parallel")]
    ParallelLines,
    #[error("invalid input: {0}")]
    Invalid(String),
}

pub type Result<T> = std::result::Result<T, MirrorError>;
