use thiserror::Error;

/// Errors raised while building spaces and kernels or running experiments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("branching factor must be at least 2, got {0}")]
    Branching(usize),
    #[error("depth must be at least 1")]
    Depth,
    #[error("tree with {0} leaves exceeds the supported size")]
    TooLarge(u128),
    #[error("delta must lie in (0, 1), got {0}")]
    Delta(f64),
    #[error("leaf weights must be finite and strictly positive")]
    Weights,
    #[error("expected {expected} leaf weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("dimension must be finite and positive, got {0}")]
    Dimension(f64),
    #[error("exponent p must satisfy 1 < p < inf, got {0}")]
    Exponent(f64),
    #[error("riesz parameter s = {s} outside [1/p', 1) = [{lower}, 1)")]
    RieszRange { s: f64, lower: f64 },
    #[error("riesz kernel with Q*s = {0} is not integrable on this space")]
    NotIntegrable(f64),
    #[error("kernel level table has {got} entries, expected {expected}")]
    LevelCount { expected: usize, got: usize },
    #[error("kernel values must be finite and nonnegative")]
    KernelValues,
    #[error("riesz kernel is singular on the diagonal")]
    Diagonal,
    #[error("lambda map is only defined for interval and cantor models")]
    LambdaOnTree,
    #[error("leaf index {0} out of range")]
    Leaf(usize),
    #[error("input has length {got}, expected {expected}")]
    Length { expected: usize, got: usize },
    #[error("distance to the complement of the whole space is undefined")]
    WholeSpace,
    #[error("invalid parameter: {0}")]
    Invalid(&'static str),
}

pub type Result<T> = core::result::Result<T, Error>;
