use thiserror::Error;

/// Errors produced by the numerical kernels.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("estimated work {estimated:.3e} exceeds the budget ceiling {ceiling:.3e}")]
    BudgetExceeded { estimated: f64, ceiling: f64 },

    #[error("{0} is not a sum of two squares")]
    NotSumOfTwoSquares(u64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("grid spacing {spacing} is coarser than {limit} (one tenth of the wavelength)")]
    SpacingTooCoarse { spacing: f64, limit: f64 },

    #[error("region is not covered by the sampled grid: {0}")]
    RegionNotCovered(String),

    #[error("arc {0} carries zero spectral mass")]
    ZeroMassArc(usize),

    #[error("parse error: {0}")]
    Parse(String),
}

pub type Result<T> = std::result::Result<T, Error>;
