//! Crate-wide error type.

use thiserror::Error;

/// Errors raised by the sampling, resampling, and adaptation routines.
#[derive(Debug, Error)]
pub enum Error {
    /// Requested Sobol' dimension is beyond the embedded direction-number table.
    #[error("dimension {dim} exceeds the {max}-dimension Sobol' direction-number table")]
    UnsupportedDimension { dim: usize, max: usize },

    /// Quantile argument outside the open unit interval.
    #[error("normal quantile requires u in (0, 1), got {value}")]
    QuantileDomain { value: f64 },

    /// A covariance matrix failed the Cholesky factorization.
    #[error("covariance is not symmetric positive definite")]
    NotPositiveDefinite,

    /// Pairwise distance matrix would exceed the configured memory cap.
    #[error("distance matrix for {m} points needs {needed} bytes, cap is {cap}")]
    DistanceCapacity { m: usize, needed: u64, cap: u64 },

    /// Exact star discrepancy is only computed for small point sets.
    #[error("star discrepancy limited to n <= {max_n}, p <= {max_p}; got n = {n}, p = {p}")]
    DiscrepancyCapacity {
        n: usize,
        p: usize,
        max_n: usize,
        max_p: usize,
    },

    /// Every log-weight is -inf: the proposals and the target do not overlap.
    #[error("all log-weights are -inf; total proposal/target mismatch")]
    DegenerateWeights,

    /// Degenerate weights encountered inside an iteration loop.
    #[error("degenerate weights at iteration {iteration}")]
    DegenerateAtIteration { iteration: usize },

    /// Mixture specification violates an invariant.
    #[error("invalid mixture spec: {0}")]
    InvalidMixture(String),

    /// Covariance adaptation produced an unusable matrix.
    #[error("covariance adaptation failed: {0}")]
    AdaptationFailed(String),

    /// A numeric routine produced a non-finite value.
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    /// Run configuration violates an invariant.
    #[error("invalid run configuration: {0}")]
    InvalidConfig(String),

    /// Inputs have incompatible shapes.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
