//! Population Quasi-Monte Carlo: adaptive importance sampling built on
//! scrambled Sobol' proposals, importance-support-point resampling, and
//! effective-sample-size-weighted estimators.
//!
//! The crate is organized around the stages of the sampler:
//!
//! - [`lds`]: Sobol' sequences, Owen-style scrambling, normal inverse
//!   transform, and exact star discrepancy for small point sets.
//! - [`model`]: unnormalized targets, Gaussian proposals, and the analytic
//!   mixture benchmarks.
//! - [`weights`]: standard and deterministic-mixture importance weights,
//!   normalization, effective sample size.
//! - [`energy`]: pairwise distances and the energy objective.
//! - [`resample`]: deterministic importance-support-point resampling plus
//!   multinomial and systematic baselines.
//! - [`isp`]: the continuous support-point solver (convex-concave
//!   iteration).
//! - [`adapt`]: lookback and exact-EM covariance adaptation.
//! - [`engine`]: the PMC / PQMC iteration loops.
//! - [`estimators`]: standard and ESS-weighted mean and normalizing
//!   constant estimators.

pub mod adapt;
pub mod energy;
pub mod engine;
pub mod error;
pub mod estimators;
pub mod isp;
pub mod lds;
pub mod model;
pub mod resample;
pub mod weights;

pub use error::{Error, Result};
