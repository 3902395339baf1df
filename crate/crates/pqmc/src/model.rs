//! Target distributions and Gaussian proposal components.
//!
//! Targets expose only the log of the unnormalized density; all weight
//! arithmetic downstream stays in log domain, since raw mixture weights
//! underflow double precision already at ten dimensions.

use std::sync::atomic::{AtomicU64, Ordering};

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

const LOG_TWO_PI: f64 = 1.837_877_066_409_345_5;

/// An unnormalized target density `gamma`, with optional analytic facts
/// used by benchmarks. Evaluations are counted so callers can audit their
/// evaluation budget.
pub struct Target {
    dim: usize,
    log_gamma: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
    known_z: Option<f64>,
    true_mean: Option<DVector<f64>>,
    evals: AtomicU64,
}

impl Target {
    pub fn new(
        dim: usize,
        log_gamma: Box<dyn Fn(&DVector<f64>) -> f64 + Send + Sync>,
        known_z: Option<f64>,
        true_mean: Option<DVector<f64>>,
    ) -> Result<Self> {
        if dim == 0 {
            return Err(Error::InvalidConfig("target dimension must be >= 1".into()));
        }
        if let Some(z) = known_z {
            if !(z > 0.0) {
                return Err(Error::InvalidConfig(format!(
                    "known normalizing constant must be positive, got {z}"
                )));
            }
        }
        Ok(Self {
            dim,
            log_gamma,
            known_z,
            true_mean,
            evals: AtomicU64::new(0),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn known_z(&self) -> Option<f64> {
        self.known_z
    }

    pub fn true_mean(&self) -> Option<&DVector<f64>> {
        self.true_mean.as_ref()
    }

    /// log gamma(x); increments the evaluation counter.
    pub fn log_gamma(&self, x: &DVector<f64>) -> f64 {
        self.evals.fetch_add(1, Ordering::Relaxed);
        (self.log_gamma)(x)
    }

    /// log gamma of every row of an `n x p` point matrix.
    pub fn log_gamma_rows(&self, points: &DMatrix<f64>) -> DVector<f64> {
        let mut scratch = DVector::zeros(self.dim);
        DVector::from_fn(points.nrows(), |i, _| {
            for d in 0..self.dim {
                scratch[d] = points[(i, d)];
            }
            self.log_gamma(&scratch)
        })
    }

    /// Total log-gamma evaluations so far.
    pub fn eval_count(&self) -> u64 {
        self.evals.load(Ordering::Relaxed)
    }
}

impl std::fmt::Debug for Target {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Target")
            .field("dim", &self.dim)
            .field("known_z", &self.known_z)
            .field("true_mean", &self.true_mean)
            .finish_non_exhaustive()
    }
}

/// A multivariate normal proposal with its Cholesky factor cached.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianProposal {
    mu: DVector<f64>,
    sigma: DMatrix<f64>,
    chol: DMatrix<f64>,
    log_norm: f64,
}

impl GaussianProposal {
    pub fn new(mu: DVector<f64>, sigma: DMatrix<f64>) -> Result<Self> {
        let p = mu.len();
        if sigma.nrows() != p || sigma.ncols() != p {
            return Err(Error::DimensionMismatch(format!(
                "mu has {} entries, sigma is {}x{}",
                p,
                sigma.nrows(),
                sigma.ncols()
            )));
        }
        let chol = nalgebra::Cholesky::new(sigma.clone())
            .ok_or(Error::NotPositiveDefinite)?
            .l();
        let log_det_half: f64 = (0..p).map(|i| chol[(i, i)].ln()).sum();
        let log_norm = -0.5 * p as f64 * LOG_TWO_PI - log_det_half;
        Ok(Self {
            mu,
            sigma,
            chol,
            log_norm,
        })
    }

    pub fn dim(&self) -> usize {
        self.mu.len()
    }

    pub fn mu(&self) -> &DVector<f64> {
        &self.mu
    }

    pub fn sigma(&self) -> &DMatrix<f64> {
        &self.sigma
    }

    /// Lower-triangular factor with `L L^T = sigma`.
    pub fn chol(&self) -> &DMatrix<f64> {
        &self.chol
    }

    /// log N(x | mu, sigma) via the cached factor.
    pub fn log_density(&self, x: &DVector<f64>) -> f64 {
        let p = self.dim();
        let mut diff: Vec<f64> = (0..p).map(|d| x[d] - self.mu[d]).collect();
        self.log_density_from_diff(&mut diff)
    }

    /// log densities of every row of an `n x p` point matrix.
    pub fn log_densities(&self, points: &DMatrix<f64>) -> DVector<f64> {
        let p = self.dim();
        let mut diff = vec![0.0f64; p];
        DVector::from_fn(points.nrows(), |i, _| {
            for d in 0..p {
                diff[d] = points[(i, d)] - self.mu[d];
            }
            self.log_density_from_diff(&mut diff)
        })
    }

    /// Forward-substitutes `L y = diff` in place and returns the density.
    fn log_density_from_diff(&self, diff: &mut [f64]) -> f64 {
        let p = self.dim();
        let mut quad = 0.0;
        for r in 0..p {
            let mut acc = diff[r];
            for c in 0..r {
                acc -= self.chol[(r, c)] * diff[c];
            }
            let y = acc / self.chol[(r, r)];
            diff[r] = y;
            quad += y * y;
        }
        self.log_norm - 0.5 * quad
    }

    /// Maps rows of standard-normal draws through `x = mu + L z`.
    pub fn transform_standard(&self, z: &DMatrix<f64>) -> DMatrix<f64> {
        let p = self.dim();
        let n = z.nrows();
        let mut out = DMatrix::zeros(n, p);
        for i in 0..n {
            for r in 0..p {
                let mut acc = 0.0;
                for c in 0..=r {
                    acc += self.chol[(r, c)] * z[(i, c)];
                }
                out[(i, r)] = self.mu[r] + acc;
            }
        }
        out
    }
}

/// log N(x | mu, sigma) for a one-off evaluation.
pub fn log_mvn_density(x: &DVector<f64>, mu: &DVector<f64>, sigma: &DMatrix<f64>) -> Result<f64> {
    if x.len() != mu.len() {
        return Err(Error::DimensionMismatch(format!(
            "x has {} entries, mu has {}",
            x.len(),
            mu.len()
        )));
    }
    Ok(GaussianProposal::new(mu.clone(), sigma.clone())?.log_density(x))
}

/// A finite mixture of normals given by weights and (mean, covariance) pairs.
#[derive(Debug, Clone)]
pub struct MixtureSpec {
    pub weights: Vec<f64>,
    pub components: Vec<(DVector<f64>, DMatrix<f64>)>,
}

impl MixtureSpec {
    fn validate(&self) -> Result<()> {
        if self.components.is_empty() {
            return Err(Error::InvalidMixture("component list is empty".into()));
        }
        if self.weights.len() != self.components.len() {
            return Err(Error::InvalidMixture(format!(
                "{} weights for {} components",
                self.weights.len(),
                self.components.len()
            )));
        }
        if self.weights.iter().any(|&w| w < 0.0) {
            return Err(Error::InvalidMixture("negative weight".into()));
        }
        let total: f64 = self.weights.iter().sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidMixture(format!(
                "weights sum to {total}, not 1"
            )));
        }
        Ok(())
    }
}

/// Builds the normalized mixture density as a [`Target`] with `Z = 1` and
/// the analytic mean. Evaluation goes through log-sum-exp, so far tails
/// degrade gracefully instead of flushing to zero.
pub fn make_mixture_target(spec: &MixtureSpec) -> Result<Target> {
    spec.validate()?;
    let dim = spec.components[0].0.len();
    let mut comps = Vec::with_capacity(spec.components.len());
    for (mu, sigma) in &spec.components {
        if mu.len() != dim {
            return Err(Error::InvalidMixture(
                "components have inconsistent dimensions".into(),
            ));
        }
        comps.push(GaussianProposal::new(mu.clone(), sigma.clone())?);
    }
    let log_weights: Vec<f64> = spec.weights.iter().map(|&w| w.ln()).collect();
    let true_mean = spec
        .components
        .iter()
        .zip(&spec.weights)
        .fold(DVector::zeros(dim), |acc, ((mu, _), &w)| acc + mu * w);

    let log_gamma = move |x: &DVector<f64>| -> f64 {
        let mut max = f64::NEG_INFINITY;
        let terms: Vec<f64> = comps
            .iter()
            .zip(&log_weights)
            .map(|(c, &lw)| {
                let t = lw + c.log_density(x);
                if t > max {
                    max = t;
                }
                t
            })
            .collect();
        if max == f64::NEG_INFINITY {
            return f64::NEG_INFINITY;
        }
        max + terms.iter().map(|&t| (t - max).exp()).sum::<f64>().ln()
    };

    Target::new(dim, Box::new(log_gamma), Some(1.0), Some(true_mean))
}

/// Two-dimensional benchmark: an equally weighted mixture of five normals
/// with mean `[0.540, 0.535]` and `Z = 1`.
pub fn five_normal_2d() -> Target {
    let mus = [
        [0.250, 0.250],
        [0.500, 0.900],
        [0.825, 0.700],
        [0.275, 0.675],
        [0.850, 0.150],
    ];
    let covs = [
        [2.0, 0.6, 0.6, 1.0],
        [2.0, -0.4, -0.4, 2.0],
        [2.0, 0.8, 0.8, 2.0],
        [3.0, 0.0, 0.0, 0.5],
        [2.0, -0.1, -0.1, 2.0],
    ];
    let scale = 40.0f64.powi(-2);
    let spec = MixtureSpec {
        weights: vec![0.2; 5],
        components: mus
            .iter()
            .zip(&covs)
            .map(|(mu, cov)| {
                (
                    DVector::from_row_slice(mu),
                    DMatrix::from_row_slice(2, 2, cov) * scale,
                )
            })
            .collect(),
    };
    make_mixture_target(&spec).expect("benchmark spec is valid")
}

/// p-dimensional benchmark: three equally weighted isotropic normals with
/// per-coordinate centers 0.375, 0.575, 0.700 (mean 0.550) and `Z = 1`.
pub fn three_normal_nd(p: usize) -> Target {
    let spec = MixtureSpec {
        weights: vec![1.0 / 3.0; 3],
        components: [0.375, 0.575, 0.700]
            .iter()
            .map(|&c| {
                (
                    DVector::from_element(p, c),
                    DMatrix::identity(p, p) * 0.04,
                )
            })
            .collect(),
    };
    make_mixture_target(&spec).expect("benchmark spec is valid")
}

/// Standard normal target `N(0, I_p)` with known mean and `Z = 1`.
pub fn standard_normal(p: usize) -> Target {
    let spec = MixtureSpec {
        weights: vec![1.0],
        components: vec![(DVector::zeros(p), DMatrix::identity(p, p))],
    };
    make_mixture_target(&spec).expect("benchmark spec is valid")
}
