//! Proposal covariance adaptation: the lookback one-step-EM update and the
//! exact EM update with fixed centers.

use log::warn;
use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::GaussianProposal;
use crate::weights::{log_sum_exp, WeightedSample};

/// Covariance adaptation strategy used inside the iteration loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AdaptMode {
    Static,
    Lookback,
    ExactEm,
}

/// Adaptation controls shared by the engine and the standalone updates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdaptConfig {
    pub mode: AdaptMode,
    pub isotropic: bool,
    pub em_max_iters: usize,
    /// Minimum eigenvalue of any adapted covariance.
    pub cov_floor: f64,
}

impl AdaptConfig {
    pub fn with_mode(mode: AdaptMode) -> Self {
        Self {
            mode,
            isotropic: false,
            em_max_iters: 10,
            cov_floor: 1e-8,
        }
    }
}

impl Default for AdaptConfig {
    fn default() -> Self {
        Self::with_mode(AdaptMode::Static)
    }
}

/// Exact covariance EM output: the adapted covariances plus the weighted
/// log-likelihood after every EM pass.
#[derive(Debug, Clone)]
pub struct EmAdaptResult {
    pub covariances: Vec<DMatrix<f64>>,
    pub objective_trace: Vec<f64>,
}

/// Symmetrizes and floors the eigenvalues of a covariance candidate.
fn floor_spd(matrix: &DMatrix<f64>, floor: f64) -> Result<DMatrix<f64>> {
    if matrix.iter().any(|v| !v.is_finite()) {
        return Err(Error::AdaptationFailed(
            "non-finite entries before flooring".into(),
        ));
    }
    let sym = (matrix + matrix.transpose()) * 0.5;
    let eig = nalgebra::SymmetricEigen::new(sym);
    let clamped = DVector::from_iterator(
        eig.eigenvalues.len(),
        eig.eigenvalues.iter().map(|&l| l.max(floor)),
    );
    let rebuilt =
        &eig.eigenvectors * DMatrix::from_diagonal(&clamped) * eig.eigenvectors.transpose();
    let out = (&rebuilt + rebuilt.transpose()) * 0.5;
    if out.iter().any(|v| !v.is_finite()) {
        return Err(Error::AdaptationFailed(
            "non-finite entries after flooring".into(),
        ));
    }
    Ok(out)
}

/// One-step-EM covariance update over the prior proposal centers:
/// the responsibility-weighted scatter of each point about the center of
/// the proposal that generated it. No target evaluations are needed, and
/// the proposal densities are the ones already used for weighting.
pub fn lookback_covariance(
    weighted: &WeightedSample,
    prior_proposals: &[GaussianProposal],
    assignment: &[usize],
    cfg: &AdaptConfig,
) -> Result<DMatrix<f64>> {
    let n = weighted.n();
    let p = weighted.dim();
    if assignment.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} points but {} assignments",
            assignment.len()
        )));
    }
    let log_q: Vec<DVector<f64>> = prior_proposals
        .iter()
        .map(|q| q.log_densities(weighted.points()))
        .collect();
    let w = weighted.w_bar();
    let pts = weighted.points();

    let mut scatter = DMatrix::<f64>::zeros(p, p);
    let mut dens = vec![0.0f64; prior_proposals.len()];
    let mut diff = vec![0.0f64; p];
    for i in 0..n {
        for (slot, q) in dens.iter_mut().zip(&log_q) {
            *slot = q[i];
        }
        let resp = (dens[assignment[i]] - log_sum_exp(&dens)).exp();
        let mu = prior_proposals[assignment[i]].mu();
        for d in 0..p {
            diff[d] = pts[(i, d)] - mu[d];
        }
        let coef = w[i] * resp;
        for a in 0..p {
            for b in 0..p {
                scatter[(a, b)] += coef * diff[a] * diff[b];
            }
        }
    }
    floor_spd(&scatter, cfg.cov_floor)
}

/// Projects a covariance onto its closest isotropic form, `(trace/p) I`.
pub fn isotropize(sigma: &DMatrix<f64>, p: usize) -> DMatrix<f64> {
    DMatrix::identity(p, p) * (sigma.trace() / p as f64)
}

/// Weighted log-likelihood of the equally weighted normal mixture with the
/// given centers and covariances; the objective the EM updates climb.
fn mixture_objective(
    weighted: &WeightedSample,
    components: &[GaussianProposal],
) -> f64 {
    let n = weighted.n();
    let k = components.len();
    let log_k = (k as f64).ln();
    let per: Vec<DVector<f64>> = components
        .iter()
        .map(|c| c.log_densities(weighted.points()))
        .collect();
    let mut dens = vec![0.0f64; k];
    let mut obj = 0.0;
    for i in 0..n {
        for (slot, d) in dens.iter_mut().zip(&per) {
            *slot = d[i];
        }
        obj += weighted.w_bar()[i] * (log_sum_exp(&dens) - log_k);
    }
    obj
}

/// EM over per-component covariances with fixed centers and fixed mixture
/// weights `1/K`. Stops after `em_max_iters` passes or when the objective
/// gain drops below 1e-10.
pub fn exact_covariance_em(
    weighted: &WeightedSample,
    centers: &[DVector<f64>],
    init_covs: &[DMatrix<f64>],
    cfg: &AdaptConfig,
) -> Result<EmAdaptResult> {
    let k = centers.len();
    if k == 0 || init_covs.len() != k {
        return Err(Error::InvalidConfig(format!(
            "{k} centers with {} initial covariances",
            init_covs.len()
        )));
    }
    let n = weighted.n();
    let p = weighted.dim();
    let pts = weighted.points();
    let w = weighted.w_bar();

    let mut covs: Vec<DMatrix<f64>> = init_covs.to_vec();
    let mut trace = Vec::with_capacity(cfg.em_max_iters);
    for pass in 0..cfg.em_max_iters {
        let comps: Vec<GaussianProposal> = centers
            .iter()
            .zip(&covs)
            .map(|(mu, c)| GaussianProposal::new(mu.clone(), c.clone()))
            .collect::<Result<_>>()?;

        let obj = mixture_objective(weighted, &comps);
        if let Some(&prev) = trace.last() {
            trace.push(obj);
            if obj - prev < 1e-10 {
                break;
            }
        } else {
            trace.push(obj);
        }

        // E-step: responsibilities in log domain. The fixed 1/K mixture
        // weights cancel in the ratio.
        let per: Vec<DVector<f64>> = comps.iter().map(|c| c.log_densities(pts)).collect();
        let mut resp = DMatrix::<f64>::zeros(n, k);
        let mut dens = vec![0.0f64; k];
        for i in 0..n {
            for (slot, d) in dens.iter_mut().zip(&per) {
                *slot = d[i];
            }
            let total = log_sum_exp(&dens);
            for c in 0..k {
                resp[(i, c)] = (dens[c] - total).exp();
            }
        }

        // M-step: responsibility-weighted scatter about each fixed center.
        let mut diff = vec![0.0f64; p];
        for c in 0..k {
            let mass: f64 = (0..n).map(|i| w[i] * resp[(i, c)]).sum();
            if mass <= f64::MIN_POSITIVE {
                warn!("component {c} received no responsibility mass at pass {pass}; keeping its covariance");
                continue;
            }
            let mut scatter = DMatrix::<f64>::zeros(p, p);
            for i in 0..n {
                let coef = w[i] * resp[(i, c)];
                if coef == 0.0 {
                    continue;
                }
                for d in 0..p {
                    diff[d] = pts[(i, d)] - centers[c][d];
                }
                for a in 0..p {
                    for b in 0..p {
                        scatter[(a, b)] += coef * diff[a] * diff[b];
                    }
                }
            }
            covs[c] = floor_spd(&(scatter / mass), cfg.cov_floor)?;
        }
    }

    Ok(EmAdaptResult {
        covariances: covs,
        objective_trace: trace,
    })
}

/// Exact EM specialized to one covariance shared by every component, the
/// global-covariance setting the iteration loop runs in. The M-step pools
/// the responsibility-weighted scatter across components.
pub fn exact_covariance_em_shared(
    weighted: &WeightedSample,
    centers: &[DVector<f64>],
    init: &DMatrix<f64>,
    cfg: &AdaptConfig,
) -> Result<DMatrix<f64>> {
    let k = centers.len();
    if k == 0 {
        return Err(Error::InvalidConfig("shared EM needs K >= 1".into()));
    }
    let n = weighted.n();
    let p = weighted.dim();
    let pts = weighted.points();
    let w = weighted.w_bar();

    let mut cov = init.clone();
    let mut prev_obj = f64::NEG_INFINITY;
    for _ in 0..cfg.em_max_iters {
        let comps: Vec<GaussianProposal> = centers
            .iter()
            .map(|mu| GaussianProposal::new(mu.clone(), cov.clone()))
            .collect::<Result<_>>()?;
        let obj = mixture_objective(weighted, &comps);
        if obj - prev_obj < 1e-10 && prev_obj.is_finite() {
            break;
        }
        prev_obj = obj;

        let per: Vec<DVector<f64>> = comps.iter().map(|c| c.log_densities(pts)).collect();
        let mut scatter = DMatrix::<f64>::zeros(p, p);
        let mut dens = vec![0.0f64; k];
        let mut diff = vec![0.0f64; p];
        for i in 0..n {
            for (slot, d) in dens.iter_mut().zip(&per) {
                *slot = d[i];
            }
            let total = log_sum_exp(&dens);
            for c in 0..k {
                let coef = w[i] * (dens[c] - total).exp();
                if coef == 0.0 {
                    continue;
                }
                for d in 0..p {
                    diff[d] = pts[(i, d)] - centers[c][d];
                }
                for a in 0..p {
                    for b in 0..p {
                        scatter[(a, b)] += coef * diff[a] * diff[b];
                    }
                }
            }
        }
        cov = floor_spd(&scatter, cfg.cov_floor)?;
    }
    Ok(cov)
}
