//! Standard and ESS-weighted estimators over a finished run.
//!
//! Weight sums are accumulated under per-iteration max-log shifts, with the
//! integrand folded in by signed accumulation, so estimates survive weights
//! that underflow double precision by hundreds of log units.

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::engine::RunResult;
use crate::weights::ess;

/// Estimator outputs and the per-iteration diagnostics behind them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimatorOutput {
    pub mean_estimate: DVector<f64>,
    /// Estimate of the normalizing constant; always reported, even when a
    /// known constant was supplied.
    pub z_estimate: f64,
    /// Correction weights over iterations (uniform for the standard
    /// estimator).
    pub alpha: DVector<f64>,
    pub per_iteration_ess: DVector<f64>,
    /// Raw max log-weight per iteration; a small value flags iterations
    /// whose ESS is optimistic because every weight is tiny.
    pub per_iteration_max_log_w: DVector<f64>,
}

/// ESS-proportional correction weights `alpha_t = ess_t / sum ess`.
pub fn correction_weights(per_iteration_ess: &DVector<f64>) -> DVector<f64> {
    let total: f64 = per_iteration_ess.iter().sum();
    DVector::from_iterator(
        per_iteration_ess.len(),
        per_iteration_ess.iter().map(|&e| e / total),
    )
}

/// Per-iteration sums of shifted weights and weighted integrand values.
struct IterationSums {
    /// Max log-weight of the iteration (the shift).
    shift: f64,
    /// sum exp(log w - shift)
    sum_w: f64,
    /// sum exp(log w - shift) * h(x)
    sum_wh: DVector<f64>,
    count: usize,
    ess: f64,
}

fn iteration_sums(result: &RunResult, h: &dyn Fn(&DVector<f64>) -> DVector<f64>) -> Vec<IterationSums> {
    let p = result.records[0].sample.dim();
    let mut x = DVector::zeros(p);
    result
        .records
        .iter()
        .map(|rec| {
            let log_w = rec.sample.log_w();
            let shift = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            let mut sum_w = 0.0;
            let mut sum_wh: Option<DVector<f64>> = None;
            for i in 0..rec.sample.n() {
                let w = (log_w[i] - shift).exp();
                sum_w += w;
                for d in 0..p {
                    x[d] = rec.sample.points()[(i, d)];
                }
                let hx = h(&x);
                let acc = sum_wh.get_or_insert_with(|| DVector::zeros(hx.len()));
                acc.axpy(w, &hx, 1.0);
            }
            IterationSums {
                shift,
                sum_w,
                sum_wh: sum_wh.expect("records hold at least one sample"),
                count: rec.sample.n(),
                ess: ess(rec.sample.w_bar()),
            }
        })
        .collect()
}

/// Plain average-over-everything estimator. With a known constant the
/// estimate is unbiased; otherwise it self-normalizes by the estimated
/// constant.
pub fn standard_estimate(
    result: &RunResult,
    h: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    z: Option<f64>,
) -> EstimatorOutput {
    let sums = iteration_sums(result, h);
    let t = sums.len();
    let alpha = DVector::from_element(t, 1.0 / t as f64);
    let uniform = DVector::from_element(t, 1.0);
    let (mean, z_estimate) = combine_standard(&sums, &uniform, z);
    EstimatorOutput {
        mean_estimate: mean,
        z_estimate,
        alpha,
        per_iteration_ess: DVector::from_iterator(t, sums.iter().map(|s| s.ess)),
        per_iteration_max_log_w: DVector::from_iterator(t, sums.iter().map(|s| s.shift)),
    }
}

fn combine_standard(
    sums: &[IterationSums],
    weights: &DVector<f64>,
    z: Option<f64>,
) -> (DVector<f64>, f64) {
    let global = sums
        .iter()
        .map(|s| s.shift)
        .fold(f64::NEG_INFINITY, f64::max);
    let h_dim = sums[0].sum_wh.len();
    let mut total_w = 0.0;
    let mut total_wh = DVector::<f64>::zeros(h_dim);
    let mut total_count = 0.0;
    for (t, s) in sums.iter().enumerate() {
        let scale = weights[t] * (s.shift - global).exp();
        total_w += scale * s.sum_w;
        total_wh.axpy(scale, &s.sum_wh, 1.0);
        total_count += weights[t] * s.count as f64;
    }
    let z_estimate = global.exp() * total_w / total_count;
    let mean = match z {
        Some(z_known) => total_wh * (global.exp() / (total_count * z_known)),
        None => total_wh / total_w,
    };
    (mean, z_estimate)
}

/// ESS-weighted estimator: iterations with higher effective sample size
/// get proportionally more say, which discounts the pre-adaptation burn-in.
pub fn weighted_estimate(
    result: &RunResult,
    h: &dyn Fn(&DVector<f64>) -> DVector<f64>,
    z: Option<f64>,
) -> EstimatorOutput {
    let sums = iteration_sums(result, h);
    let t = sums.len();
    let per_iteration_ess = DVector::from_iterator(t, sums.iter().map(|s| s.ess));
    let alpha = correction_weights(&per_iteration_ess);
    // alpha_t replaces the uniform 1/T; each iteration still carries its
    // own 1/(KJ).
    let scaled = DVector::from_iterator(
        t,
        alpha.iter().zip(&sums).map(|(&a, s)| a / s.count as f64),
    );
    let (mean, z_estimate) = combine_weighted(&sums, &scaled, z);
    EstimatorOutput {
        mean_estimate: mean,
        z_estimate,
        alpha,
        per_iteration_ess,
        per_iteration_max_log_w: DVector::from_iterator(t, sums.iter().map(|s| s.shift)),
    }
}

fn combine_weighted(
    sums: &[IterationSums],
    scaled_alpha: &DVector<f64>,
    z: Option<f64>,
) -> (DVector<f64>, f64) {
    let global = sums
        .iter()
        .map(|s| s.shift)
        .fold(f64::NEG_INFINITY, f64::max);
    let h_dim = sums[0].sum_wh.len();
    let mut total_w = 0.0;
    let mut total_wh = DVector::<f64>::zeros(h_dim);
    for (t, s) in sums.iter().enumerate() {
        let scale = scaled_alpha[t] * (s.shift - global).exp();
        total_w += scale * s.sum_w;
        total_wh.axpy(scale, &s.sum_wh, 1.0);
    }
    let z_estimate = global.exp() * total_w;
    let mean = match z {
        Some(z_known) => total_wh * (global.exp() / z_known),
        None => total_wh / total_w,
    };
    (mean, z_estimate)
}
