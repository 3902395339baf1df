//! Importance weights, normalization, and effective sample size.
//!
//! Weights are carried as logs end to end; normalized weights are only
//! materialized where they are consumed. An all-`-inf` weight vector is an
//! error rather than a silent fallback to uniform weights, since uniform
//! weights would corrupt the adaptation loop invisibly.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{GaussianProposal, Target};

/// Points with unnormalized log-weights and the matching normalized weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WeightedSample {
    points: DMatrix<f64>,
    log_w: DVector<f64>,
    w_bar: DVector<f64>,
}

impl WeightedSample {
    /// Builds a weighted sample from raw log-weights, normalizing them.
    pub fn from_log_weights(points: DMatrix<f64>, log_w: DVector<f64>) -> Result<Self> {
        if points.nrows() != log_w.len() {
            return Err(Error::DimensionMismatch(format!(
                "{} points but {} log-weights",
                points.nrows(),
                log_w.len()
            )));
        }
        let w_bar = normalize(&log_w)?;
        Ok(Self {
            points,
            log_w,
            w_bar,
        })
    }

    /// Uniform weights over the given points.
    pub fn uniform(points: DMatrix<f64>) -> Result<Self> {
        let n = points.nrows();
        Self::from_log_weights(points, DVector::zeros(n))
    }

    pub fn n(&self) -> usize {
        self.points.nrows()
    }

    pub fn dim(&self) -> usize {
        self.points.ncols()
    }

    pub fn points(&self) -> &DMatrix<f64> {
        &self.points
    }

    pub fn log_w(&self) -> &DVector<f64> {
        &self.log_w
    }

    pub fn w_bar(&self) -> &DVector<f64> {
        &self.w_bar
    }

    /// Effective sample size of the normalized weights.
    pub fn ess(&self) -> f64 {
        ess(&self.w_bar)
    }
}

/// log(sum exp(v)) with the usual max shift; `-inf` when all entries are.
pub(crate) fn log_sum_exp(values: &[f64]) -> f64 {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + values.iter().map(|&v| (v - max).exp()).sum::<f64>().ln()
}

/// Normalizes log-weights to a simplex vector.
pub fn normalize(log_w: &DVector<f64>) -> Result<DVector<f64>> {
    let total = log_sum_exp(log_w.as_slice());
    if total == f64::NEG_INFINITY {
        return Err(Error::DegenerateWeights);
    }
    Ok(DVector::from_iterator(
        log_w.len(),
        log_w.iter().map(|&lw| (lw - total).exp()),
    ))
}

/// Effective sample size `1 / sum w_bar^2` of a simplex vector.
pub fn ess(w_bar: &DVector<f64>) -> f64 {
    let sq: f64 = w_bar.iter().map(|&w| w * w).sum();
    1.0 / sq
}

/// Standard importance weights: each point is weighted against the single
/// proposal that generated it.
pub fn standard_weights(
    points: DMatrix<f64>,
    proposals: &[GaussianProposal],
    assignment: &[usize],
    target: &Target,
) -> Result<WeightedSample> {
    let n = points.nrows();
    if assignment.len() != n {
        return Err(Error::DimensionMismatch(format!(
            "{n} points but {} assignments",
            assignment.len()
        )));
    }
    if let Some(&bad) = assignment.iter().find(|&&k| k >= proposals.len()) {
        return Err(Error::InvalidConfig(format!(
            "assignment index {bad} out of range for {} proposals",
            proposals.len()
        )));
    }
    let log_gamma = target.log_gamma_rows(&points);
    let per_proposal: Vec<DVector<f64>> =
        proposals.iter().map(|q| q.log_densities(&points)).collect();
    let log_w = DVector::from_fn(n, |i, _| log_gamma[i] - per_proposal[assignment[i]][i]);
    WeightedSample::from_log_weights(points, log_w)
}

/// Deterministic-mixture weights: the denominator is the equally weighted
/// mixture of all proposals, costing `K * n` density evaluations.
pub fn dm_weights(
    points: DMatrix<f64>,
    proposals: &[GaussianProposal],
    target: &Target,
) -> Result<WeightedSample> {
    if proposals.is_empty() {
        return Err(Error::InvalidConfig("dm_weights needs K >= 1".into()));
    }
    let n = points.nrows();
    let k = proposals.len();
    let log_gamma = target.log_gamma_rows(&points);
    let per_proposal: Vec<DVector<f64>> =
        proposals.iter().map(|q| q.log_densities(&points)).collect();
    let log_k = (k as f64).ln();
    let mut scratch = vec![0.0f64; k];
    let log_w = DVector::from_fn(n, |i, _| {
        for (slot, dens) in scratch.iter_mut().zip(&per_proposal) {
            *slot = dens[i];
        }
        log_gamma[i] - log_sum_exp(&scratch) + log_k
    });
    WeightedSample::from_log_weights(points, log_w)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::standard_normal;
    use approx::assert_abs_diff_eq;
    use nalgebra::{DMatrix, DVector};
    use proptest::prelude::*;

    fn scalar_proposal(mu: f64, var: f64) -> GaussianProposal {
        GaussianProposal::new(
            DVector::from_vec(vec![mu]),
            DMatrix::from_row_slice(1, 1, &[var]),
        )
        .unwrap()
    }

    #[test]
    fn perfect_proposal_gives_uniform_weights() {
        let target = standard_normal(2);
        let q = GaussianProposal::new(DVector::zeros(2), DMatrix::identity(2, 2)).unwrap();
        let points = DMatrix::from_row_slice(4, 2, &[0.1, 0.2, -0.4, 0.5, 1.0, -1.0, 0.0, 0.0]);
        let ws = standard_weights(points, &[q], &[0, 0, 0, 0], &target).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(ws.log_w()[i], 0.0, epsilon = 1e-12);
            assert_abs_diff_eq!(ws.w_bar()[i], 0.25, epsilon = 1e-12);
        }
    }

    #[test]
    fn single_proposal_standard_equals_dm() {
        let target = standard_normal(1);
        let q = scalar_proposal(0.5, 2.0);
        let points = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, -2.0]);
        let st = standard_weights(points.clone(), &[q.clone()], &[0, 0, 0], &target).unwrap();
        let dm = dm_weights(points, &[q], &target).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(st.log_w()[i], dm.log_w()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn identical_proposals_match_standard_weights() {
        let target = standard_normal(1);
        let q = scalar_proposal(0.3, 1.5);
        let points = DMatrix::from_row_slice(4, 1, &[0.0, 0.5, 1.0, -1.0]);
        let dm = dm_weights(points.clone(), &[q.clone(), q.clone()], &target).unwrap();
        let st = standard_weights(points, &[q], &[0, 0, 0, 0], &target).unwrap();
        for i in 0..4 {
            assert_abs_diff_eq!(dm.log_w()[i], st.log_w()[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn standard_weights_match_hand_ratios() {
        // Scalar case where the densities are easy to write out by hand.
        let target = standard_normal(1);
        let q0 = scalar_proposal(0.0, 4.0);
        let q1 = scalar_proposal(1.0, 1.0);
        let points = DMatrix::from_row_slice(3, 1, &[0.0, 1.0, 2.0]);
        let ws = standard_weights(points, &[q0, q1], &[0, 1, 1], &target).unwrap();

        let phi = |x: f64, mu: f64, var: f64| {
            (-0.5 * (x - mu).powi(2) / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        let expect = [
            phi(0.0, 0.0, 1.0) / phi(0.0, 0.0, 4.0),
            phi(1.0, 0.0, 1.0) / phi(1.0, 1.0, 1.0),
            phi(2.0, 0.0, 1.0) / phi(2.0, 1.0, 1.0),
        ];
        for i in 0..3 {
            assert_abs_diff_eq!(ws.log_w()[i].exp(), expect[i], epsilon = 1e-12);
        }
    }

    #[test]
    fn dm_weights_match_hand_mixture_ratios() {
        let target = standard_normal(1);
        let q0 = scalar_proposal(-0.5, 1.0);
        let q1 = scalar_proposal(0.5, 2.0);
        let points = DMatrix::from_row_slice(4, 1, &[-1.0, 0.0, 0.5, 2.0]);
        let ws = dm_weights(points, &[q0, q1], &target).unwrap();

        let phi = |x: f64, mu: f64, var: f64| {
            (-0.5 * (x - mu).powi(2) / var).exp() / (2.0 * std::f64::consts::PI * var).sqrt()
        };
        for (i, &x) in [-1.0, 0.0, 0.5, 2.0].iter().enumerate() {
            let mix = 0.5 * (phi(x, -0.5, 1.0) + phi(x, 0.5, 2.0));
            let expect = phi(x, 0.0, 1.0) / mix;
            assert_abs_diff_eq!(ws.log_w()[i].exp(), expect, epsilon = 1e-12);
        }
    }

    #[test]
    fn normalize_uniform() {
        let w = normalize(&DVector::from_vec(vec![0.0, 0.0, 0.0])).unwrap();
        for i in 0..3 {
            assert_abs_diff_eq!(w[i], 1.0 / 3.0, epsilon = 1e-15);
        }
    }

    #[test]
    fn normalize_hand_ratio() {
        let w = normalize(&DVector::from_vec(vec![0.0f64, 3.0f64.ln()])).unwrap();
        assert_abs_diff_eq!(w[0], 0.25, epsilon = 1e-14);
        assert_abs_diff_eq!(w[1], 0.75, epsilon = 1e-14);
    }

    #[test]
    fn normalize_is_stable_far_below_zero() {
        // exp(-1000) underflows, but the shifted ratio e/(1+e) survives.
        let w = normalize(&DVector::from_vec(vec![-1000.0, -1001.0])).unwrap();
        let e = std::f64::consts::E;
        assert_abs_diff_eq!(w[0], e / (1.0 + e), epsilon = 1e-12);
        assert_abs_diff_eq!(w[1], 1.0 / (1.0 + e), epsilon = 1e-12);
    }

    #[test]
    fn normalize_rejects_all_degenerate() {
        let lw = DVector::from_vec(vec![f64::NEG_INFINITY, f64::NEG_INFINITY]);
        assert!(matches!(normalize(&lw), Err(Error::DegenerateWeights)));
    }

    #[test]
    fn ess_uniform_and_degenerate() {
        let uniform = DVector::from_element(100, 0.01);
        assert_abs_diff_eq!(ess(&uniform), 100.0, epsilon = 1e-9);
        let mut point = DVector::zeros(5);
        point[2] = 1.0;
        assert_abs_diff_eq!(ess(&point), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn ess_hand_value() {
        let w = DVector::from_vec(vec![0.5, 0.25, 0.25]);
        assert_abs_diff_eq!(ess(&w), 1.0 / 0.375, epsilon = 1e-12);
    }

    #[test]
    fn self_normalized_mean_ignores_gamma_scale() {
        // Scaling gamma by 10^+-6 must leave sum w_bar * h(x) unchanged.
        let points = DMatrix::from_row_slice(5, 1, &[-1.0, -0.5, 0.0, 0.5, 1.0]);
        let q = scalar_proposal(0.0, 2.0);
        for scale_log in [-6.0f64, 6.0] {
            let shift = scale_log * 10f64.ln();
            let base = standard_normal(1);
            let scaled = Target::new(
                1,
                Box::new(move |x: &DVector<f64>| -0.5 * x[0] * x[0] + shift),
                None,
                None,
            )
            .unwrap();
            let w0 = dm_weights(points.clone(), &[q.clone()], &base).unwrap();
            let w1 = dm_weights(points.clone(), &[q.clone()], &scaled).unwrap();
            let est0: f64 = (0..5).map(|i| w0.w_bar()[i] * points[(i, 0)]).sum();
            let est1: f64 = (0..5).map(|i| w1.w_bar()[i] * points[(i, 0)]).sum();
            assert_abs_diff_eq!(est0, est1, epsilon = 1e-12);
        }
    }

    proptest! {
        #[test]
        fn shifting_log_weights_is_invariant(
            base in proptest::collection::vec(-30.0f64..30.0, 2..20),
            shift in -200.0f64..200.0,
        ) {
            let lw = DVector::from_vec(base.clone());
            let shifted = DVector::from_vec(base.iter().map(|v| v + shift).collect());
            let a = normalize(&lw).unwrap();
            let b = normalize(&shifted).unwrap();
            for i in 0..a.len() {
                prop_assert!((a[i] - b[i]).abs() < 1e-12);
            }
            prop_assert!((ess(&a) - ess(&b)).abs() < 1e-9 * ess(&a));
        }

        #[test]
        fn normalized_weights_form_simplex(
            base in proptest::collection::vec(-700.0f64..100.0, 1..40),
        ) {
            let w = normalize(&DVector::from_vec(base)).unwrap();
            prop_assert!(w.iter().all(|&v| v >= 0.0));
            let total: f64 = w.iter().sum();
            prop_assert!((total - 1.0).abs() < 1e-12);
            let n = w.len() as f64;
            let e = ess(&w);
            prop_assert!(e >= 1.0 - 1e-9 && e <= n + 1e-9);
        }
    }
}
