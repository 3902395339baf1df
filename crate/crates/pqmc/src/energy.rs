//! Energy-distance objective and pairwise-distance infrastructure.

use nalgebra::DMatrix;

use crate::error::{Error, Result};
use crate::weights::WeightedSample;

/// Default memory cap for a stored distance matrix.
pub const DEFAULT_DISTANCE_CAP_BYTES: u64 = 2 * 1024 * 1024 * 1024;

/// Symmetric matrix of Euclidean distances between M points.
#[derive(Debug, Clone)]
pub struct DistanceMatrix {
    d: DMatrix<f64>,
}

impl DistanceMatrix {
    pub fn m(&self) -> usize {
        self.d.nrows()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.d[(i, j)]
    }

    pub fn as_matrix(&self) -> &DMatrix<f64> {
        &self.d
    }
}

/// Euclidean distance between rows `i` of `a` and `j` of `b`.
pub(crate) fn row_distance(a: &DMatrix<f64>, i: usize, b: &DMatrix<f64>, j: usize) -> f64 {
    let mut acc = 0.0;
    for d in 0..a.ncols() {
        let diff = a[(i, d)] - b[(j, d)];
        acc += diff * diff;
    }
    acc.sqrt()
}

/// All pairwise distances of a point set, under the default memory cap.
pub fn pairwise_distances(points: &DMatrix<f64>) -> Result<DistanceMatrix> {
    pairwise_distances_with_cap(points, DEFAULT_DISTANCE_CAP_BYTES)
}

/// All pairwise distances with an explicit memory cap in bytes.
pub fn pairwise_distances_with_cap(points: &DMatrix<f64>, cap: u64) -> Result<DistanceMatrix> {
    let m = points.nrows();
    let needed = (m as u64) * (m as u64) * std::mem::size_of::<f64>() as u64;
    if needed > cap {
        return Err(Error::DistanceCapacity { m, needed, cap });
    }
    let mut d = DMatrix::<f64>::zeros(m, m);
    for i in 0..m {
        for j in (i + 1)..m {
            let dist = row_distance(points, i, points, j);
            d[(i, j)] = dist;
            d[(j, i)] = dist;
        }
    }
    Ok(DistanceMatrix { d })
}

/// Energy objective of a candidate set against a weighted sample:
/// `(2/n) sum_i sum_m w_m ||x_i - y_m|| - (1/n^2) sum_i sum_j ||x_i - x_j||`.
///
/// This drops the candidate-independent pairwise term of the weighted
/// sample, so the value is an energy distance up to that constant and is
/// what both the resampler and the continuous solver minimize.
pub fn energy_objective(candidates: &DMatrix<f64>, weighted: &WeightedSample) -> f64 {
    let n = candidates.nrows();
    let w = weighted.w_bar();
    let y = weighted.points();
    debug_assert_eq!(candidates.ncols(), y.ncols());

    let mut cross = 0.0;
    for i in 0..n {
        for m in 0..y.nrows() {
            cross += w[m] * row_distance(candidates, i, y, m);
        }
    }
    let mut within = 0.0;
    for i in 0..n {
        for j in (i + 1)..n {
            within += row_distance(candidates, i, candidates, j);
        }
    }
    2.0 * cross / n as f64 - 2.0 * within / (n as f64 * n as f64)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use nalgebra::DVector;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn weighted_1d(points: &[f64], w_bar: &[f64]) -> WeightedSample {
        let log_w = DVector::from_iterator(w_bar.len(), w_bar.iter().map(|&w| w.ln()));
        WeightedSample::from_log_weights(
            DMatrix::from_column_slice(points.len(), 1, points),
            log_w,
        )
        .unwrap()
    }

    #[test]
    fn single_point_distance_matrix() {
        let pts = DMatrix::from_row_slice(1, 2, &[0.3, 0.4]);
        let d = pairwise_distances(&pts).unwrap();
        assert_eq!(d.m(), 1);
        assert_eq!(d.get(0, 0), 0.0);
    }

    #[test]
    fn three_four_five_triangle() {
        let pts = DMatrix::from_row_slice(2, 2, &[0.0, 0.0, 3.0, 4.0]);
        let d = pairwise_distances(&pts).unwrap();
        assert_abs_diff_eq!(d.get(0, 1), 5.0, epsilon = 1e-15);
        assert_abs_diff_eq!(d.get(1, 0), 5.0, epsilon = 1e-15);
    }

    #[test]
    fn matches_naive_double_loop() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let pts = DMatrix::from_fn(10, 3, |_, _| rng.random::<f64>());
        let d = pairwise_distances(&pts).unwrap();
        for i in 0..10 {
            for j in 0..10 {
                let naive: f64 = (0..3)
                    .map(|k| (pts[(i, k)] - pts[(j, k)]).powi(2))
                    .sum::<f64>()
                    .sqrt();
                assert_abs_diff_eq!(d.get(i, j), naive, epsilon = 1e-12);
            }
        }
    }

    #[test]
    fn capacity_cap_is_enforced() {
        let pts = DMatrix::zeros(100, 2);
        assert!(matches!(
            pairwise_distances_with_cap(&pts, 1024),
            Err(Error::DistanceCapacity { .. })
        ));
    }

    #[test]
    fn single_candidate_drops_within_term() {
        let weighted = weighted_1d(&[-1.0, 2.0], &[0.3, 0.7]);
        let cand = DMatrix::from_row_slice(1, 1, &[0.0]);
        let expect = 2.0 * (0.3 * 1.0 + 0.7 * 2.0);
        assert_abs_diff_eq!(energy_objective(&cand, &weighted), expect, epsilon = 1e-14);
    }

    #[test]
    fn hand_computed_symmetric_pair() {
        let weighted = weighted_1d(&[-1.0, 1.0], &[0.5, 0.5]);
        let cand = DMatrix::from_row_slice(1, 1, &[0.0]);
        assert_abs_diff_eq!(energy_objective(&cand, &weighted), 2.0, epsilon = 1e-14);
    }

    #[test]
    fn translation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let y = DMatrix::from_fn(12, 2, |_, _| rng.random::<f64>());
        let weighted = WeightedSample::from_log_weights(
            y.clone(),
            DVector::from_fn(12, |_, _| rng.random::<f64>()),
        )
        .unwrap();
        let cand = DMatrix::from_fn(5, 2, |_, _| rng.random::<f64>());
        let base = energy_objective(&cand, &weighted);

        let shift = [10.5, -3.25];
        let mut cand_shifted = cand.clone();
        let mut y_shifted = y;
        for i in 0..cand_shifted.nrows() {
            for d in 0..2 {
                cand_shifted[(i, d)] += shift[d];
            }
        }
        for i in 0..y_shifted.nrows() {
            for d in 0..2 {
                y_shifted[(i, d)] += shift[d];
            }
        }
        let weighted_shifted =
            WeightedSample::from_log_weights(y_shifted, weighted.log_w().clone()).unwrap();
        let shifted = energy_objective(&cand_shifted, &weighted_shifted);
        assert_abs_diff_eq!(base, shifted, epsilon = 1e-12);
    }

    #[test]
    fn rotation_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = DMatrix::from_fn(10, 2, |_, _| rng.random::<f64>());
        let weighted = WeightedSample::from_log_weights(
            y.clone(),
            DVector::from_fn(10, |_, _| rng.random::<f64>()),
        )
        .unwrap();
        let cand = DMatrix::from_fn(4, 2, |_, _| rng.random::<f64>());
        let base = energy_objective(&cand, &weighted);

        let theta = 1.234f64;
        let rot = |m: &DMatrix<f64>| {
            let mut out = m.clone();
            for i in 0..m.nrows() {
                let (x, yv) = (m[(i, 0)], m[(i, 1)]);
                out[(i, 0)] = theta.cos() * x - theta.sin() * yv;
                out[(i, 1)] = theta.sin() * x + theta.cos() * yv;
            }
            out
        };
        let weighted_rot =
            WeightedSample::from_log_weights(rot(&y), weighted.log_w().clone()).unwrap();
        let rotated = energy_objective(&rot(&cand), &weighted_rot);
        assert_abs_diff_eq!(base, rotated, epsilon = 1e-10);
    }

    #[test]
    fn moving_candidate_far_away_increases_objective() {
        let weighted = weighted_1d(&[-0.5, 0.0, 0.5], &[0.25, 0.5, 0.25]);
        let near = DMatrix::from_row_slice(2, 1, &[-0.2, 0.2]);
        let far = DMatrix::from_row_slice(2, 1, &[-0.2, 50.0]);
        assert!(energy_objective(&far, &weighted) > energy_objective(&near, &weighted));
    }
}
