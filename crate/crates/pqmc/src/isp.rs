//! Continuous importance support points via the convex-concave procedure,
//! with plain support points as the uniform-weight special case.
//!
//! Each sweep applies the closed-form majorize-minimize update to all n
//! points simultaneously (Jacobi style), so the energy objective never
//! increases. Input rows are put in a canonical order first, which makes
//! the whole computation, and therefore the output, invariant to input
//! permutations bit for bit.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::energy::{energy_objective, row_distance};
use crate::error::{Error, Result};
use crate::weights::WeightedSample;

/// Controls for the CCP iteration.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CcpConfig {
    pub max_iters: usize,
    /// Movement threshold relative to the data range.
    pub tol: f64,
    /// Distance floor inside the update; keeps candidates off data points.
    pub epsilon_guard: f64,
    /// Explicit initial candidates; defaults to a jittered weighted
    /// subsample.
    pub init: Option<DMatrix<f64>>,
}

impl Default for CcpConfig {
    fn default() -> Self {
        Self {
            max_iters: 500,
            tol: 1e-8,
            epsilon_guard: 1e-12,
            init: None,
        }
    }
}

/// Output of the CCP solver: the points plus the per-sweep objective.
#[derive(Debug, Clone)]
pub struct CcpResult {
    pub points: DMatrix<f64>,
    /// Energy objective at initialization and after every sweep.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
}

/// Sorts rows lexicographically (weight as tiebreak) so permuted inputs
/// produce bit-identical arithmetic.
fn canonical_order(weighted: &WeightedSample) -> (DMatrix<f64>, DVector<f64>) {
    let pts = weighted.points();
    let w = weighted.w_bar();
    let m = pts.nrows();
    let p = pts.ncols();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| {
        for d in 0..p {
            match pts[(a, d)].partial_cmp(&pts[(b, d)]).unwrap() {
                std::cmp::Ordering::Equal => continue,
                other => return other,
            }
        }
        w[a].partial_cmp(&w[b]).unwrap()
    });
    let sorted_pts = DMatrix::from_fn(m, p, |i, d| pts[(order[i], d)]);
    let sorted_w = DVector::from_fn(m, |i, _| w[order[i]]);
    (sorted_pts, sorted_w)
}

/// Deterministic unit value in [0, 1) from a pair of counters.
fn unit_hash(i: u64, d: u64) -> f64 {
    let mut z = (i ^ 0x2545_f491_4f6c_dd1d).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z ^= d.wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^= z >> 31;
    (z >> 11) as f64 * (1.0 / (1u64 << 53) as f64)
}

/// Default initialization: a deterministic systematic subsample of the
/// (canonically ordered) weighted points, jittered by 1e-6 of the per-axis
/// range so no candidate starts exactly on a data row.
fn default_init(points: &DMatrix<f64>, w: &DVector<f64>, n: usize) -> DMatrix<f64> {
    let m = points.nrows();
    let p = points.ncols();
    let mut ranges = vec![0.0f64; p];
    for d in 0..p {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            lo = lo.min(points[(i, d)]);
            hi = hi.max(points[(i, d)]);
        }
        ranges[d] = (hi - lo).max(1.0);
    }

    let mut init = DMatrix::zeros(n, p);
    let mut cum = w[0];
    let mut j = 0usize;
    for i in 0..n {
        let u = (i as f64 + 0.5) / n as f64;
        while cum < u && j + 1 < m {
            j += 1;
            cum += w[j];
        }
        for d in 0..p {
            let jitter = (unit_hash(i as u64, d as u64) - 0.5) * 2e-6 * ranges[d];
            init[(i, d)] = points[(j, d)] + jitter;
        }
    }
    init
}

/// Continuous ISP solver: fixed-point CCP iteration on the energy
/// objective. Output points are unconstrained, not restricted to data rows.
pub fn isp_ccp(weighted: &WeightedSample, n: usize, cfg: &CcpConfig) -> Result<CcpResult> {
    if n == 0 {
        return Err(Error::InvalidConfig("isp_ccp needs n >= 1".into()));
    }
    let (y, w) = canonical_order(weighted);
    let canonical =
        WeightedSample::from_log_weights(y.clone(), w.map(|v| v.ln()))?;
    let m = y.nrows();
    let p = y.ncols();
    let eps = cfg.epsilon_guard;

    let mut x = match &cfg.init {
        Some(init) => {
            if init.nrows() != n || init.ncols() != p {
                return Err(Error::DimensionMismatch(format!(
                    "init is {}x{}, expected {}x{}",
                    init.nrows(),
                    init.ncols(),
                    n,
                    p
                )));
            }
            init.clone()
        }
        None => default_init(&y, &w, n),
    };

    // Movement tolerance scales with the data spread.
    let mut scale = 0.0f64;
    for d in 0..p {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for i in 0..m {
            lo = lo.min(y[(i, d)]);
            hi = hi.max(y[(i, d)]);
        }
        scale = scale.max(hi - lo);
    }
    let move_tol = cfg.tol * scale.max(1.0);

    let mut trace = vec![energy_objective(&x, &canonical)];
    let mut next = DMatrix::zeros(n, p);
    let mut sweeps = 0;
    for _ in 0..cfg.max_iters {
        sweeps += 1;
        let mut max_move: f64 = 0.0;
        for i in 0..n {
            // Repulsion from the other candidates, all at iterate t.
            let mut numer = vec![0.0f64; p];
            for j in 0..n {
                if j == i {
                    continue;
                }
                let dist = row_distance(&x, i, &x, j).max(eps);
                for d in 0..p {
                    numer[d] += (x[(i, d)] - x[(j, d)]) / dist / n as f64;
                }
            }
            // Attraction to the weighted sample.
            let mut denom = 0.0f64;
            for mrow in 0..m {
                let dist = row_distance(&x, i, &y, mrow).max(eps);
                let coef = w[mrow] / dist;
                denom += coef;
                for d in 0..p {
                    numer[d] += coef * y[(mrow, d)];
                }
            }
            let mut move_sq = 0.0;
            for d in 0..p {
                let v = numer[d] / denom;
                if !v.is_finite() {
                    return Err(Error::NonFinite("ccp update"));
                }
                let delta = v - x[(i, d)];
                move_sq += delta * delta;
                next[(i, d)] = v;
            }
            max_move = max_move.max(move_sq.sqrt());
        }
        std::mem::swap(&mut x, &mut next);

        let obj = energy_objective(&x, &canonical);
        let prev = *trace.last().unwrap();
        // MM guarantee, with slack for the two objective evaluations.
        debug_assert!(
            obj <= prev + 1e-9 * prev.abs().max(1.0),
            "ccp objective rose from {prev} to {obj}"
        );
        trace.push(obj);
        if max_move < move_tol {
            break;
        }
    }

    Ok(CcpResult {
        points: x,
        objective_trace: trace,
        sweeps,
    })
}

/// Support points of a plain point cloud: the uniform-weight special case.
pub fn support_points(points: &DMatrix<f64>, n: usize, cfg: &CcpConfig) -> Result<CcpResult> {
    let weighted = WeightedSample::uniform(points.clone())?;
    isp_ccp(&weighted, n, cfg)
}
