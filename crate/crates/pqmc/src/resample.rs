//! Resampling: deterministic importance-support-point selection plus the
//! multinomial and systematic baselines.
//!
//! The ISP resampler selects n rows (duplicates allowed) of the weighted
//! sample that minimize the energy objective, via a greedy build-up followed
//! by coordinate-descent refinement over the precomputed distance matrix.
//! It uses no randomness: identical inputs give identical outputs, and ties
//! are broken toward the lowest candidate index.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::energy::pairwise_distances;
use crate::error::Result;
use crate::weights::WeightedSample;

/// Tolerance for treating two candidate scores as tied.
const TIE_REL_TOL: f64 = 1e-12;

/// Controls for [`isp_resample`]; the seed only drives the stochastic
/// baselines.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ResampleConfig {
    pub n: usize,
    pub max_refine_passes: usize,
    pub tol: f64,
    pub rng_seed: u64,
}

impl ResampleConfig {
    pub fn new(n: usize) -> Self {
        Self {
            n,
            max_refine_passes: 10,
            tol: 1e-8,
            rng_seed: 0,
        }
    }
}

/// Lowest-index argmin of `scores`, treating values within a relative band
/// of the minimum as tied.
fn tie_broken_argmin(scores: &[f64]) -> usize {
    let min = scores.iter().copied().fold(f64::INFINITY, f64::min);
    let band = TIE_REL_TOL * min.abs().max(1.0);
    scores
        .iter()
        .position(|&s| s <= min + band)
        .expect("non-empty score vector")
}

/// Greedy-plus-refinement ISP resampling. Returns the selected row indices
/// and the energy objective after initialization and after each refinement
/// pass.
fn isp_resample_detail(
    weighted: &WeightedSample,
    cfg: &ResampleConfig,
) -> Result<(Vec<usize>, Vec<f64>)> {
    let m = weighted.n();
    let n = cfg.n;
    let w = weighted.w_bar();
    let dist = pairwise_distances(weighted.points())?;

    // Weighted distance of every candidate to the whole sample; reused by
    // every greedy step and refinement scan.
    let cross: Vec<f64> = (0..m)
        .map(|x| (0..m).map(|y| w[y] * dist.get(x, y)).sum())
        .collect();

    // Greedy initialization: grow the selection one point at a time,
    // keeping a running sum of distances to the points chosen so far.
    let mut selected: Vec<usize> = Vec::with_capacity(n);
    let mut sel_sum = vec![0.0f64; m];
    let mut scores = vec![0.0f64; m];
    for i in 1..=n {
        let inv = 1.0 / i as f64;
        for x in 0..m {
            scores[x] = 2.0 * inv * cross[x] - 2.0 * inv * inv * sel_sum[x];
        }
        let pick = tie_broken_argmin(&scores);
        selected.push(pick);
        for x in 0..m {
            sel_sum[x] += dist.get(x, pick);
        }
    }

    let objective = |sel: &[usize]| -> f64 {
        let nf = n as f64;
        let cross_term: f64 = sel.iter().map(|&x| cross[x]).sum();
        let mut within = 0.0;
        for a in 0..n {
            for b in (a + 1)..n {
                within += dist.get(sel[a], sel[b]);
            }
        }
        2.0 * cross_term / nf - 2.0 * within / (nf * nf)
    };

    let mut trace = vec![objective(&selected)];

    // Refinement: coordinate descent in ascending index order. tot[x]
    // tracks the distance from candidate x to the current selection.
    let mut tot = sel_sum;
    let nf = n as f64;
    for _pass in 0..cfg.max_refine_passes {
        for i in 0..n {
            let current = selected[i];
            for x in 0..m {
                scores[x] = 2.0 / nf * cross[x]
                    - 2.0 / (nf * nf) * (tot[x] - dist.get(x, current));
            }
            let pick = tie_broken_argmin(&scores);
            if pick != current && scores[pick] < scores[current] {
                selected[i] = pick;
                for x in 0..m {
                    tot[x] += dist.get(x, pick) - dist.get(x, current);
                }
            }
        }
        let prev = *trace.last().unwrap();
        let now = objective(&selected);
        trace.push(now);
        if prev - now < cfg.tol * prev.abs() {
            break;
        }
    }
    Ok((selected, trace))
}

/// Deterministic ISP resampling of `cfg.n` points from the weighted sample.
pub fn isp_resample(weighted: &WeightedSample, cfg: &ResampleConfig) -> Result<DMatrix<f64>> {
    let (selected, _) = isp_resample_detail(weighted, cfg)?;
    Ok(gather_rows(weighted.points(), &selected))
}

fn gather_rows(points: &DMatrix<f64>, indices: &[usize]) -> DMatrix<f64> {
    let p = points.ncols();
    DMatrix::from_fn(indices.len(), p, |i, d| points[(indices[i], d)])
}

/// n i.i.d. draws from the categorical distribution of the weights.
pub fn multinomial_resample(weighted: &WeightedSample, n: usize, seed: u64) -> DMatrix<f64> {
    let w = weighted.w_bar();
    let m = weighted.n();
    let mut cum = Vec::with_capacity(m);
    let mut acc = 0.0;
    for i in 0..m {
        acc += w[i];
        cum.push(acc);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let indices: Vec<usize> = (0..n)
        .map(|_| {
            let u: f64 = rng.random();
            cum.partition_point(|&c| c < u).min(m - 1)
        })
        .collect();
    gather_rows(weighted.points(), &indices)
}

/// Systematic resampling: one uniform offset, then n evenly spaced strata
/// over the cumulative weights.
pub fn systematic_resample(weighted: &WeightedSample, n: usize, seed: u64) -> DMatrix<f64> {
    let w = weighted.w_bar();
    let m = weighted.n();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let offset: f64 = rng.random::<f64>() / n as f64;

    let mut indices = Vec::with_capacity(n);
    let mut cum = w[0];
    let mut j = 0usize;
    for i in 0..n {
        let u = offset + i as f64 / n as f64;
        while cum < u && j + 1 < m {
            j += 1;
            cum += w[j];
        }
        indices.push(j);
    }
    gather_rows(weighted.points(), &indices)
}
