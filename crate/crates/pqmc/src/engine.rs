//! The iteration loops: population Monte Carlo with pseudo-random
//! proposals, and its quasi-Monte Carlo variant with scrambled Sobol'
//! sampling, deterministic resampling, and covariance adaptation.
//!
//! Runs are bitwise reproducible: one run-level ChaCha stream drives the
//! pseudo-random draws and the stochastic resamplers, while QMC scramble
//! seeds are derived by hashing (master seed, iteration, proposal index).

use std::collections::BTreeMap;
use std::time::Instant;

use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::adapt::{
    exact_covariance_em_shared, isotropize, lookback_covariance, AdaptConfig, AdaptMode,
};
use crate::error::{Error, Result};
use crate::estimators::EstimatorOutput;
use crate::lds::{gaussian_inverse_transform, mix64, owen_scramble, sobol, ScrambleSeed};
use crate::model::{GaussianProposal, Target};
use crate::resample::{
    isp_resample, multinomial_resample, systematic_resample, ResampleConfig,
};
use crate::weights::{dm_weights, standard_weights, WeightedSample};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Sampler {
    Mc,
    Qmc,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Weighting {
    Standard,
    Dm,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Resampler {
    Multinomial,
    Systematic,
    Isp,
}

/// Where the K initial proposal centers come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum InitCenters {
    /// K Sobol' points scaled to the box `[lo, hi]^p`.
    SobolBox { lo: f64, hi: f64 },
    Explicit(Vec<DVector<f64>>),
}

/// Full description of one run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    /// Identifier of the target; echoed into results, not resolved here.
    pub target_id: String,
    pub k: usize,
    pub j: usize,
    pub t: usize,
    /// Initial proposal scale; the shared covariance starts at `sigma0^2 I`.
    pub sigma0: f64,
    pub init_centers: InitCenters,
    pub sampler: Sampler,
    pub weighting: Weighting,
    pub resampler: Resampler,
    pub adapt: AdaptConfig,
    pub seed: u64,
}

impl RunConfig {
    fn validate(&self) -> Result<()> {
        if self.k == 0 || self.j == 0 || self.t == 0 {
            return Err(Error::InvalidConfig("K, J, T must all be >= 1".into()));
        }
        if !(self.sigma0 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma0 must be positive, got {}",
                self.sigma0
            )));
        }
        Ok(())
    }
}

/// One iteration's proposals, weighted sample, and diagnostics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub t: usize,
    pub proposals: Vec<GaussianProposal>,
    pub sample: WeightedSample,
    pub ess: f64,
    /// Shared proposal covariance in force at this iteration.
    pub sigma: DMatrix<f64>,
}

/// All iteration records of one run plus optional estimator outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub records: Vec<IterationRecord>,
    pub config: RunConfig,
    /// Wall time is diagnostic only and excluded from serialization so
    /// equal-seed runs serialize identically.
    #[serde(skip)]
    pub wall_time_s: f64,
    /// Estimator outputs keyed by a caller-chosen name.
    pub estimates: BTreeMap<String, EstimatorOutput>,
}

/// Scramble seed for the (iteration, proposal) point set.
fn derive_scramble_seed(master: u64, t: usize, k: usize) -> u64 {
    mix64(mix64(master ^ 0xa076_1d64_78bd_642f) ^ (t as u64).wrapping_mul(0xe703_7ed1_a0b4_28db))
        ^ mix64(k as u64 ^ 0x8ebc_6af0_9c88_c6e3)
}

/// Population Monte Carlo with pseudo-random sampling.
pub fn run_pmc(cfg: &RunConfig, target: &Target) -> Result<RunResult> {
    if cfg.sampler != Sampler::Mc {
        return Err(Error::InvalidConfig(
            "run_pmc requires sampler = mc".into(),
        ));
    }
    run(cfg, target)
}

/// Population quasi-Monte Carlo with scrambled Sobol' sampling.
pub fn run_pqmc(cfg: &RunConfig, target: &Target) -> Result<RunResult> {
    if cfg.sampler != Sampler::Qmc {
        return Err(Error::InvalidConfig(
            "run_pqmc requires sampler = qmc".into(),
        ));
    }
    run(cfg, target)
}

fn initial_centers(cfg: &RunConfig, p: usize) -> Result<Vec<DVector<f64>>> {
    match &cfg.init_centers {
        InitCenters::SobolBox { lo, hi } => {
            if !(hi > lo) {
                return Err(Error::InvalidConfig(format!(
                    "init box needs hi > lo, got [{lo}, {hi}]"
                )));
            }
            let u = sobol(cfg.k, p)?;
            Ok((0..cfg.k)
                .map(|i| DVector::from_fn(p, |d, _| lo + (hi - lo) * u.values()[(i, d)]))
                .collect())
        }
        InitCenters::Explicit(centers) => {
            if centers.len() != cfg.k {
                return Err(Error::InvalidConfig(format!(
                    "{} explicit centers for K = {}",
                    centers.len(),
                    cfg.k
                )));
            }
            if centers.iter().any(|c| c.len() != p) {
                return Err(Error::DimensionMismatch(
                    "explicit center dimension != target dimension".into(),
                ));
            }
            Ok(centers.clone())
        }
    }
}

fn run(cfg: &RunConfig, target: &Target) -> Result<RunResult> {
    cfg.validate()?;
    let started = Instant::now();
    let p = target.dim();
    let (k, j, t_total) = (cfg.k, cfg.j, cfg.t);
    let evals_before = target.eval_count();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut centers = initial_centers(cfg, p)?;
    let mut sigma = DMatrix::<f64>::identity(p, p) * (cfg.sigma0 * cfg.sigma0);
    let qmc_base = match cfg.sampler {
        Sampler::Qmc => Some(sobol(j, p)?),
        Sampler::Mc => None,
    };

    let mut records: Vec<IterationRecord> = Vec::with_capacity(t_total);
    for t in 1..=t_total {
        let proposals: Vec<GaussianProposal> = centers
            .iter()
            .map(|c| GaussianProposal::new(c.clone(), sigma.clone()))
            .collect::<Result<_>>()?;

        // Sampling: J points per proposal, KJ rows total.
        let mut points = DMatrix::<f64>::zeros(k * j, p);
        let mut assignment = Vec::with_capacity(k * j);
        for (ki, proposal) in proposals.iter().enumerate() {
            let block = match (&cfg.sampler, &qmc_base) {
                (Sampler::Mc, _) => {
                    let z = DMatrix::from_fn(j, p, |_, _| rng.sample(StandardNormal));
                    proposal.transform_standard(&z)
                }
                (Sampler::Qmc, Some(base)) => {
                    let seed = ScrambleSeed(derive_scramble_seed(cfg.seed, t, ki));
                    let u = owen_scramble(base, seed);
                    gaussian_inverse_transform(&u, proposal.mu(), proposal.sigma())?
                }
                (Sampler::Qmc, None) => unreachable!("qmc base points exist"),
            };
            for row in 0..j {
                for d in 0..p {
                    points[(ki * j + row, d)] = block[(row, d)];
                }
                assignment.push(ki);
            }
        }

        // Weighting, in log domain throughout.
        let weighted = match cfg.weighting {
            Weighting::Dm => dm_weights(points, &proposals, target),
            Weighting::Standard => standard_weights(points, &proposals, &assignment, target),
        }
        .map_err(|e| match e {
            Error::DegenerateWeights => Error::DegenerateAtIteration { iteration: t },
            other => other,
        })?;
        let ess = weighted.ess();

        // Adaptation: K new centers by resampling, then the covariance.
        let new_center_rows = match cfg.resampler {
            Resampler::Multinomial => multinomial_resample(&weighted, k, rng.random()),
            Resampler::Systematic => systematic_resample(&weighted, k, rng.random()),
            Resampler::Isp => isp_resample(&weighted, &ResampleConfig::new(k))?,
        };
        let new_centers: Vec<DVector<f64>> = (0..k)
            .map(|i| DVector::from_fn(p, |d, _| new_center_rows[(i, d)]))
            .collect();

        let new_sigma = match cfg.adapt.mode {
            AdaptMode::Static => sigma.clone(),
            AdaptMode::Lookback => {
                let updated = lookback_covariance(&weighted, &proposals, &assignment, &cfg.adapt)?;
                if cfg.adapt.isotropic {
                    isotropize(&updated, p)
                } else {
                    updated
                }
            }
            AdaptMode::ExactEm => {
                let updated =
                    exact_covariance_em_shared(&weighted, &new_centers, &sigma, &cfg.adapt)?;
                if cfg.adapt.isotropic {
                    isotropize(&updated, p)
                } else {
                    updated
                }
            }
        };

        records.push(IterationRecord {
            t,
            proposals,
            sample: weighted,
            ess,
            sigma: sigma.clone(),
        });
        centers = new_centers;
        sigma = new_sigma;
    }

    let spent = target.eval_count() - evals_before;
    assert_eq!(
        spent,
        (t_total * k * j) as u64,
        "target evaluation budget drifted"
    );

    Ok(RunResult {
        records,
        config: cfg.clone(),
        wall_time_s: started.elapsed().as_secs_f64(),
        estimates: BTreeMap::new(),
    })
}
