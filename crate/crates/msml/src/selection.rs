//! Marginal likelihood by the harmonic-mean estimator with bootstrap
//! confidence intervals, and Bayes-factor model comparison.
//!
//! The harmonic-mean estimator is known to be high-variance; the bootstrap
//! interval reported alongside the point estimate carries that uncertainty.
//! Candidate models are taken as equally probable a priori, so the posterior
//! odds ratio equals the Bayes factor.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::PosteriorSample;
use crate::stats::{log_sum_exp, quantile_sorted};

/// Log marginal likelihood with a bootstrap 95% interval.
#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct MarginalLik {
    pub log_ml: f64,
    pub ci95: (f64, f64),
    pub n_draws: usize,
}

pub const DEFAULT_BOOTSTRAP_RESAMPLES: usize = 1000;

fn harmonic_point(neg_ll: &[f64]) -> f64 {
    // log ML = log J - logsumexp(-LL_j), entirely in log space.
    (neg_ll.len() as f64).ln() - log_sum_exp(neg_ll)
}

/// Harmonic-mean log marginal likelihood of a set of per-draw
/// log-likelihoods, with a percentile bootstrap interval.
pub fn harmonic_mean_from_logliks(
    logliks: &[f64],
    n_boot: usize,
    seed: u64,
) -> Result<MarginalLik> {
    let j = logliks.len();
    if j < 100 {
        return Err(Error::SampleTooSmall { needed: 100, actual: j });
    }
    let neg: Vec<f64> = logliks.iter().map(|&x| -x).collect();
    let log_ml = harmonic_point(&neg);
    let mut rng = StdRng::seed_from_u64(seed);
    let mut boot = Vec::with_capacity(n_boot);
    let mut resample = vec![0.0; j];
    for _ in 0..n_boot {
        for slot in resample.iter_mut() {
            *slot = neg[rng.random_range(0..j)];
        }
        boot.push(harmonic_point(&resample));
    }
    boot.sort_by(|a, b| a.partial_cmp(b).expect("NaN bootstrap estimate"));
    let lower = quantile_sorted(&boot, 0.025).min(log_ml);
    let upper = quantile_sorted(&boot, 0.975).max(log_ml);
    Ok(MarginalLik { log_ml, ci95: (lower, upper), n_draws: j })
}

/// Harmonic-mean log marginal likelihood of a posterior sample (chains
/// pooled), using the cached per-draw log-likelihoods.
pub fn harmonic_mean_log_ml(sample: &PosteriorSample, seed: u64) -> Result<MarginalLik> {
    harmonic_mean_from_logliks(&sample.pooled_logliks(), DEFAULT_BOOTSTRAP_RESAMPLES, seed)
}

/// Log Bayes factor of model b over model a; positive favors b.
pub fn bayes_factor(a: &MarginalLik, b: &MarginalLik) -> f64 {
    b.log_ml - a.log_ml
}
