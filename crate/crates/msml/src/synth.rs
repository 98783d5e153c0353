//! Synthetic dataset generation from a fully specified model, and recovery
//! scoring of a fit against the generating truth.

use rand::Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{prior_state_draw, Param, PosteriorSample};
use crate::model::{outcome_probs, Dataset, ModelPoint, ModelSpec, RecordInput};
use crate::posterior::{interval_from_draws, state_series, CredibleInterval};

/// Covariate column sampler. The first column must be the intercept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum CovariateKind {
    Intercept,
    Bernoulli(f64),
    Uniform(f64, f64),
}

/// Records per period.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum PeriodCounts {
    Fixed(usize),
    PerPeriod(Vec<usize>),
    PoissonRate(f64),
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GenConfig {
    pub n_periods: usize,
    pub counts: PeriodCounts,
    pub covariates: Vec<CovariateKind>,
}

impl GenConfig {
    fn validate(&self, spec: &ModelSpec) -> Result<()> {
        if self.n_periods == 0 {
            return Err(Error::InvalidInput("need at least one period".into()));
        }
        if self.covariates.len() != spec.n_covariates() {
            return Err(Error::InvalidInput(format!(
                "covariate sampler count {} does not match spec D = {}",
                self.covariates.len(),
                spec.n_covariates()
            )));
        }
        if self.covariates[0] != CovariateKind::Intercept {
            return Err(Error::InvalidInput(
                "covariate 0 must be the intercept sampler".into(),
            ));
        }
        if let PeriodCounts::PerPeriod(v) = &self.counts {
            if v.len() != self.n_periods {
                return Err(Error::InvalidInput(format!(
                    "per-period counts have length {}, expected {}",
                    v.len(),
                    self.n_periods
                )));
            }
        }
        if let PeriodCounts::PoissonRate(r) = self.counts {
            if r.is_nan() || r <= 0.0 {
                return Err(Error::InvalidInput("Poisson rate must be positive".into()));
            }
        }
        for k in &self.covariates {
            match *k {
                CovariateKind::Bernoulli(q) if !(0.0..=1.0).contains(&q) => {
                    return Err(Error::InvalidInput(format!(
                        "Bernoulli probability {q} outside [0,1]"
                    )));
                }
                CovariateKind::Uniform(a, b) if a.partial_cmp(&b) != Some(std::cmp::Ordering::Less) => {
                    return Err(Error::InvalidInput(format!(
                        "Uniform bounds ({a}, {b}) are not increasing"
                    )));
                }
                _ => {}
            }
        }
        Ok(())
    }
}

/// Draw a dataset from the model: states from the Markov chain (stationary
/// start), covariates from their configured samplers, outcomes from the
/// state's multinomial logit. Returns the dataset and the true state
/// sequence. Deterministic under a fixed RNG.
pub fn generate(
    spec: &ModelSpec,
    point: &ModelPoint,
    cfg: &GenConfig,
    rng: &mut impl Rng,
) -> Result<(Dataset, Vec<u8>)> {
    cfg.validate(spec)?;
    spec.check_coefs(&point.beta0, &point.beta1)?;
    if spec.switching() {
        if !(point.p01 > 0.0 && point.p01 < 1.0 && point.p10 > 0.0 && point.p10 < 1.0) {
            return Err(Error::InvalidInput(format!(
                "transition probabilities must lie in (0,1): ({}, {})",
                point.p01, point.p10
            )));
        }
        if point.p01 > point.p10 {
            return Err(Error::InvalidInput(format!(
                "ordering restriction violated: p01 = {} > p10 = {}",
                point.p01, point.p10
            )));
        }
    }
    let states = if spec.switching() {
        prior_state_draw(cfg.n_periods, point.p01, point.p10, rng)
    } else {
        vec![0u8; cfg.n_periods]
    };

    let mut records = Vec::new();
    for t in 0..cfg.n_periods {
        let n_t = match &cfg.counts {
            PeriodCounts::Fixed(n) => *n,
            PeriodCounts::PerPeriod(v) => v[t],
            PeriodCounts::PoissonRate(r) => {
                let pois = Poisson::new(*r).expect("validated rate");
                pois.sample(rng) as usize
            }
        };
        let beta = point.beta_for_state(states[t]);
        for _ in 0..n_t {
            let x: Vec<f64> = cfg
                .covariates
                .iter()
                .map(|k| match *k {
                    CovariateKind::Intercept => 1.0,
                    CovariateKind::Bernoulli(q) => (rng.random::<f64>() < q) as u8 as f64,
                    CovariateKind::Uniform(a, b) => a + (b - a) * rng.random::<f64>(),
                })
                .collect();
            let probs = outcome_probs(beta, &x)?;
            let u: f64 = rng.random();
            let mut outcome = spec.n_outcomes();
            let mut cum = 0.0;
            for (i, p) in probs.iter().enumerate() {
                cum += p;
                if u < cum {
                    outcome = i + 1;
                    break;
                }
            }
            if outcome > spec.n_outcomes() {
                outcome = spec.n_outcomes();
            }
            records.push(RecordInput { period: t + 1, outcome, covariates: x });
        }
    }
    let data = if records.is_empty() {
        Dataset::empty(cfg.n_periods, spec.n_outcomes(), spec.n_covariates())?
    } else {
        Dataset::from_records(cfg.n_periods, spec.n_outcomes(), records)?
    };
    Ok((data, states))
}

/// Recovery of one continuous parameter.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamRecovery {
    pub param: Param,
    pub truth: f64,
    pub interval: CredibleInterval,
    pub covered: bool,
}

/// Coverage and state-classification score of a fit against the truth.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RecoveryReport {
    pub params: Vec<ParamRecovery>,
    /// Fraction of continuous parameters whose interval covers the truth.
    pub coverage: f64,
    /// Mean over periods of 1{round(P(state=1)) == true state}; None for
    /// non-switching fits or when no true states were supplied.
    pub state_accuracy: Option<f64>,
}

/// Score a posterior sample against generating values: per-parameter interval
/// coverage at the given level plus state-sequence classification accuracy.
pub fn recovery_score(
    truth: &ModelPoint,
    true_states: Option<&[u8]>,
    sample: &PosteriorSample,
    level: f64,
) -> Result<RecoveryReport> {
    let rows = sample.spec.n_outcomes() - 1;
    let cols = sample.spec.n_covariates();
    if truth.beta0.n_rows() != rows || truth.beta0.n_cols() != cols {
        return Err(Error::InvalidInput(format!(
            "truth shape {}x{} does not match sample spec {}x{}",
            truth.beta0.n_rows(),
            truth.beta0.n_cols(),
            rows,
            cols
        )));
    }
    let mut params = Vec::new();
    for param in sample.params() {
        let true_value = match param {
            Param::Beta { state, outcome, cov } => match state {
                None | Some(0) => truth.beta0.get(outcome, cov),
                Some(_) => truth.beta1.get(outcome, cov),
            },
            Param::P01 => truth.p01,
            Param::P10 => truth.p10,
        };
        let draws = sample.pooled(&param);
        let interval = interval_from_draws(&draws, level)?;
        params.push(ParamRecovery {
            param,
            truth: true_value,
            covered: interval.contains(true_value),
            interval,
        });
    }
    let coverage = params.iter().filter(|p| p.covered).count() as f64 / params.len() as f64;
    let state_accuracy = match (true_states, sample.spec.switching()) {
        (Some(truth_s), true) => {
            let series = state_series(sample)?;
            if truth_s.len() != series.probs.len() {
                return Err(Error::InvalidInput(format!(
                    "true state sequence has length {}, expected {}",
                    truth_s.len(),
                    series.probs.len()
                )));
            }
            let hits = series
                .probs
                .iter()
                .zip(truth_s)
                .filter(|(&p, &s)| (p >= 0.5) as u8 == s)
                .count();
            Some(hits as f64 / truth_s.len() as f64)
        }
        _ => None,
    };
    Ok(RecoveryReport { params, coverage, state_accuracy })
}
