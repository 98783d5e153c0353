//! Posterior summaries: equal-tail credible intervals, the per-period state
//! probability series, the staged credible-interval restriction workflow,
//! and record-averaged outcome probabilities at the posterior means.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mcmc::{run_chains, McmcConfig, Param, PosteriorSample, PriorSpec};
use crate::model::{outcome_probs, CoefRole, Dataset, ModelSpec};
use crate::stats::{mean, quantile_sorted};

/// Equal-tail posterior interval: a/2 probability below and above.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CredibleInterval {
    pub level: f64,
    pub lower: f64,
    pub upper: f64,
    pub mean: f64,
}

impl CredibleInterval {
    pub fn contains(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Equal-tail interval of a draw set by interpolated order statistics.
pub fn interval_from_draws(draws: &[f64], level: f64) -> Result<CredibleInterval> {
    if draws.len() < 100 {
        return Err(Error::SampleTooSmall { needed: 100, actual: draws.len() });
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::InvalidInput(format!(
            "interval level must be in (0,1), got {level}"
        )));
    }
    let mut sorted = draws.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("NaN draw"));
    let a = 1.0 - level;
    let interval = CredibleInterval {
        level,
        lower: quantile_sorted(&sorted, a / 2.0),
        upper: quantile_sorted(&sorted, 1.0 - a / 2.0),
        mean: mean(draws),
    };
    debug_assert!(interval.lower <= interval.upper);
    Ok(interval)
}

/// Per-parameter equal-tail intervals, chains pooled.
pub fn summarize(
    sample: &PosteriorSample,
    level: f64,
) -> Result<Vec<(Param, CredibleInterval)>> {
    sample
        .params()
        .into_iter()
        .map(|p| {
            let draws = sample.pooled(&p);
            interval_from_draws(&draws, level).map(|ci| (p, ci))
        })
        .collect()
}

/// Posterior probability and standard deviation of the rare state per period.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct StateSeries {
    pub probs: Vec<f64>,
    pub stds: Vec<f64>,
}

/// Per-period posterior mean and standard deviation of the binary state.
/// For a 0/1 draw set the population standard deviation is exactly
/// sqrt(p(1-p)).
pub fn state_series(sample: &PosteriorSample) -> Result<StateSeries> {
    if !sample.spec.switching() {
        return Err(Error::InvalidInput(
            "state series requires a switching-model sample".into(),
        ));
    }
    let total = sample.n_total_draws();
    if total == 0 {
        return Err(Error::SampleTooSmall { needed: 1, actual: 0 });
    }
    let t_count = sample.n_periods;
    let mut probs = vec![0.0; t_count];
    for chain in &sample.chains {
        for theta in &chain.thetas {
            for (t, &s) in theta.states.iter().enumerate() {
                probs[t] += s as f64;
            }
        }
    }
    for p in probs.iter_mut() {
        *p /= total as f64;
    }
    let stds = probs.iter().map(|&p| (p * (1.0 - p)).max(0.0).sqrt()).collect();
    Ok(StateSeries { probs, stds })
}

/// Outcome of the staged restriction workflow.
#[derive(Debug)]
pub enum RestrictionOutcome {
    /// A genuine two-state model survived the restrictions.
    Switching {
        spec: ModelSpec,
        sample: PosteriorSample,
        trace: Vec<String>,
    },
    /// Every coefficient ended shared: the two states are indistinguishable
    /// and the model reduces to the single-state spec returned here.
    Collapsed { spec: ModelSpec, trace: Vec<String> },
}

impl RestrictionOutcome {
    pub fn trace(&self) -> &[String] {
        match self {
            RestrictionOutcome::Switching { trace, .. } => trace,
            RestrictionOutcome::Collapsed { trace, .. } => trace,
        }
    }
}

/// Staged significance restriction: three passes at the 60%, 85% and 95%
/// credible levels. Each pass zero-restricts non-intercept coefficients whose
/// interval covers zero (state-specific coefficients only when both states'
/// intervals do), then makes state-specific coefficients shared when the
/// interval of the per-draw state difference covers zero; the model is
/// refit whenever a pass changes it. If no state-specific coefficient
/// survives, the collapse to the single-state model is reported instead of a
/// switching fit.
pub fn restrict_workflow(
    data: &Dataset,
    initial: &ModelSpec,
    prior: &PriorSpec,
    config: &McmcConfig,
) -> Result<RestrictionOutcome> {
    if !initial.switching() {
        return Err(Error::InvalidInput(
            "restriction workflow needs a switching spec".into(),
        ));
    }
    let mut spec = initial.clone();
    let mut sample = run_chains(data, &spec, prior, config)?;
    let mut trace = Vec::new();
    for (pass, level) in [0.60, 0.85, 0.95].into_iter().enumerate() {
        let next = restricted_spec(&spec, &sample, level, &mut trace)?;
        if next != spec {
            spec = next;
            if !spec.has_state_specific() {
                trace.push("all coefficients shared: states collapse".into());
                return Ok(RestrictionOutcome::Collapsed {
                    spec: spec.collapse_to_ml(),
                    trace,
                });
            }
            let cfg = McmcConfig {
                seed: crate::mcmc::derive_seed(config.seed, 1000 + pass as u64),
                ..config.clone()
            };
            sample = run_chains(data, &spec, prior, &cfg)?;
        }
    }
    if spec.has_state_specific() {
        Ok(RestrictionOutcome::Switching { spec, sample, trace })
    } else {
        trace.push("all coefficients shared: states collapse".into());
        Ok(RestrictionOutcome::Collapsed { spec: spec.collapse_to_ml(), trace })
    }
}

/// One restriction pass evaluated on a fitted sample: returns the spec with
/// the level's zero restrictions and equality merges applied.
pub fn restriction_pass(
    spec: &ModelSpec,
    sample: &PosteriorSample,
    level: f64,
) -> Result<ModelSpec> {
    restricted_spec(spec, sample, level, &mut Vec::new())
}

/// One restriction pass evaluated on a fitted sample; zero restrictions are
/// applied before equality merges, both read from the same draws.
fn restricted_spec(
    spec: &ModelSpec,
    sample: &PosteriorSample,
    level: f64,
    trace: &mut Vec<String>,
) -> Result<ModelSpec> {
    let mut next = spec.clone();
    // Zero phase (intercepts exempt).
    for i in 0..spec.n_outcomes() - 1 {
        for d in 1..spec.n_covariates() {
            match spec.role(i, d) {
                CoefRole::Excluded => {}
                CoefRole::Shared => {
                    let draws = sample.pooled(&Param::Beta { state: None, outcome: i, cov: d });
                    if interval_from_draws(&draws, level)?.contains(0.0) {
                        next = next.with_role(i, d, CoefRole::Excluded)?;
                        trace.push(format!(
                            "{:.0}% pass: beta[{}][{}] restricted to zero",
                            level * 100.0,
                            i + 1,
                            d
                        ));
                    }
                }
                CoefRole::StateSpecific => {
                    let d0 = sample.pooled(&Param::Beta { state: Some(0), outcome: i, cov: d });
                    let d1 = sample.pooled(&Param::Beta { state: Some(1), outcome: i, cov: d });
                    let ci0 = interval_from_draws(&d0, level)?;
                    let ci1 = interval_from_draws(&d1, level)?;
                    if ci0.contains(0.0) && ci1.contains(0.0) {
                        next = next.with_role(i, d, CoefRole::Excluded)?;
                        trace.push(format!(
                            "{:.0}% pass: beta[{}][{}] restricted to zero in both states",
                            level * 100.0,
                            i + 1,
                            d
                        ));
                    }
                }
            }
        }
    }
    // Merge phase on the state-specific coefficients that survived.
    for i in 0..spec.n_outcomes() - 1 {
        for d in 0..spec.n_covariates() {
            if next.role(i, d) != CoefRole::StateSpecific {
                continue;
            }
            let d0 = sample.pooled(&Param::Beta { state: Some(0), outcome: i, cov: d });
            let d1 = sample.pooled(&Param::Beta { state: Some(1), outcome: i, cov: d });
            let diffs: Vec<f64> = d0.iter().zip(&d1).map(|(a, b)| a - b).collect();
            if interval_from_draws(&diffs, level)?.contains(0.0) {
                next = next.with_role(i, d, CoefRole::Shared)?;
                trace.push(format!(
                    "{:.0}% pass: beta[{}][{}] restricted to be equal across states",
                    level * 100.0,
                    i + 1,
                    d
                ));
            }
        }
    }
    Ok(next)
}

/// Record-averaged outcome probabilities per state with the coefficients set
/// to their posterior means.
pub fn averaged_outcome_probs(
    sample: &PosteriorSample,
    data: &Dataset,
) -> Result<[Vec<f64>; 2]> {
    if data.is_empty() {
        return Err(Error::InvalidInput("dataset has no records".into()));
    }
    let point = sample.posterior_mean_point();
    let i_count = data.n_outcomes();
    let mut out = [vec![0.0; i_count], vec![0.0; i_count]];
    for (s, avg) in out.iter_mut().enumerate() {
        let beta = point.beta_for_state(s as u8);
        for n in 0..data.n_records() {
            let p = outcome_probs(beta, data.xs(n))?;
            for i in 0..i_count {
                avg[i] += p[i] / data.n_records() as f64;
            }
        }
    }
    Ok(out)
}
