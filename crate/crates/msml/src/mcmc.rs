//! Bayesian estimation of the switching model by Metropolis-within-Gibbs:
//! adaptive random-walk updates of the coefficient blocks, conjugate draws of
//! the transition probabilities under the ordering restriction, and exact
//! forward-filtering backward-sampling of the latent state sequence.
//!
//! Chains are independent units with counter-seeded RNG streams, so runs are
//! reproducible for a fixed master seed regardless of thread scheduling.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rand_distr::{Beta as BetaDist, Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mle::{fit_ml, MleFit, MleOptions};
use crate::model::{
    log_outcome_prob_buf, stationary_probs, CoefMatrix, CoefRole, Dataset, ModelPoint, ModelSpec,
    Theta,
};
use crate::stats::log_sum_exp2;

/// Prior specification. Coefficients are independent normals centered at
/// zero with a large standard deviation (nearly flat); the transition
/// probabilities carry a flat Beta(1,1) prior truncated to `p01 <= p10`; the
/// state-sequence prior is the Markov chain implied by the transition
/// probabilities with the initial state drawn from the stationary
/// distribution.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PriorSpec {
    pub sigma_beta: f64,
}

impl Default for PriorSpec {
    fn default() -> Self {
        Self { sigma_beta: 100.0 }
    }
}

impl PriorSpec {
    fn validate(&self) -> Result<()> {
        if self.sigma_beta.is_nan() || self.sigma_beta <= 0.0 {
            return Err(Error::InvalidInput(format!(
                "sigma_beta must be positive, got {}",
                self.sigma_beta
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct McmcConfig {
    pub n_chains: usize,
    pub n_burnin: usize,
    pub n_keep: usize,
    pub thin: usize,
    pub seed: u64,
    /// Initial random-walk scale per coefficient block.
    pub initial_step: f64,
    /// Acceptance rate the burn-in adaptation steers toward.
    pub target_accept: f64,
}

impl Default for McmcConfig {
    fn default() -> Self {
        Self {
            n_chains: 4,
            n_burnin: 1000,
            n_keep: 2000,
            thin: 1,
            seed: 0,
            initial_step: 0.1,
            target_accept: 0.3,
        }
    }
}

impl McmcConfig {
    fn validate(&self) -> Result<()> {
        if self.n_chains == 0 || self.n_burnin == 0 || self.n_keep == 0 || self.thin == 0 {
            return Err(Error::InvalidInput(
                "chain, burn-in, keep and thinning counts must all be positive".into(),
            ));
        }
        if self.initial_step.is_nan() || self.initial_step <= 0.0 {
            return Err(Error::InvalidInput("initial_step must be positive".into()));
        }
        if !(self.target_accept > 0.0 && self.target_accept < 1.0) {
            return Err(Error::InvalidInput("target_accept must be in (0,1)".into()));
        }
        Ok(())
    }
}

/// One updatable coefficient block: the shared or per-state entries of one
/// outcome's coefficient row.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BetaBlock {
    pub outcome: usize,
    pub scope: BlockScope,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BlockScope {
    Shared,
    State0,
    State1,
}

impl BlockScope {
    fn label(self) -> &'static str {
        match self {
            BlockScope::Shared => "shared",
            BlockScope::State0 => "s0",
            BlockScope::State1 => "s1",
        }
    }
}

/// Acceptance bookkeeping for one block in one chain.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct BlockStats {
    pub label: String,
    pub proposed: u64,
    pub accepted: u64,
    /// Final (post-adaptation) random-walk scale.
    pub step: f64,
}

impl BlockStats {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }
}

/// Kept draws of one chain.
#[derive(Debug, Clone)]
pub struct ChainSample {
    pub thetas: Vec<Theta>,
    /// Cached log-likelihood per kept draw.
    pub logliks: Vec<f64>,
    pub blocks: Vec<BlockStats>,
}

/// Posterior sample across chains for one model spec.
#[derive(Debug, Clone)]
pub struct PosteriorSample {
    pub spec: ModelSpec,
    pub n_periods: usize,
    pub chains: Vec<ChainSample>,
    pub warnings: Vec<String>,
}

/// A continuous model parameter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Param {
    /// `state: None` marks a coefficient shared across states.
    Beta {
        state: Option<u8>,
        outcome: usize,
        cov: usize,
    },
    P01,
    P10,
}

impl std::fmt::Display for Param {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Param::Beta { state: None, outcome, cov } => {
                write!(f, "beta[{}][{}]", outcome + 1, cov)
            }
            Param::Beta { state: Some(s), outcome, cov } => {
                write!(f, "beta{}[{}][{}]", s, outcome + 1, cov)
            }
            Param::P01 => write!(f, "p01"),
            Param::P10 => write!(f, "p10"),
        }
    }
}

impl PosteriorSample {
    /// Continuous parameters of this model in canonical order.
    pub fn params(&self) -> Vec<Param> {
        let mut out = Vec::new();
        for i in 0..self.spec.n_outcomes() - 1 {
            for d in 0..self.spec.n_covariates() {
                match self.spec.role(i, d) {
                    CoefRole::Excluded => {}
                    CoefRole::Shared => out.push(Param::Beta {
                        state: None,
                        outcome: i,
                        cov: d,
                    }),
                    CoefRole::StateSpecific => {
                        out.push(Param::Beta { state: Some(0), outcome: i, cov: d });
                        out.push(Param::Beta { state: Some(1), outcome: i, cov: d });
                    }
                }
            }
        }
        if self.spec.switching() {
            out.push(Param::P01);
            out.push(Param::P10);
        }
        out
    }

    pub fn extract(theta: &Theta, param: &Param) -> f64 {
        match *param {
            Param::Beta { state, outcome, cov } => match state {
                None | Some(0) => theta.beta0.get(outcome, cov),
                Some(_) => theta.beta1.get(outcome, cov),
            },
            Param::P01 => theta.p01,
            Param::P10 => theta.p10,
        }
    }

    /// Per-chain draw arrays for one parameter.
    pub fn per_chain(&self, param: &Param) -> Vec<Vec<f64>> {
        self.chains
            .iter()
            .map(|c| c.thetas.iter().map(|t| Self::extract(t, param)).collect())
            .collect()
    }

    /// All chains pooled, chain-major order.
    pub fn pooled(&self, param: &Param) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.thetas.iter().map(|t| Self::extract(t, param)))
            .collect()
    }

    pub fn pooled_logliks(&self) -> Vec<f64> {
        self.chains
            .iter()
            .flat_map(|c| c.logliks.iter().copied())
            .collect()
    }

    pub fn max_observed_loglik(&self) -> f64 {
        self.pooled_logliks()
            .into_iter()
            .fold(f64::NEG_INFINITY, f64::max)
    }

    pub fn n_total_draws(&self) -> usize {
        self.chains.iter().map(|c| c.thetas.len()).sum()
    }

    /// Posterior-mean continuous point (coefficients and transitions).
    pub fn posterior_mean_point(&self) -> ModelPoint {
        let rows = self.spec.n_outcomes() - 1;
        let cols = self.spec.n_covariates();
        let mut beta0 = CoefMatrix::zeros(rows, cols);
        let mut beta1 = CoefMatrix::zeros(rows, cols);
        let total = self.n_total_draws() as f64;
        for chain in &self.chains {
            for theta in &chain.thetas {
                for i in 0..rows {
                    for d in 0..cols {
                        beta0.set(i, d, beta0.get(i, d) + theta.beta0.get(i, d) / total);
                        beta1.set(i, d, beta1.get(i, d) + theta.beta1.get(i, d) / total);
                    }
                }
            }
        }
        let (p01, p10) = if self.spec.switching() {
            let p01 = self.pooled(&Param::P01);
            let p10 = self.pooled(&Param::P10);
            (crate::stats::mean(&p01), crate::stats::mean(&p10))
        } else {
            (0.0, 1.0)
        };
        ModelPoint { beta0, beta1, p01, p10 }
    }
}

/// SplitMix64 stream derivation: one master seed, one independent stream per
/// chain or replicate.
pub fn derive_seed(master: u64, stream: u64) -> u64 {
    let mut z = master.wrapping_add(stream.wrapping_mul(0x9e3779b97f4a7c15));
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d049bb133111eb);
    z ^ (z >> 31)
}

/// Per-period log emission weights: sum of record log-probabilities under one
/// coefficient matrix. Empty periods carry weight zero (emission one).
pub(crate) fn period_log_emissions_into(
    data: &Dataset,
    beta: &CoefMatrix,
    util: &mut [f64],
    out: &mut [f64],
) {
    out.fill(0.0);
    for n in 0..data.n_records() {
        out[data.period(n)] += log_outcome_prob_buf(beta, data.xs(n), data.outcome(n), util);
    }
}

/// One exact draw of the state sequence from its conditional distribution
/// given data, coefficients and transition probabilities. Forward filtering
/// runs in log space per period, so long low-likelihood stretches cannot
/// underflow; backward sampling then draws the sequence jointly.
pub fn sample_states(
    data: &Dataset,
    beta0: &CoefMatrix,
    beta1: &CoefMatrix,
    p01: f64,
    p10: f64,
    rng: &mut impl Rng,
) -> Result<Vec<u8>> {
    for &(p, name) in &[(p01, "p01"), (p10, "p10")] {
        if !(p > 0.0 && p < 1.0) {
            return Err(Error::InvalidInput(format!(
                "{name} must lie in (0,1), got {p}"
            )));
        }
    }
    if beta0.n_cols() != data.n_covariates() || beta1.n_cols() != data.n_covariates() {
        return Err(Error::DimensionMismatch {
            expected: data.n_covariates(),
            actual: beta0.n_cols(),
        });
    }
    let t_count = data.n_periods();
    let mut util = vec![0.0; data.n_outcomes()];
    let mut le0 = vec![0.0; t_count];
    let mut le1 = vec![0.0; t_count];
    period_log_emissions_into(data, beta0, &mut util, &mut le0);
    period_log_emissions_into(data, beta1, &mut util, &mut le1);
    Ok(ffbs(&le0, &le1, p01, p10, rng))
}

/// Forward-filter / backward-sample on precomputed log emissions.
pub(crate) fn ffbs(le0: &[f64], le1: &[f64], p01: f64, p10: f64, rng: &mut impl Rng) -> Vec<u8> {
    let t_count = le0.len();
    debug_assert_eq!(le1.len(), t_count);
    let (pbar0, pbar1) = stationary_probs(p01, p10).expect("valid transition probabilities");
    let lt = [
        [(1.0 - p01).ln(), p01.ln()],
        [p10.ln(), (1.0 - p10).ln()],
    ];
    // Normalized log filtered probabilities per period.
    let mut la = vec![[0.0f64; 2]; t_count];
    let mut w0 = pbar0.ln() + le0[0];
    let mut w1 = pbar1.ln() + le1[0];
    let mut norm = log_sum_exp2(w0, w1);
    la[0] = normalize2(w0, w1, norm);
    for t in 1..t_count {
        w0 = le0[t] + log_sum_exp2(la[t - 1][0] + lt[0][0], la[t - 1][1] + lt[1][0]);
        w1 = le1[t] + log_sum_exp2(la[t - 1][0] + lt[0][1], la[t - 1][1] + lt[1][1]);
        norm = log_sum_exp2(w0, w1);
        la[t] = normalize2(w0, w1, norm);
    }
    let mut states = vec![0u8; t_count];
    states[t_count - 1] = draw_from_log2(la[t_count - 1][0], la[t_count - 1][1], rng);
    for t in (0..t_count - 1).rev() {
        let next = states[t + 1] as usize;
        states[t] = draw_from_log2(la[t][0] + lt[0][next], la[t][1] + lt[1][next], rng);
    }
    states
}

fn normalize2(w0: f64, w1: f64, norm: f64) -> [f64; 2] {
    if norm.is_finite() {
        [w0 - norm, w1 - norm]
    } else {
        // Both states impossible: fall back to an uninformative split.
        [(0.5f64).ln(), (0.5f64).ln()]
    }
}

fn draw_from_log2(w0: f64, w1: f64, rng: &mut impl Rng) -> u8 {
    let m = w0.max(w1);
    if !m.is_finite() {
        return (rng.random::<f64>() < 0.5) as u8;
    }
    let e0 = (w0 - m).exp();
    let e1 = (w1 - m).exp();
    let p1 = e1 / (e0 + e1);
    (rng.random::<f64>() < p1) as u8
}

/// Conjugate update of the transition probabilities given a state sequence:
/// independent Beta(1 + transitions, 1 + stays) draws, rejected and redrawn
/// until the label-ordering restriction `p01 <= p10` holds.
pub fn sample_transition_probs(states: &[u8], rng: &mut impl Rng) -> Result<(f64, f64)> {
    if states.iter().any(|&s| s > 1) {
        return Err(Error::InvalidInput("state values must be 0 or 1".into()));
    }
    let mut n = [[0u64; 2]; 2];
    for w in states.windows(2) {
        n[w[0] as usize][w[1] as usize] += 1;
    }
    let d01 = BetaDist::new(1.0 + n[0][1] as f64, 1.0 + n[0][0] as f64)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    let d10 = BetaDist::new(1.0 + n[1][0] as f64, 1.0 + n[1][1] as f64)
        .map_err(|e| Error::InvalidInput(e.to_string()))?;
    for _ in 0..10_000_000u64 {
        let p01 = d01.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
        let p10 = d10.sample(rng).clamp(f64::MIN_POSITIVE, 1.0 - 1e-16);
        if p01 <= p10 {
            return Ok((p01, p10));
        }
    }
    unreachable!("truncated Beta rejection cannot stall for valid counts")
}

/// Transition counts of a state sequence, `counts[a][b]` = moves a -> b.
pub fn transition_counts(states: &[u8]) -> [[u64; 2]; 2] {
    let mut n = [[0u64; 2]; 2];
    for w in states.windows(2) {
        n[w[0] as usize][w[1] as usize] += 1;
    }
    n
}

/// One random-walk Metropolis update of a coefficient block. Reference
/// implementation used directly by tests and small runs; `run_chains` applies
/// the same update through cached per-period emissions.
pub fn sample_beta_block(
    data: &Dataset,
    spec: &ModelSpec,
    theta: &mut Theta,
    block: &BetaBlock,
    step: f64,
    prior: &PriorSpec,
    rng: &mut impl Rng,
) -> Result<bool> {
    prior.validate()?;
    let entries = block_entries(spec, block)?;
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut candidate = theta.clone();
    let mut dlp = 0.0;
    for &d in &entries {
        let old = match block.scope {
            BlockScope::State1 => candidate.beta1.get(block.outcome, d),
            _ => candidate.beta0.get(block.outcome, d),
        };
        let new = old + step * normal.sample(rng);
        match block.scope {
            BlockScope::Shared => {
                candidate.beta0.set(block.outcome, d, new);
                candidate.beta1.set(block.outcome, d, new);
            }
            BlockScope::State0 => candidate.beta0.set(block.outcome, d, new),
            BlockScope::State1 => candidate.beta1.set(block.outcome, d, new),
        }
        dlp += normal_logpdf_diff(new, old, prior.sigma_beta);
    }
    let ll_old = crate::model::log_likelihood(data, spec, theta);
    let ll_new = crate::model::log_likelihood(data, spec, &candidate);
    let log_ratio = ll_new - ll_old + dlp;
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept {
        *theta = candidate;
    }
    Ok(accept)
}

fn normal_logpdf_diff(new: f64, old: f64, sigma: f64) -> f64 {
    -0.5 * (new * new - old * old) / (sigma * sigma)
}

fn block_entries(spec: &ModelSpec, block: &BetaBlock) -> Result<Vec<usize>> {
    if block.outcome >= spec.n_outcomes() - 1 {
        return Err(Error::InvalidInput(format!(
            "block outcome {} out of range",
            block.outcome + 1
        )));
    }
    let want = match block.scope {
        BlockScope::Shared => CoefRole::Shared,
        _ => CoefRole::StateSpecific,
    };
    let entries: Vec<usize> = (0..spec.n_covariates())
        .filter(|&d| spec.role(block.outcome, d) == want)
        .collect();
    if entries.is_empty() {
        return Err(Error::InvalidInput(format!(
            "block (outcome {}, {}) has no coefficients",
            block.outcome + 1,
            block.scope.label()
        )));
    }
    Ok(entries)
}

fn blocks_for(spec: &ModelSpec) -> Vec<(BetaBlock, Vec<usize>)> {
    let mut out = Vec::new();
    for i in 0..spec.n_outcomes() - 1 {
        for scope in [BlockScope::Shared, BlockScope::State0, BlockScope::State1] {
            if !spec.switching() && scope != BlockScope::Shared {
                continue;
            }
            let block = BetaBlock { outcome: i, scope };
            if let Ok(entries) = block_entries(spec, &block) {
                out.push((block, entries));
            }
        }
    }
    out
}

/// Run independent MCMC chains and collect thinned post-burn-in draws.
///
/// Starting points are overdispersed: the single-state MLE point jittered by
/// +-2 standard errors per chain where that fit succeeds, prior draws
/// otherwise. Each sweep updates every coefficient block, then the transition
/// probabilities, then the state sequence. Step scales adapt toward the
/// target acceptance rate during burn-in only and stay frozen afterwards.
pub fn run_chains(
    data: &Dataset,
    spec: &ModelSpec,
    prior: &PriorSpec,
    config: &McmcConfig,
) -> Result<PosteriorSample> {
    prior.validate()?;
    config.validate()?;
    if data.n_covariates() != spec.n_covariates() || data.n_outcomes() != spec.n_outcomes() {
        return Err(Error::InvalidInput(format!(
            "spec shape ({}, {}) does not match dataset ({}, {})",
            spec.n_outcomes(),
            spec.n_covariates(),
            data.n_outcomes(),
            data.n_covariates()
        )));
    }
    let mle_start: Option<MleFit> = fit_ml(data, &spec.collapse_to_ml(), &MleOptions::default()).ok();
    let split_start = if spec.switching() && spec.has_state_specific() {
        cluster_split_starts(data, spec)
    } else {
        None
    };

    let chains: Vec<Result<ChainSample>> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| {
            run_one_chain(
                data,
                spec,
                prior,
                config,
                mle_start.as_ref(),
                split_start.as_ref(),
                c as u64,
            )
        })
        .collect();
    let mut collected = Vec::with_capacity(chains.len());
    for c in chains {
        collected.push(c?);
    }

    let mut warnings = Vec::new();
    for (ci, chain) in collected.iter().enumerate() {
        for b in &chain.blocks {
            let r = b.rate();
            if r.is_finite() && !(0.1..=0.6).contains(&r) {
                warnings.push(format!(
                    "chain {}: block {} acceptance rate {:.3} outside [0.1, 0.6]",
                    ci, b.label, r
                ));
            }
        }
    }
    Ok(PosteriorSample {
        spec: spec.clone(),
        n_periods: data.n_periods(),
        chains: collected,
        warnings,
    })
}

#[allow(clippy::too_many_arguments)]
fn run_one_chain(
    data: &Dataset,
    spec: &ModelSpec,
    prior: &PriorSpec,
    config: &McmcConfig,
    mle: Option<&MleFit>,
    split: Option<&(MleFit, MleFit, f64, f64)>,
    chain_idx: u64,
) -> Result<ChainSample> {
    let mut rng = StdRng::seed_from_u64(derive_seed(config.seed, chain_idx));
    let t_count = data.n_periods();

    // Overdispersed start. State-specific coefficients jitter with opposite
    // signs around the MLE point so every chain begins with the two states
    // already pulled apart; a symmetric start instead risks the quasi
    // absorbing regime where one state empties out and its coefficients
    // drift across the flat prior before the states manage to separate.
    let rows = spec.n_outcomes() - 1;
    let cols = spec.n_covariates();
    let mut theta = Theta::zero(spec, t_count);
    for i in 0..rows {
        for d in 0..cols {
            match spec.role(i, d) {
                CoefRole::Excluded => {}
                CoefRole::Shared => {
                    let v = start_value(mle, i, d, prior, &mut rng);
                    theta.beta0.set(i, d, v);
                    theta.beta1.set(i, d, v);
                }
                CoefRole::StateSpecific => match split {
                    Some((fit0, fit1, _, _)) => {
                        theta.beta0.set(i, d, start_value(Some(fit0), i, d, prior, &mut rng));
                        theta.beta1.set(i, d, start_value(Some(fit1), i, d, prior, &mut rng));
                    }
                    None => match mle_entry(mle, i, d) {
                        Some((est, se)) => {
                            let u: f64 = rng.random::<f64>() * 2.0 * se;
                            let sign = if rng.random::<f64>() < 0.5 { 1.0 } else { -1.0 };
                            theta.beta0.set(i, d, est - sign * u);
                            theta.beta1.set(i, d, est + sign * u);
                        }
                        None => {
                            theta.beta0.set(i, d, start_value(mle, i, d, prior, &mut rng));
                            theta.beta1.set(i, d, start_value(mle, i, d, prior, &mut rng));
                        }
                    },
                },
            }
        }
    }
    if spec.switching() {
        if let Some((_, _, p01, p10)) = split {
            // Jitter around the split's transition estimates, keeping the
            // ordering restriction.
            let j0 = (p01 + 0.08 * (rng.random::<f64>() - 0.5)).clamp(0.005, 0.995);
            let j1 = (p10 + 0.08 * (rng.random::<f64>() - 0.5)).clamp(0.005, 0.995);
            theta.p01 = j0.min(j1);
            theta.p10 = j0.max(j1);
        } else {
            loop {
                let a: f64 = rng.random();
                let b: f64 = rng.random();
                if a <= b {
                    theta.p01 = a.clamp(1e-12, 1.0 - 1e-12);
                    theta.p10 = b.clamp(1e-12, 1.0 - 1e-12);
                    break;
                }
            }
        }
    } else {
        theta.p01 = 0.0;
        theta.p10 = 1.0;
    }

    // Emission caches per state; non-switching chains only maintain state 0.
    let mut util = vec![0.0; data.n_outcomes()];
    let mut le0 = vec![0.0; t_count];
    let mut le1 = vec![0.0; t_count];
    let mut cand0 = vec![0.0; t_count];
    let mut cand1 = vec![0.0; t_count];
    period_log_emissions_into(data, &theta.beta0, &mut util, &mut le0);
    if spec.switching() {
        period_log_emissions_into(data, &theta.beta1, &mut util, &mut le1);
        // Start the state sequence at its conditional given the started
        // coefficients and transitions.
        theta.states = ffbs(&le0, &le1, theta.p01, theta.p10, &mut rng);
    }

    let blocks = blocks_for(spec);
    let mut steps = vec![config.initial_step; blocks.len()];
    let mut kept_stats: Vec<(u64, u64)> = vec![(0, 0); blocks.len()];
    let mut adapt_iter: Vec<u64> = vec![0; blocks.len()];

    let total_sweeps = config.n_burnin + config.n_keep * config.thin;
    let mut thetas = Vec::with_capacity(config.n_keep);
    let mut logliks = Vec::with_capacity(config.n_keep);

    for sweep in 0..total_sweeps {
        let adapting = sweep < config.n_burnin;
        for (bi, (block, entries)) in blocks.iter().enumerate() {
            let accepted = propose_block(
                data, spec, &mut theta, block, entries, steps[bi], prior, &mut rng, &mut util,
                &mut le0, &mut le1, &mut cand0, &mut cand1,
            );
            if adapting {
                adapt_iter[bi] += 1;
                let gamma = (adapt_iter[bi] as f64).powf(-0.6);
                let sign = if accepted { 1.0 - config.target_accept } else { -config.target_accept };
                steps[bi] = (steps[bi].ln() + gamma * sign).exp().clamp(1e-8, 1e8);
            } else {
                kept_stats[bi].0 += 1;
                if accepted {
                    kept_stats[bi].1 += 1;
                }
            }
        }
        if spec.switching() {
            let (p01, p10) = sample_transition_probs(&theta.states, &mut rng)?;
            theta.p01 = p01;
            theta.p10 = p10;
            theta.states = ffbs(&le0, &le1, theta.p01, theta.p10, &mut rng);
            // Label-swap move: propose exchanging the two states' coefficient
            // matrices together with the flipped state sequence, keeping the
            // transition probabilities. The likelihood is invariant under
            // this relabeling, so the Metropolis ratio reduces to the state
            // sequence prior ratio; a chain sitting in the mirrored labeling
            // mode accepts and realigns with the ordering restriction.
            let flipped: Vec<u8> = theta.states.iter().map(|&s| 1 - s).collect();
            let log_ratio = state_sequence_log_prob(&flipped, theta.p01, theta.p10)
                - state_sequence_log_prob(&theta.states, theta.p01, theta.p10);
            if log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio {
                std::mem::swap(&mut theta.beta0, &mut theta.beta1);
                std::mem::swap(&mut le0, &mut le1);
                theta.states = flipped;
            }
        }
        if sweep >= config.n_burnin && (sweep - config.n_burnin).is_multiple_of(config.thin) {
            let ll = if spec.switching() {
                theta
                    .states
                    .iter()
                    .enumerate()
                    .map(|(t, &s)| if s == 0 { le0[t] } else { le1[t] })
                    .sum()
            } else {
                le0.iter().sum()
            };
            thetas.push(theta.clone());
            logliks.push(ll);
        }
    }

    let block_stats = blocks
        .iter()
        .enumerate()
        .map(|(bi, (block, _))| BlockStats {
            label: format!("beta[{}].{}", block.outcome + 1, block.scope.label()),
            proposed: kept_stats[bi].0,
            accepted: kept_stats[bi].1,
            step: steps[bi],
        })
        .collect();
    Ok(ChainSample {
        thetas,
        logliks,
        blocks: block_stats,
    })
}


/// Log prior probability of a state sequence under the Markov chain with a
/// stationary initial state.
pub(crate) fn state_sequence_log_prob(states: &[u8], p01: f64, p10: f64) -> f64 {
    let (pbar0, pbar1) = stationary_probs(p01, p10).expect("valid transition probabilities");
    let mut lp = if states[0] == 0 { pbar0.ln() } else { pbar1.ln() };
    for w in states.windows(2) {
        lp += match (w[0], w[1]) {
            (0, 0) => (1.0 - p01).ln(),
            (0, 1) => p01.ln(),
            (1, 0) => p10.ln(),
            _ => (1.0 - p10).ln(),
        };
    }
    lp
}



/// Data-informed starting points for the two states: periods are split by
/// their outcome-frequency profile (median cut along the leading principal
/// direction), each half gets its own single-state MLE, and the split's
/// transition counts give starting transition probabilities. The larger
/// cluster plays state 0, matching the label-ordering restriction.
///
/// Returns `None` when the data cannot support the split (too few usable
/// periods, or a cluster MLE fails); callers then fall back to jittering the
/// pooled MLE symmetrically.
fn cluster_split_starts(
    data: &Dataset,
    spec: &ModelSpec,
) -> Option<(MleFit, MleFit, f64, f64)> {
    let t_count = data.n_periods();
    let i_count = data.n_outcomes();
    let mut used_periods = Vec::new();
    let mut freqs = Vec::new();
    for t in 0..t_count {
        let n_t = data.records_in_period(t);
        if n_t == 0 {
            continue;
        }
        let mut f = vec![0.0f64; i_count];
        for r in data.period_records(t) {
            f[data.outcome(r)] += 1.0 / n_t as f64;
        }
        used_periods.push(t);
        freqs.push(f);
    }
    if used_periods.len() < 8 {
        return None;
    }
    // Leading principal direction of the frequency profiles.
    let m = freqs.len() as f64;
    let mut mean = vec![0.0; i_count];
    for f in &freqs {
        for (i, &v) in f.iter().enumerate() {
            mean[i] += v / m;
        }
    }
    let mut cov = vec![0.0; i_count * i_count];
    for f in &freqs {
        for a in 0..i_count {
            for b in 0..i_count {
                cov[a * i_count + b] += (f[a] - mean[a]) * (f[b] - mean[b]) / m;
            }
        }
    }
    let mut v: Vec<f64> = (0..i_count).map(|k| 0.1 * k as f64).collect();
    v[0] = 1.0;
    for _ in 0..60 {
        let mut next = vec![0.0; i_count];
        for a in 0..i_count {
            for b in 0..i_count {
                next[a] += cov[a * i_count + b] * v[b];
            }
        }
        let norm = next.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm < 1e-14 {
            return None;
        }
        for x in next.iter_mut() {
            *x /= norm;
        }
        v = next;
    }
    let mut scores: Vec<f64> = freqs
        .iter()
        .map(|f| f.iter().zip(&v).map(|(a, b)| (a - 0.0) * b).sum())
        .collect();
    let med = crate::stats::median(&scores);
    // Assignment per used period; ties go to the high cluster.
    let mut assign = vec![0u8; t_count];
    let mut high = 0usize;
    for (&t, score) in used_periods.iter().zip(&scores) {
        if *score >= med {
            assign[t] = 1;
            high += 1;
        }
    }
    let low = used_periods.len() - high;
    if high == 0 || low == 0 {
        return None;
    }
    // Larger cluster is state 0.
    if high > low {
        for a in assign.iter_mut() {
            *a ^= 1;
        }
    }
    scores.clear();

    let ml_spec = spec.collapse_to_ml();
    let mut cluster_records: [Vec<crate::model::RecordInput>; 2] = [Vec::new(), Vec::new()];
    for r in 0..data.n_records() {
        let c = assign[data.period(r)] as usize;
        cluster_records[c].push(crate::model::RecordInput {
            period: 1,
            outcome: data.outcome(r) + 1,
            covariates: data.xs(r).to_vec(),
        });
    }
    let opts = MleOptions::default();
    let mut fits = Vec::new();
    for recs in cluster_records {
        if recs.len() < ml_spec.n_free_beta() + 5 {
            return None;
        }
        let sub = Dataset::from_records(1, i_count, recs).ok()?;
        fits.push(fit_ml(&sub, &ml_spec, &opts).ok()?);
    }
    let fit1 = fits.pop().expect("two fits");
    let fit0 = fits.pop().expect("two fits");
    // Transition probabilities implied by the split, mapped into the
    // restricted triangle.
    let full_assign: Vec<u8> = assign;
    let counts = transition_counts(&full_assign);
    let from0 = (counts[0][0] + counts[0][1]).max(1) as f64;
    let from1 = (counts[1][0] + counts[1][1]).max(1) as f64;
    let mut p01 = (counts[0][1] as f64 / from0).clamp(0.02, 0.98);
    let mut p10 = (counts[1][0] as f64 / from1).clamp(0.02, 0.98);
    if p01 > p10 {
        std::mem::swap(&mut p01, &mut p10);
    }
    Some((fit0, fit1, p01, p10))
}

fn mle_entry(mle: Option<&MleFit>, outcome: usize, cov: usize) -> Option<(f64, f64)> {
    let fit = mle?;
    fit.slot(outcome, cov)?;
    Some((fit.beta_hat.get(outcome, cov), fit.se.get(outcome, cov)))
}

fn start_value(
    mle: Option<&MleFit>,
    outcome: usize,
    cov: usize,
    prior: &PriorSpec,
    rng: &mut impl Rng,
) -> f64 {
    if let Some(fit) = mle {
        if fit.slot(outcome, cov).is_some() {
            let se = fit.se.get(outcome, cov);
            let u: f64 = rng.random::<f64>() * 2.0 - 1.0;
            return fit.beta_hat.get(outcome, cov) + 2.0 * se * u;
        }
    }
    let normal = Normal::new(0.0, prior.sigma_beta).unwrap();
    normal.sample(rng)
}

/// Draw a state sequence from the prior Markov chain (stationary start).
pub fn prior_state_draw(
    t_count: usize,
    p01: f64,
    p10: f64,
    rng: &mut impl Rng,
) -> Vec<u8> {
    let (pbar0, _) = stationary_probs(p01, p10).expect("valid transition probabilities");
    let mut states = vec![0u8; t_count];
    let mut cur = (rng.random::<f64>() >= pbar0) as u8;
    states[0] = cur;
    for s in states.iter_mut().skip(1) {
        let flip = if cur == 0 { p01 } else { p10 };
        if rng.random::<f64>() < flip {
            cur ^= 1;
        }
        *s = cur;
    }
    states
}

#[allow(clippy::too_many_arguments)]
fn propose_block(
    data: &Dataset,
    spec: &ModelSpec,
    theta: &mut Theta,
    block: &BetaBlock,
    entries: &[usize],
    step: f64,
    prior: &PriorSpec,
    rng: &mut impl Rng,
    util: &mut [f64],
    le0: &mut Vec<f64>,
    le1: &mut Vec<f64>,
    cand0: &mut Vec<f64>,
    cand1: &mut Vec<f64>,
) -> bool {
    let normal = Normal::new(0.0, 1.0).unwrap();
    let mut dlp = 0.0;
    let (mut new_beta0, mut new_beta1) = (None, None);
    match block.scope {
        BlockScope::Shared => {
            let mut b0 = theta.beta0.clone();
            let mut b1 = theta.beta1.clone();
            for &d in entries {
                let old = b0.get(block.outcome, d);
                let new = old + step * normal.sample(rng);
                b0.set(block.outcome, d, new);
                b1.set(block.outcome, d, new);
                dlp += normal_logpdf_diff(new, old, prior.sigma_beta);
            }
            new_beta0 = Some(b0);
            new_beta1 = Some(b1);
        }
        BlockScope::State0 => {
            let mut b0 = theta.beta0.clone();
            for &d in entries {
                let old = b0.get(block.outcome, d);
                let new = old + step * normal.sample(rng);
                b0.set(block.outcome, d, new);
                dlp += normal_logpdf_diff(new, old, prior.sigma_beta);
            }
            new_beta0 = Some(b0);
        }
        BlockScope::State1 => {
            let mut b1 = theta.beta1.clone();
            for &d in entries {
                let old = b1.get(block.outcome, d);
                let new = old + step * normal.sample(rng);
                b1.set(block.outcome, d, new);
                dlp += normal_logpdf_diff(new, old, prior.sigma_beta);
            }
            new_beta1 = Some(b1);
        }
    }

    let mut delta_ll = 0.0;
    if let Some(b0) = &new_beta0 {
        period_log_emissions_into(data, b0, util, cand0);
        if spec.switching() {
            for (t, &s) in theta.states.iter().enumerate() {
                if s == 0 {
                    delta_ll += cand0[t] - le0[t];
                }
            }
        } else {
            delta_ll += cand0.iter().sum::<f64>() - le0.iter().sum::<f64>();
        }
    }
    if let Some(b1) = &new_beta1 {
        if spec.switching() {
            period_log_emissions_into(data, b1, util, cand1);
            for (t, &s) in theta.states.iter().enumerate() {
                if s == 1 {
                    delta_ll += cand1[t] - le1[t];
                }
            }
        }
    }

    let log_ratio = delta_ll + dlp;
    let accept = log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio;
    if accept {
        if let Some(b0) = new_beta0 {
            theta.beta0 = b0;
            std::mem::swap(le0, cand0);
        }
        if let Some(b1) = new_beta1 {
            theta.beta1 = b1;
            if spec.switching() {
                std::mem::swap(le1, cand1);
            }
        }
    }
    accept
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::RecordInput;

    fn tiny_dataset() -> Dataset {
        let mut records = Vec::new();
        for t in 1..=4usize {
            for k in 0..3usize {
                records.push(RecordInput {
                    period: t,
                    outcome: 1 + (t + k) % 2,
                    covariates: vec![1.0],
                });
            }
        }
        Dataset::from_records(4, 2, records).unwrap()
    }

    #[test]
    fn ffbs_with_flat_emissions_follows_prior_chain() {
        // beta0 = beta1 makes emissions uninformative, so sampled sequences
        // must reproduce the prior Markov transition frequencies.
        let data = Dataset::empty(50, 2, 1).unwrap();
        let beta = CoefMatrix::zeros(1, 1);
        let (p01, p10) = (0.2, 0.5);
        let mut rng = StdRng::seed_from_u64(42);
        let n_draws = 20_000;
        let mut trans = [[0u64; 2]; 2];
        for _ in 0..n_draws {
            let s = sample_states(&data, &beta, &beta, p01, p10, &mut rng).unwrap();
            let c = transition_counts(&s);
            for a in 0..2 {
                for b in 0..2 {
                    trans[a][b] += c[a][b];
                }
            }
        }
        let from0 = (trans[0][0] + trans[0][1]) as f64;
        let from1 = (trans[1][0] + trans[1][1]) as f64;
        let f01 = trans[0][1] as f64 / from0;
        let f10 = trans[1][0] as f64 / from1;
        let sd01 = (p01 * (1.0 - p01) / from0).sqrt();
        let sd10 = (p10 * (1.0 - p10) / from1).sqrt();
        assert!((f01 - p01).abs() < 3.0 * sd01, "f01 {f01}");
        assert!((f10 - p10).abs() < 3.0 * sd10, "f10 {f10}");
    }

    #[test]
    fn ffbs_absorbing_chain_stays_in_state_zero() {
        let data = Dataset::empty(20, 2, 1).unwrap();
        let beta = CoefMatrix::zeros(1, 1);
        let mut rng = StdRng::seed_from_u64(1);
        for _ in 0..200 {
            let s = sample_states(&data, &beta, &beta, 1e-15, 0.5, &mut rng).unwrap();
            assert!(s.iter().all(|&v| v == 0));
        }
    }

    #[test]
    fn transition_draws_follow_beta_counts_and_restriction() {
        // All-zero states, T = 208: p01 ~ Beta(1, 208) before truncation;
        // with p10 ~ Beta(1,1) the restriction p01 <= p10 almost never binds,
        // so the sample mean stays near 1/209.
        let states = vec![0u8; 208];
        let mut rng = StdRng::seed_from_u64(9);
        let n = 40_000;
        let mut sum01 = 0.0;
        for _ in 0..n {
            let (p01, p10) = sample_transition_probs(&states, &mut rng).unwrap();
            assert!(p01 <= p10);
            sum01 += p01;
        }
        let mean01 = sum01 / n as f64;
        let expect = 1.0 / 209.0;
        // Beta(1,208) sd ~ expect; 3 sigma of the mean estimate.
        let tol = 3.0 * expect / (n as f64).sqrt() * 1.5;
        assert!((mean01 - expect).abs() < tol, "mean {mean01} vs {expect}");
    }

    #[test]
    fn transition_counts_alternating_sequence() {
        let states: Vec<u8> = (0..10).map(|k| (k % 2) as u8).collect();
        let n = transition_counts(&states);
        assert_eq!(n[0][1], 5);
        assert_eq!(n[1][0], 4);
        assert_eq!(n[0][0], 0);
        assert_eq!(n[1][1], 0);
    }

    #[test]
    fn restriction_always_enforced_on_symmetric_counts() {
        let states: Vec<u8> = (0..9).map(|k| (k % 2) as u8).collect();
        let mut rng = StdRng::seed_from_u64(5);
        for _ in 0..5_000 {
            let (p01, p10) = sample_transition_probs(&states, &mut rng).unwrap();
            assert!(p01 <= p10);
        }
    }

    #[test]
    fn zero_step_proposal_is_always_accepted() {
        let data = tiny_dataset();
        let spec = ModelSpec::ml_all_shared(2, 1);
        let mut theta = Theta::zero(&spec, 4);
        let block = BetaBlock { outcome: 0, scope: BlockScope::Shared };
        let mut rng = StdRng::seed_from_u64(3);
        for _ in 0..50 {
            let accepted = sample_beta_block(
                &data,
                &spec,
                &mut theta,
                &block,
                0.0,
                &PriorSpec::default(),
                &mut rng,
            )
            .unwrap();
            assert!(accepted);
        }
    }

    #[test]
    fn empty_block_is_an_error() {
        let spec = ModelSpec::ml_all_shared(2, 1);
        let data = tiny_dataset();
        let mut theta = Theta::zero(&spec, 4);
        let block = BetaBlock { outcome: 0, scope: BlockScope::State0 };
        let mut rng = StdRng::seed_from_u64(3);
        assert!(sample_beta_block(
            &data,
            &spec,
            &mut theta,
            &block,
            0.1,
            &PriorSpec::default(),
            &mut rng
        )
        .is_err());
    }

    #[test]
    fn run_chains_is_deterministic_for_fixed_seed() {
        let data = tiny_dataset();
        let spec = ModelSpec::ml_all_shared(2, 1);
        let config = McmcConfig {
            n_chains: 2,
            n_burnin: 50,
            n_keep: 100,
            thin: 1,
            seed: 77,
            ..Default::default()
        };
        let a = run_chains(&data, &spec, &PriorSpec::default(), &config).unwrap();
        let b = run_chains(&data, &spec, &PriorSpec::default(), &config).unwrap();
        assert_eq!(a.chains.len(), b.chains.len());
        for (ca, cb) in a.chains.iter().zip(&b.chains) {
            assert_eq!(ca.logliks, cb.logliks);
            assert_eq!(ca.thetas, cb.thetas);
        }
    }

    #[test]
    fn state_sampler_matches_enumeration_posterior() {
        // T = 8 toy model: the empirical state frequencies over many exact
        // FFBS draws must match the brute-force 2^8 posterior within 3-sigma
        // binomial bands.
        use crate::oracle::enumerate_state_posterior;
        let mut rng = StdRng::seed_from_u64(91);
        let beta0 = CoefMatrix::from_rows(vec![vec![0.9, -0.4]]);
        let beta1 = CoefMatrix::from_rows(vec![vec![-0.8, 0.6]]);
        let mut records = Vec::new();
        for t in 1..=8usize {
            for k in 0..3usize {
                let x = vec![1.0, (t as f64 * 0.37 + k as f64 * 0.21).sin()];
                let outcome = 1 + (t + k) % 2;
                records.push(RecordInput { period: t, outcome, covariates: x });
            }
        }
        let data = Dataset::from_records(8, 2, records).unwrap();
        let point = crate::model::ModelPoint {
            beta0: beta0.clone(),
            beta1: beta1.clone(),
            p01: 0.3,
            p10: 0.5,
        };
        let exact = enumerate_state_posterior(&data, &point);
        let n_draws = 100_000usize;
        let mut freq = [0.0f64; 8];
        for _ in 0..n_draws {
            let s = sample_states(&data, &beta0, &beta1, 0.3, 0.5, &mut rng).unwrap();
            for (t, &v) in s.iter().enumerate() {
                freq[t] += v as f64;
            }
        }
        for t in 0..8 {
            let p = exact[t];
            let f = freq[t] / n_draws as f64;
            let sd = (p * (1.0 - p) / n_draws as f64).sqrt();
            assert!(
                (f - p).abs() < 3.0 * sd.max(1e-4),
                "t = {t}: empirical {f} vs exact {p} (sd {sd})"
            );
        }
    }

    #[test]
    fn gibbs_beta_matches_grid_quadrature_posterior() {
        // One-dimensional model (I = 2, intercept only): the posterior of
        // the single coefficient has no conjugate form but is computable by
        // fine-grid quadrature. The Kolmogorov-Smirnov distance between the
        // MCMC draws and the grid posterior must be small.
        let mut records = Vec::new();
        for k in 0..40usize {
            records.push(RecordInput {
                period: 1 + k % 4,
                outcome: 1 + (k % 3 == 0) as usize,
                covariates: vec![1.0],
            });
        }
        let data = Dataset::from_records(4, 2, records).unwrap();
        let spec = ModelSpec::ml_all_shared(2, 1);
        let prior = PriorSpec { sigma_beta: 100.0 };
        let config = McmcConfig {
            n_chains: 4,
            n_burnin: 500,
            n_keep: 25_000,
            thin: 1,
            seed: 314,
            ..Default::default()
        };
        let sample = run_chains(&data, &spec, &prior, &config).unwrap();
        let mut draws =
            sample.pooled(&Param::Beta { state: None, outcome: 0, cov: 0 });
        draws.sort_by(|a, b| a.partial_cmp(b).unwrap());

        // Grid posterior: log pi(b) = sum_n log P(y_n | b) + log prior.
        let lo = -2.0f64;
        let hi = 3.0f64;
        let m = 4001usize;
        let step = (hi - lo) / (m - 1) as f64;
        let mut logs = Vec::with_capacity(m);
        for g in 0..m {
            let b = lo + g as f64 * step;
            let mut lp = -0.5 * (b / 100.0) * (b / 100.0);
            // Outcome 1 appears for k % 3 != 0, i.e. 26 of the 40 records;
            // the other 14 fall in the base category.
            let p1 = b.exp() / (1.0 + b.exp());
            lp += 26.0 * p1.ln() + 14.0 * (1.0 - p1).ln();
            logs.push(lp);
        }
        let norm = crate::stats::log_sum_exp(&logs);
        let mut cdf = Vec::with_capacity(m);
        let mut acc = 0.0;
        for lw in &logs {
            acc += (lw - norm).exp();
            cdf.push(acc);
        }
        // KS distance between the empirical draw CDF and the grid CDF.
        let mut ks = 0.0f64;
        for (g, c) in cdf.iter().enumerate() {
            let b = lo + g as f64 * step;
            let emp = draws.partition_point(|&x| x <= b) as f64 / draws.len() as f64;
            ks = ks.max((emp - c).abs());
        }
        assert!(ks < 0.02, "KS distance {ks}");
    }

    #[test]
    fn out_of_range_acceptance_rates_warn_but_do_not_fail() {
        // A huge frozen step with no room to adapt drives acceptance to
        // zero; the run must still succeed and carry a warning.
        let data = tiny_dataset();
        let spec = ModelSpec::ml_all_shared(2, 1);
        let config = McmcConfig {
            n_chains: 1,
            n_burnin: 1,
            n_keep: 200,
            thin: 1,
            seed: 4,
            initial_step: 1e6,
            ..Default::default()
        };
        let sample = run_chains(&data, &spec, &PriorSpec::default(), &config).unwrap();
        assert!(
            !sample.warnings.is_empty(),
            "expected an acceptance-rate warning"
        );
        assert!(sample.warnings[0].contains("acceptance rate"));
    }

    #[test]
    fn prior_only_run_recovers_prior_moments() {
        // No data: the posterior is the prior. Coefficient draws must match
        // the normal prior variance; transition draws must match the moments
        // of the uniform prior truncated to p01 <= p10 (means 1/3 and 2/3,
        // variance 1/18 each).
        let data = Dataset::empty(208, 2, 1).unwrap();
        let spec = ModelSpec::msml_all_specific(2, 1);
        let prior = PriorSpec { sigma_beta: 1.5 };
        let config = McmcConfig {
            n_chains: 2,
            n_burnin: 500,
            n_keep: 10_000,
            thin: 4,
            seed: 2024,
            ..Default::default()
        };
        let sample = run_chains(&data, &spec, &prior, &config).unwrap();

        for param in [Param::P01, Param::P10] {
            let chains = sample.per_chain(&param);
            let pooled = sample.pooled(&param);
            let m = crate::stats::mean(&pooled);
            let mcse = crate::stats::mcse_batch_means(&chains);
            let expect = if param == Param::P01 { 1.0 / 3.0 } else { 2.0 / 3.0 };
            assert!(
                (m - expect).abs() < 3.0 * mcse + 0.004,
                "{param}: mean {m} vs {expect} (mcse {mcse})"
            );
            let v = crate::stats::sample_variance(&pooled);
            assert!((v - 1.0 / 18.0).abs() < 0.005, "{param}: var {v}");
        }

        for state in [0u8, 1u8] {
            let param = Param::Beta { state: Some(state), outcome: 0, cov: 0 };
            let pooled = sample.pooled(&param);
            let v = crate::stats::sample_variance(&pooled);
            let rel = (v - 1.5 * 1.5) / (1.5 * 1.5);
            assert!(rel.abs() < 0.05, "state {state}: variance off by {rel:.3}");
        }

        // Ordering restriction holds on every stored draw.
        for chain in &sample.chains {
            for theta in &chain.thetas {
                assert!(theta.p01 <= theta.p10);
            }
        }
    }
}
