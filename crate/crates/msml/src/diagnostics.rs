//! Convergence diagnostics (PSRF, MPSRF), the Monte Carlo Pearson chi-square
//! goodness-of-fit test, and the exact state-marginalized log-likelihood used
//! to validate the samplers.

use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::linalg;
use crate::mcmc::{derive_seed, period_log_emissions_into, prior_state_draw};
use crate::model::{outcome_probs_into, stationary_probs, Dataset, ModelPoint};
use crate::stats::{log_sum_exp2, mean, sample_variance};

/// Gelman-Rubin potential scale reduction factor for one scalar parameter.
///
/// W is the mean within-chain sample variance, B/n the between-chain variance
/// of the chain means; the factor is sqrt((((n-1)/n)W + B/n) / W). Stuck but
/// disagreeing chains (W = 0, B > 0) return +inf; fully constant draws
/// return 1.
pub fn psrf(chains: &[Vec<f64>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "psrf needs at least 2 chains, got {}",
            chains.len()
        )));
    }
    let n = chains[0].len();
    if n < 2 {
        return Err(Error::InvalidInput("psrf needs chains of length >= 2".into()));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("psrf needs equal-length chains".into()));
    }
    let within: Vec<f64> = chains.iter().map(|c| sample_variance(c)).collect();
    let means: Vec<f64> = chains.iter().map(|c| mean(c)).collect();
    let w = mean(&within);
    let b_over_n = sample_variance(&means);
    if w == 0.0 {
        return Ok(if b_over_n > 0.0 { f64::INFINITY } else { 1.0 });
    }
    let n = n as f64;
    let v_hat = (n - 1.0) / n * w + b_over_n;
    Ok((v_hat / w).sqrt())
}

/// Brooks-Gelman multivariate potential scale reduction factor:
/// sqrt((n-1)/n + ((m+1)/m) * lambda1) with lambda1 the largest eigenvalue of
/// W^-1 B/n.
///
/// `chains[c][draw][param]`. A singular within-chain covariance is an error
/// naming the offending parameter index.
pub fn mpsrf(chains: &[Vec<Vec<f64>>]) -> Result<f64> {
    if chains.len() < 2 {
        return Err(Error::InvalidInput(format!(
            "mpsrf needs at least 2 chains, got {}",
            chains.len()
        )));
    }
    let m = chains.len();
    let n = chains[0].len();
    if n < 2 {
        return Err(Error::InvalidInput("mpsrf needs chains of length >= 2".into()));
    }
    if chains.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("mpsrf needs equal-length chains".into()));
    }
    let p = chains[0][0].len();
    if p == 0 {
        return Err(Error::InvalidInput("mpsrf needs dimension >= 1".into()));
    }

    let mut w = vec![0.0; p * p];
    let mut chain_means = vec![vec![0.0; p]; m];
    for (c, chain) in chains.iter().enumerate() {
        for draw in chain {
            for (j, &v) in draw.iter().enumerate() {
                chain_means[c][j] += v / n as f64;
            }
        }
        for draw in chain {
            for a in 0..p {
                let da = draw[a] - chain_means[c][a];
                for b in a..p {
                    let db = draw[b] - chain_means[c][b];
                    w[a * p + b] += da * db;
                }
            }
        }
    }
    let denom_w = (m * (n - 1)) as f64;
    for v in w.iter_mut() {
        *v /= denom_w;
    }

    let mut grand = vec![0.0; p];
    for cm in &chain_means {
        for (j, &v) in cm.iter().enumerate() {
            grand[j] += v / m as f64;
        }
    }
    // B/n: covariance of the chain means.
    let mut b_over_n = vec![0.0; p * p];
    for cm in &chain_means {
        for a in 0..p {
            let da = cm[a] - grand[a];
            for b in a..p {
                let db = cm[b] - grand[b];
                b_over_n[a * p + b] += da * db / (m - 1) as f64;
            }
        }
    }
    for a in 0..p {
        for b in 0..a {
            w[a * p + b] = w[b * p + a];
            b_over_n[a * p + b] = b_over_n[b * p + a];
        }
    }

    let l =
        linalg::cholesky(&w, p).map_err(|coordinate| Error::SingularCovariance { coordinate })?;
    // M = L^-1 (B/n) L^-T, symmetric with the same spectrum as W^-1 B/n.
    let mut cols = b_over_n.clone();
    for j in 0..p {
        let mut col: Vec<f64> = (0..p).map(|i| cols[i * p + j]).collect();
        linalg::forward_substitute(&l, p, &mut col);
        for (i, v) in col.iter().enumerate() {
            cols[i * p + j] = *v;
        }
    }
    let mut msym = vec![0.0; p * p];
    for i in 0..p {
        let mut row: Vec<f64> = (0..p).map(|j| cols[i * p + j]).collect();
        linalg::forward_substitute(&l, p, &mut row);
        msym[i * p..(i + 1) * p].copy_from_slice(&row);
    }
    for a in 0..p {
        for b in 0..a {
            let v = 0.5 * (msym[a * p + b] + msym[b * p + a]);
            msym[a * p + b] = v;
            msym[b * p + a] = v;
        }
    }
    let lambda1 = linalg::sym_eigenvalues(&msym, p)[0].max(0.0);
    let n = n as f64;
    let m = m as f64;
    Ok(((n - 1.0) / n + (m + 1.0) / m * lambda1).sqrt())
}

/// Exact log f(Y | coefficients, transitions) with the state sequence summed
/// out by the forward algorithm in log space. Linear in T; for small T it is
/// checkable against full 2^T enumeration.
pub fn exact_marginal_loglik(data: &Dataset, point: &ModelPoint) -> Result<f64> {
    let (pbar0, pbar1) = stationary_probs(point.p01, point.p10)?;
    let t_count = data.n_periods();
    let mut util = vec![0.0; data.n_outcomes()];
    let mut le0 = vec![0.0; t_count];
    let mut le1 = vec![0.0; t_count];
    period_log_emissions_into(data, &point.beta0, &mut util, &mut le0);
    period_log_emissions_into(data, &point.beta1, &mut util, &mut le1);
    let lt = [
        [(1.0 - point.p01).ln(), point.p01.ln()],
        [point.p10.ln(), (1.0 - point.p10).ln()],
    ];
    let mut a0 = pbar0.ln() + le0[0];
    let mut a1 = pbar1.ln() + le1[0];
    for t in 1..t_count {
        let n0 = le0[t] + log_sum_exp2(a0 + lt[0][0], a1 + lt[1][0]);
        let n1 = le1[t] + log_sum_exp2(a0 + lt[0][1], a1 + lt[1][1]);
        a0 = n0;
        a1 = n1;
    }
    Ok(log_sum_exp2(a0, a1))
}


/// Posterior state probabilities P(state_t = 1 | data) at fixed parameters
/// by the forward-backward recursion on per-period log emissions.
pub(crate) fn smoothed_state_probs(le0: &[f64], le1: &[f64], p01: f64, p10: f64) -> Vec<f64> {
    let t_count = le0.len();
    let (pbar0, pbar1) = stationary_probs(p01, p10).expect("valid transition probabilities");
    let lt = [
        [(1.0 - p01).ln(), p01.ln()],
        [p10.ln(), (1.0 - p10).ln()],
    ];
    // Normalized forward variables.
    let mut fwd = vec![[0.0f64; 2]; t_count];
    let mut w0 = pbar0.ln() + le0[0];
    let mut w1 = pbar1.ln() + le1[0];
    let mut norm = log_sum_exp2(w0, w1);
    fwd[0] = [w0 - norm, w1 - norm];
    for t in 1..t_count {
        w0 = le0[t] + log_sum_exp2(fwd[t - 1][0] + lt[0][0], fwd[t - 1][1] + lt[1][0]);
        w1 = le1[t] + log_sum_exp2(fwd[t - 1][0] + lt[0][1], fwd[t - 1][1] + lt[1][1]);
        norm = log_sum_exp2(w0, w1);
        fwd[t] = [w0 - norm, w1 - norm];
    }
    // Backward variables, normalized per step.
    let mut bwd = vec![[0.0f64; 2]; t_count];
    for t in (0..t_count - 1).rev() {
        let b0 = log_sum_exp2(
            lt[0][0] + le0[t + 1] + bwd[t + 1][0],
            lt[0][1] + le1[t + 1] + bwd[t + 1][1],
        );
        let b1 = log_sum_exp2(
            lt[1][0] + le0[t + 1] + bwd[t + 1][0],
            lt[1][1] + le1[t + 1] + bwd[t + 1][1],
        );
        let m = b0.max(b1);
        if m.is_finite() {
            bwd[t] = [b0 - m, b1 - m];
        }
    }
    (0..t_count)
        .map(|t| {
            let g0 = fwd[t][0] + bwd[t][0];
            let g1 = fwd[t][1] + bwd[t][1];
            let n = log_sum_exp2(g0, g1);
            if n.is_finite() {
                (g1 - n).exp()
            } else {
                0.5
            }
        })
        .collect()
}

/// Chi-square contribution of one period after merging every cell with
/// expected count < 1 into the period's largest-expected cell.
fn merged_chi2_terms(observed: &[f64], expected: &[f64]) -> f64 {
    debug_assert_eq!(observed.len(), expected.len());
    let largest = expected
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
        .map(|(i, _)| i)
        .unwrap();
    let mut merged_o = 0.0;
    let mut merged_e = 0.0;
    let mut chi2 = 0.0;
    for i in 0..observed.len() {
        if expected[i] < 1.0 || i == largest {
            merged_o += observed[i];
            merged_e += expected[i];
        } else {
            let d = observed[i] - expected[i];
            chi2 += d * d / expected[i];
        }
    }
    if merged_e > 0.0 {
        let d = merged_o - merged_e;
        chi2 += d * d / merged_e;
    }
    chi2
}

struct GofTables {
    /// Observed counts, period-major: obs[t * I + i].
    observed: Vec<f64>,
    /// Per-period expected counts per state: expected[s][t * I + i].
    expected: [Vec<f64>; 2],
    /// Per-record outcome probabilities per state: probs[s][n * I + i].
    probs: [Vec<f64>; 2],
    /// Per-record log probabilities, same layout.
    log_probs: [Vec<f64>; 2],
}

fn gof_tables(data: &Dataset, point: &ModelPoint) -> GofTables {
    let t_count = data.n_periods();
    let i_count = data.n_outcomes();
    let n = data.n_records();
    let mut observed = vec![0.0; t_count * i_count];
    for r in 0..n {
        observed[data.period(r) * i_count + data.outcome(r)] += 1.0;
    }
    let mut expected = [vec![0.0; t_count * i_count], vec![0.0; t_count * i_count]];
    let mut probs = [vec![0.0; n * i_count], vec![0.0; n * i_count]];
    let mut log_probs = [vec![0.0; n * i_count], vec![0.0; n * i_count]];
    let mut buf = vec![0.0; i_count];
    for s in 0..2usize {
        let beta = point.beta_for_state(s as u8);
        for r in 0..n {
            outcome_probs_into(beta, data.xs(r), &mut buf);
            let t = data.period(r);
            for i in 0..i_count {
                probs[s][r * i_count + i] = buf[i];
                log_probs[s][r * i_count + i] = buf[i].ln();
                expected[s][t * i_count + i] += buf[i];
            }
        }
    }
    GofTables { observed, expected, probs, log_probs }
}

/// Chi-square of one dataset's counts against the state-probability-weighted
/// expected counts, gamma[t] = P(state_t = 1 | that dataset).
fn chi2_smoothed(
    data: &Dataset,
    counts: &[f64],
    expected: &[Vec<f64>; 2],
    gamma: &[f64],
) -> f64 {
    let i_count = data.n_outcomes();
    let mut e_mix = vec![0.0; i_count];
    let mut chi2 = 0.0;
    for t in 0..data.n_periods() {
        if data.records_in_period(t) == 0 {
            continue;
        }
        let g = gamma[t];
        for i in 0..i_count {
            e_mix[i] = (1.0 - g) * expected[0][t * i_count + i]
                + g * expected[1][t * i_count + i];
        }
        let o = &counts[t * i_count..(t + 1) * i_count];
        chi2 += merged_chi2_terms(o, &e_mix);
    }
    chi2
}

/// Smoothed state probabilities for an outcome assignment scored against the
/// point estimates; `outcome_of(r)` gives record r's outcome index.
fn gamma_for_outcomes(
    data: &Dataset,
    tables: &GofTables,
    point: &ModelPoint,
    switching: bool,
    outcome_of: impl Fn(usize) -> usize,
) -> Vec<f64> {
    let t_count = data.n_periods();
    if !switching {
        return vec![0.0; t_count];
    }
    let i_count = data.n_outcomes();
    let mut le0 = vec![0.0; t_count];
    let mut le1 = vec![0.0; t_count];
    for r in 0..data.n_records() {
        let t = data.period(r);
        let y = outcome_of(r);
        le0[t] += tables.log_probs[0][r * i_count + y];
        le1[t] += tables.log_probs[1][r * i_count + y];
    }
    smoothed_state_probs(&le0, &le1, point.p01, point.p10)
}

/// Monte Carlo Pearson chi-square goodness-of-fit p-value.
///
/// Cells are (period, outcome); cells with expected count < 1 merge into the
/// period's largest cell. Each replicate draws a fresh state sequence from
/// the fitted transition probabilities, rebuilds the expected counts under
/// it, scores the observed data and a simulated dataset (outcomes redrawn at
/// the observed covariates) against those expectations, and the p-value is
/// the fraction of replicates whose simulated chi-square meets or exceeds
/// the observed one. Deterministic for a fixed seed.
pub fn gof_pvalue(
    data: &Dataset,
    point: &ModelPoint,
    switching: bool,
    n_rep: usize,
    seed: u64,
) -> Result<f64> {
    if data.is_empty() {
        return Err(Error::InvalidInput("dataset has no records".into()));
    }
    if n_rep == 0 {
        return Err(Error::InvalidInput("need at least one replicate".into()));
    }
    if switching && stationary_probs(point.p01, point.p10).is_err() {
        return Err(Error::DegenerateChain);
    }
    let tables = gof_tables(data, point);
    // Sparse-data refusal: no cell anywhere reaches an expected count of 1
    // under the more frequent state.
    if tables.expected[0].iter().all(|&e| e < 1.0) {
        return Err(Error::SparseData);
    }

    let i_count = data.n_outcomes();
    let t_count = data.n_periods();
    let n_records = data.n_records();
    // Observed discrepancy: expected counts weighted by the smoothed state
    // probabilities of the observed data at the fitted point.
    let gamma_obs = gamma_for_outcomes(data, &tables, point, switching, |r| data.outcome(r));
    let chi_obs = chi2_smoothed(data, &tables.observed, &tables.expected, &gamma_obs);

    let exceed: u64 = (0..n_rep)
        .into_par_iter()
        .map(|rep| {
            let mut rng = StdRng::seed_from_u64(derive_seed(seed, rep as u64));
            let states: Vec<u8> = if switching {
                prior_state_draw(t_count, point.p01, point.p10, &mut rng)
            } else {
                vec![0u8; t_count]
            };
            // Simulated dataset at the observed covariates.
            let mut sim_counts = vec![0.0; t_count * i_count];
            let mut sim_outcomes = vec![0u32; n_records];
            for (r, slot) in sim_outcomes.iter_mut().enumerate() {
                let t = data.period(r);
                let p = &tables.probs[states[t] as usize][r * i_count..(r + 1) * i_count];
                let u: f64 = rng.random();
                let mut cum = 0.0;
                let mut y = i_count - 1;
                for (i, &pi) in p.iter().enumerate() {
                    cum += pi;
                    if u < cum {
                        y = i;
                        break;
                    }
                }
                *slot = y as u32;
                sim_counts[t * i_count + y] += 1.0;
            }
            // Score the replicate exactly as the observed data was scored.
            let gamma_rep = gamma_for_outcomes(data, &tables, point, switching, |r| {
                sim_outcomes[r] as usize
            });
            let chi_rep = chi2_smoothed(data, &sim_counts, &tables.expected, &gamma_rep);
            (chi_rep >= chi_obs) as u64
        })
        .sum();
    Ok(exceed as f64 / n_rep as f64)
}
