//! Brute-force reference implementations with exponential cost, used by the
//! test suites to validate the samplers and the forward algorithm. These
//! deliberately share no code with the fast paths they check: sequences are
//! enumerated one by one and every record probability is evaluated directly.

use crate::model::{outcome_probs, stationary_probs, Dataset, ModelPoint};
use crate::stats::log_sum_exp;

fn sequence_log_weight(data: &Dataset, point: &ModelPoint, states: &[u8]) -> f64 {
    let (pbar0, pbar1) = stationary_probs(point.p01, point.p10).expect("valid probabilities");
    let mut lw = if states[0] == 0 { pbar0.ln() } else { pbar1.ln() };
    for w in states.windows(2) {
        lw += match (w[0], w[1]) {
            (0, 0) => (1.0 - point.p01).ln(),
            (0, 1) => point.p01.ln(),
            (1, 0) => point.p10.ln(),
            _ => (1.0 - point.p10).ln(),
        };
    }
    for n in 0..data.n_records() {
        let beta = point.beta_for_state(states[data.period(n)]);
        let probs = outcome_probs(beta, data.xs(n)).expect("dimensions checked by caller");
        lw += probs[data.outcome(n)].ln();
    }
    lw
}

/// log f(Y | coefficients, transitions) by full enumeration of all 2^T state
/// sequences. Only practical for small T.
pub fn enumerate_marginal_loglik(data: &Dataset, point: &ModelPoint) -> f64 {
    let t_count = data.n_periods();
    assert!(t_count <= 22, "enumeration is 2^T; T = {t_count} is too large");
    let mut log_weights = Vec::with_capacity(1 << t_count);
    let mut states = vec![0u8; t_count];
    for mask in 0u64..(1 << t_count) {
        for (t, s) in states.iter_mut().enumerate() {
            *s = ((mask >> t) & 1) as u8;
        }
        log_weights.push(sequence_log_weight(data, point, &states));
    }
    log_sum_exp(&log_weights)
}

/// Exact posterior state probabilities P(state_t = 1 | data) by enumeration.
pub fn enumerate_state_posterior(data: &Dataset, point: &ModelPoint) -> Vec<f64> {
    let t_count = data.n_periods();
    assert!(t_count <= 22, "enumeration is 2^T; T = {t_count} is too large");
    let mut log_weights = Vec::with_capacity(1 << t_count);
    let mut states = vec![0u8; t_count];
    for mask in 0u64..(1 << t_count) {
        for (t, s) in states.iter_mut().enumerate() {
            *s = ((mask >> t) & 1) as u8;
        }
        log_weights.push(sequence_log_weight(data, point, &states));
    }
    let norm = log_sum_exp(&log_weights);
    let mut probs = vec![0.0; t_count];
    for (mask, lw) in log_weights.iter().enumerate() {
        let w = (lw - norm).exp();
        for (t, p) in probs.iter_mut().enumerate() {
            if (mask >> t) & 1 == 1 {
                *p += w;
            }
        }
    }
    probs
}
