//! Core data model: panel event-severity observations, coefficient layout,
//! and the outcome-probability / likelihood arithmetic shared by every
//! estimator in the crate.
//!
//! Observations are individual events, each carrying a period index, an
//! observed outcome category and a covariate vector whose first component is
//! the intercept. Outcome probabilities are softmax of linear utilities with
//! the last category as the zero-coefficient base. A two-state model carries
//! one coefficient matrix per latent state plus the state transition
//! probabilities and the per-period state sequence.
//!
//! All types are immutable after construction and all operations are pure,
//! so parallel chains can share them freely.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stats::log_sum_exp;

/// Dense coefficient matrix: one row per non-base outcome, one column per
/// covariate (column 0 is the intercept).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CoefMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl CoefMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn from_rows(rows: Vec<Vec<f64>>) -> Self {
        let n_rows = rows.len();
        let n_cols = rows.first().map_or(0, |r| r.len());
        assert!(rows.iter().all(|r| r.len() == n_cols));
        Self {
            rows: n_rows,
            cols: n_cols,
            data: rows.into_iter().flatten().collect(),
        }
    }

    pub fn n_rows(&self) -> usize {
        self.rows
    }

    pub fn n_cols(&self) -> usize {
        self.cols
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn get(&self, i: usize, d: usize) -> f64 {
        self.data[i * self.cols + d]
    }

    pub fn set(&mut self, i: usize, d: usize, v: f64) {
        self.data[i * self.cols + d] = v;
    }
}

/// Role of one (outcome, covariate) coefficient in a model.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CoefRole {
    /// Restricted to zero.
    Excluded,
    /// One free coefficient, identical in both states.
    Shared,
    /// One free coefficient per state (switching models only).
    StateSpecific,
}

/// Model specification: outcome count, covariate inclusion per non-base
/// outcome, and whether the latent two-state switching layer is active.
///
/// The last outcome is always the base category with all coefficients zero;
/// it is not represented in the role mask.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    n_outcomes: usize,
    n_covariates: usize,
    switching: bool,
    roles: Vec<CoefRole>, // (n_outcomes - 1) x n_covariates, row-major
}

impl ModelSpec {
    pub fn new(
        n_outcomes: usize,
        n_covariates: usize,
        switching: bool,
        roles: Vec<CoefRole>,
    ) -> Result<Self> {
        if n_outcomes < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 outcome categories, got {n_outcomes}"
            )));
        }
        if n_covariates == 0 {
            return Err(Error::InvalidInput("need at least the intercept covariate".into()));
        }
        if roles.len() != (n_outcomes - 1) * n_covariates {
            return Err(Error::InvalidInput(format!(
                "role mask has {} entries, expected {}",
                roles.len(),
                (n_outcomes - 1) * n_covariates
            )));
        }
        let spec = Self {
            n_outcomes,
            n_covariates,
            switching,
            roles,
        };
        for i in 0..n_outcomes - 1 {
            if spec.role(i, 0) == CoefRole::Excluded {
                return Err(Error::InvalidInput(format!(
                    "intercept for outcome {} cannot be excluded",
                    i + 1
                )));
            }
        }
        if !switching && spec.roles.contains(&CoefRole::StateSpecific) {
            return Err(Error::InvalidInput(
                "state-specific coefficients require a switching model".into(),
            ));
        }
        Ok(spec)
    }

    /// Standard single-state model with every covariate included.
    pub fn ml_all_shared(n_outcomes: usize, n_covariates: usize) -> Self {
        Self::new(
            n_outcomes,
            n_covariates,
            false,
            vec![CoefRole::Shared; (n_outcomes - 1) * n_covariates],
        )
        .expect("valid by construction")
    }

    /// Switching model with every included coefficient free per state.
    pub fn msml_all_specific(n_outcomes: usize, n_covariates: usize) -> Self {
        Self::new(
            n_outcomes,
            n_covariates,
            true,
            vec![CoefRole::StateSpecific; (n_outcomes - 1) * n_covariates],
        )
        .expect("valid by construction")
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn switching(&self) -> bool {
        self.switching
    }

    pub fn role(&self, outcome: usize, cov: usize) -> CoefRole {
        self.roles[outcome * self.n_covariates + cov]
    }

    pub fn with_role(&self, outcome: usize, cov: usize, role: CoefRole) -> Result<Self> {
        let mut roles = self.roles.clone();
        roles[outcome * self.n_covariates + cov] = role;
        Self::new(self.n_outcomes, self.n_covariates, self.switching, roles)
    }

    /// Count of free beta coefficients (state-specific entries count twice).
    pub fn n_free_beta(&self) -> usize {
        self.roles
            .iter()
            .map(|r| match r {
                CoefRole::Excluded => 0,
                CoefRole::Shared => 1,
                CoefRole::StateSpecific => 2,
            })
            .sum()
    }

    /// (outcome, covariate) pairs that are not excluded, row-major order.
    pub fn included_entries(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n_outcomes - 1 {
            for d in 0..self.n_covariates {
                if self.role(i, d) != CoefRole::Excluded {
                    out.push((i, d));
                }
            }
        }
        out
    }

    /// Whether any coefficient still differs between the states.
    pub fn has_state_specific(&self) -> bool {
        self.roles.contains(&CoefRole::StateSpecific)
    }

    /// The single-state model with the same inclusion pattern.
    pub fn collapse_to_ml(&self) -> Self {
        let roles = self
            .roles
            .iter()
            .map(|&r| match r {
                CoefRole::Excluded => CoefRole::Excluded,
                _ => CoefRole::Shared,
            })
            .collect();
        Self::new(self.n_outcomes, self.n_covariates, false, roles).expect("valid by construction")
    }

    /// The switching model with the same inclusion pattern, everything
    /// state-specific.
    pub fn expand_to_switching(&self) -> Self {
        let roles = self
            .roles
            .iter()
            .map(|&r| match r {
                CoefRole::Excluded => CoefRole::Excluded,
                _ => CoefRole::StateSpecific,
            })
            .collect();
        Self::new(self.n_outcomes, self.n_covariates, true, roles).expect("valid by construction")
    }

    /// Check that a coefficient pair respects the mask: excluded entries are
    /// exactly zero, shared entries are bitwise equal across states.
    pub fn check_coefs(&self, beta0: &CoefMatrix, beta1: &CoefMatrix) -> Result<()> {
        if beta0.n_rows() != self.n_outcomes - 1 || beta0.n_cols() != self.n_covariates {
            return Err(Error::InvalidInput(format!(
                "beta0 has shape {}x{}, expected {}x{}",
                beta0.n_rows(),
                beta0.n_cols(),
                self.n_outcomes - 1,
                self.n_covariates
            )));
        }
        if beta1.n_rows() != beta0.n_rows() || beta1.n_cols() != beta0.n_cols() {
            return Err(Error::InvalidInput("beta1 shape differs from beta0".into()));
        }
        for i in 0..self.n_outcomes - 1 {
            for d in 0..self.n_covariates {
                match self.role(i, d) {
                    CoefRole::Excluded => {
                        if beta0.get(i, d) != 0.0 || beta1.get(i, d) != 0.0 {
                            return Err(Error::InvalidInput(format!(
                                "excluded coefficient ({}, {}) is nonzero",
                                i + 1,
                                d
                            )));
                        }
                    }
                    CoefRole::Shared => {
                        if beta0.get(i, d).to_bits() != beta1.get(i, d).to_bits() {
                            return Err(Error::InvalidInput(format!(
                                "shared coefficient ({}, {}) differs across states",
                                i + 1,
                                d
                            )));
                        }
                    }
                    CoefRole::StateSpecific => {}
                }
            }
        }
        Ok(())
    }
}

/// Full parameter vector of the switching model: per-state coefficients,
/// transition probabilities, and the latent state sequence.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Theta {
    pub beta0: CoefMatrix,
    pub beta1: CoefMatrix,
    pub p01: f64,
    pub p10: f64,
    pub states: Vec<u8>,
}

impl Theta {
    /// All-zero coefficients, symmetric transitions, all periods in state 0.
    pub fn zero(spec: &ModelSpec, n_periods: usize) -> Self {
        Self {
            beta0: CoefMatrix::zeros(spec.n_outcomes() - 1, spec.n_covariates()),
            beta1: CoefMatrix::zeros(spec.n_outcomes() - 1, spec.n_covariates()),
            p01: 0.5,
            p10: 0.5,
            states: vec![0; n_periods],
        }
    }

    pub fn validate(&self, spec: &ModelSpec, n_periods: usize) -> Result<()> {
        spec.check_coefs(&self.beta0, &self.beta1)?;
        if self.states.len() != n_periods {
            return Err(Error::InvalidInput(format!(
                "state vector has length {}, expected {}",
                self.states.len(),
                n_periods
            )));
        }
        if self.states.iter().any(|&s| s > 1) {
            return Err(Error::InvalidInput("state values must be 0 or 1".into()));
        }
        if spec.switching() {
            if !(self.p01 > 0.0 && self.p01 < 1.0 && self.p10 > 0.0 && self.p10 < 1.0) {
                return Err(Error::InvalidInput(format!(
                    "transition probabilities must lie in (0,1): ({}, {})",
                    self.p01, self.p10
                )));
            }
            if self.p01 > self.p10 {
                return Err(Error::InvalidInput(format!(
                    "ordering restriction violated: p01 = {} > p10 = {}",
                    self.p01, self.p10
                )));
            }
        }
        Ok(())
    }

    /// Coefficient matrix that generates observations in the given state.
    pub fn beta_for_state(&self, state: u8) -> &CoefMatrix {
        if state == 0 {
            &self.beta0
        } else {
            &self.beta1
        }
    }
}

/// Continuous model point (no state sequence): enough to evaluate outcome
/// probabilities per state and to regenerate states. Single-state fits use
/// `p01 = 0, p10 = 1`, i.e. the chain never leaves state 0.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelPoint {
    pub beta0: CoefMatrix,
    pub beta1: CoefMatrix,
    pub p01: f64,
    pub p10: f64,
}

impl ModelPoint {
    pub fn single_state(beta: CoefMatrix) -> Self {
        Self {
            beta0: beta.clone(),
            beta1: beta,
            p01: 0.0,
            p10: 1.0,
        }
    }

    pub fn beta_for_state(&self, state: u8) -> &CoefMatrix {
        if state == 0 {
            &self.beta0
        } else {
            &self.beta1
        }
    }
}

/// One observed event, as supplied by ingestion or generation.
/// `period` is 1-based in [1, T]; `outcome` is 1-based in [1, I].
#[derive(Debug, Clone, PartialEq)]
pub struct RecordInput {
    pub period: usize,
    pub outcome: usize,
    pub covariates: Vec<f64>,
}

/// Validated panel of event records grouped by time period.
///
/// Records are stored sorted by period (stable, so within-period order is
/// preserved) with CSR-style offsets; covariate rows are contiguous.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    n_periods: usize,
    n_outcomes: usize,
    n_covariates: usize,
    outcomes: Vec<u32>,
    periods: Vec<u32>,
    covariates: Vec<f64>,
    period_starts: Vec<usize>,
}

impl Dataset {
    pub fn from_records(
        n_periods: usize,
        n_outcomes: usize,
        records: Vec<RecordInput>,
    ) -> Result<Self> {
        if n_periods == 0 {
            return Err(Error::InvalidInput("need at least one time period".into()));
        }
        if n_outcomes < 2 {
            return Err(Error::InvalidInput(format!(
                "need at least 2 outcome categories, got {n_outcomes}"
            )));
        }
        let n_covariates = match records.first() {
            Some(r) => r.covariates.len(),
            None => 1,
        };
        if n_covariates == 0 {
            return Err(Error::InvalidInput("covariate vectors are empty".into()));
        }
        let mut sorted: Vec<&RecordInput> = records.iter().collect();
        for r in &sorted {
            if r.period < 1 || r.period > n_periods {
                return Err(Error::InvalidInput(format!(
                    "record period {} outside [1, {}]",
                    r.period, n_periods
                )));
            }
            if r.outcome < 1 || r.outcome > n_outcomes {
                return Err(Error::InvalidInput(format!(
                    "record outcome {} outside [1, {}]",
                    r.outcome, n_outcomes
                )));
            }
            if r.covariates.len() != n_covariates {
                return Err(Error::DimensionMismatch {
                    expected: n_covariates,
                    actual: r.covariates.len(),
                });
            }
            if r.covariates[0] != 1.0 {
                return Err(Error::InvalidInput(format!(
                    "covariate 0 must be the intercept 1.0, got {}",
                    r.covariates[0]
                )));
            }
        }
        sorted.sort_by_key(|r| r.period);

        let n = sorted.len();
        let mut outcomes = Vec::with_capacity(n);
        let mut periods = Vec::with_capacity(n);
        let mut covariates = Vec::with_capacity(n * n_covariates);
        for r in &sorted {
            outcomes.push((r.outcome - 1) as u32);
            periods.push((r.period - 1) as u32);
            covariates.extend_from_slice(&r.covariates);
        }
        let mut period_starts = vec![0usize; n_periods + 1];
        for &p in &periods {
            period_starts[p as usize + 1] += 1;
        }
        for t in 0..n_periods {
            period_starts[t + 1] += period_starts[t];
        }
        Ok(Self {
            n_periods,
            n_outcomes,
            n_covariates,
            outcomes,
            periods,
            covariates,
            period_starts,
        })
    }

    /// Empty dataset: T periods, no records. Prior-only sampling uses this.
    pub fn empty(n_periods: usize, n_outcomes: usize, n_covariates: usize) -> Result<Self> {
        if n_covariates == 0 {
            return Err(Error::InvalidInput("covariate count must be positive".into()));
        }
        let mut ds = Self::from_records(n_periods, n_outcomes, Vec::new())?;
        ds.n_covariates = n_covariates;
        Ok(ds)
    }

    pub fn n_periods(&self) -> usize {
        self.n_periods
    }

    pub fn n_outcomes(&self) -> usize {
        self.n_outcomes
    }

    pub fn n_covariates(&self) -> usize {
        self.n_covariates
    }

    pub fn n_records(&self) -> usize {
        self.outcomes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.outcomes.is_empty()
    }

    /// 0-based outcome index of record n.
    pub fn outcome(&self, n: usize) -> usize {
        self.outcomes[n] as usize
    }

    /// 0-based period index of record n.
    pub fn period(&self, n: usize) -> usize {
        self.periods[n] as usize
    }

    pub fn xs(&self, n: usize) -> &[f64] {
        &self.covariates[n * self.n_covariates..(n + 1) * self.n_covariates]
    }

    /// Record index range of (0-based) period t.
    pub fn period_records(&self, t: usize) -> std::ops::Range<usize> {
        self.period_starts[t]..self.period_starts[t + 1]
    }

    pub fn records_in_period(&self, t: usize) -> usize {
        self.period_starts[t + 1] - self.period_starts[t]
    }

    pub fn outcome_counts(&self) -> Vec<usize> {
        let mut counts = vec![0usize; self.n_outcomes];
        for &o in &self.outcomes {
            counts[o as usize] += 1;
        }
        counts
    }
}

/// Outcome probabilities: softmax of the utilities `beta_i' x` for the
/// non-base outcomes and zero for the base, computed with max-utility
/// subtraction so large utilities cannot overflow.
pub fn outcome_probs(beta: &CoefMatrix, x: &[f64]) -> Result<Vec<f64>> {
    if x.len() != beta.n_cols() {
        return Err(Error::DimensionMismatch {
            expected: beta.n_cols(),
            actual: x.len(),
        });
    }
    let n_outcomes = beta.n_rows() + 1;
    let mut probs = vec![0.0; n_outcomes];
    outcome_probs_into(beta, x, &mut probs);
    Ok(probs)
}

/// No-allocation variant used by the hot loops; `probs.len()` must be
/// `beta.n_rows() + 1` and `x.len()` must be `beta.n_cols()`.
pub(crate) fn outcome_probs_into(beta: &CoefMatrix, x: &[f64], probs: &mut [f64]) {
    let base = beta.n_rows();
    let mut max_u = 0.0f64; // the base outcome's utility
    for (i, p) in probs.iter_mut().enumerate().take(base) {
        let u = dot(beta.row(i), x);
        *p = u;
        if u > max_u {
            max_u = u;
        }
    }
    probs[base] = 0.0;
    let mut denom = 0.0;
    for p in probs.iter_mut() {
        *p = (*p - max_u).exp();
        denom += *p;
    }
    for p in probs.iter_mut() {
        *p /= denom;
    }
}

/// Log-probability of one outcome under one coefficient matrix.
pub(crate) fn log_outcome_prob(beta: &CoefMatrix, x: &[f64], outcome: usize) -> f64 {
    let mut utilities = vec![0.0; beta.n_rows() + 1];
    log_outcome_prob_buf(beta, x, outcome, &mut utilities)
}

/// Buffer-reusing variant for hot loops; `utilities.len() == beta.n_rows() + 1`.
pub(crate) fn log_outcome_prob_buf(
    beta: &CoefMatrix,
    x: &[f64],
    outcome: usize,
    utilities: &mut [f64],
) -> f64 {
    let base = beta.n_rows();
    for (i, u) in utilities.iter_mut().enumerate().take(base) {
        *u = dot(beta.row(i), x);
    }
    utilities[base] = 0.0;
    let u_y = utilities[outcome];
    u_y - log_sum_exp(utilities)
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Long-run state occupancy probabilities implied by the transition
/// probabilities: `(p10, p01) / (p01 + p10)`.
pub fn stationary_probs(p01: f64, p10: f64) -> Result<(f64, f64)> {
    if p01 + p10 == 0.0 {
        return Err(Error::DegenerateChain);
    }
    let denom = p01 + p10;
    Ok((p10 / denom, p01 / denom))
}

/// Log-likelihood of the panel under the given parameters.
///
/// For switching specs the coefficient matrix per record is selected by the
/// state of its period; otherwise `beta0` applies throughout and the state
/// sequence and transition probabilities are ignored. A record whose observed
/// outcome has probability zero contributes -inf; no error is raised.
pub fn log_likelihood(data: &Dataset, spec: &ModelSpec, theta: &Theta) -> f64 {
    assert_eq!(theta.states.len(), data.n_periods(), "state vector length");
    let mut total = 0.0;
    for n in 0..data.n_records() {
        let beta = if spec.switching() {
            theta.beta_for_state(theta.states[data.period(n)])
        } else {
            &theta.beta0
        };
        total += log_outcome_prob(beta, data.xs(n), data.outcome(n));
    }
    total
}
