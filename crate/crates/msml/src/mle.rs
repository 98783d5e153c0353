//! Maximum likelihood estimation of the single-state multinomial logit:
//! Newton-Raphson with analytic gradient and Hessian, Wald t-tests against
//! the standard normal, and AIC-guided backward elimination of covariates.

use crate::error::{Error, Result};
use crate::linalg;
use crate::model::{CoefMatrix, CoefRole, Dataset, ModelSpec};
use crate::stats::std_normal_cdf;

#[derive(Debug, Clone)]
pub struct MleOptions {
    pub max_iter: usize,
    pub grad_tol: f64,
    /// Any |beta| beyond this aborts with a separable-data error.
    pub beta_bound: f64,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            max_iter: 100,
            grad_tol: 1e-6,
            beta_bound: 50.0,
        }
    }
}

/// Fitted single-state model with observed-information standard errors.
#[derive(Debug, Clone)]
pub struct MleFit {
    pub spec: ModelSpec,
    pub beta_hat: CoefMatrix,
    pub se: CoefMatrix,
    pub loglik: f64,
    /// Free-parameter count.
    pub k: usize,
    pub aic: f64,
    /// K x K inverse observed information, row-major, in `param_index` order.
    pub cov: Vec<f64>,
    /// (outcome, covariate) for each free slot.
    pub param_index: Vec<(usize, usize)>,
}

impl MleFit {
    pub fn slot(&self, outcome: usize, cov: usize) -> Option<usize> {
        self.param_index.iter().position(|&p| p == (outcome, cov))
    }
}

/// Newton-Raphson maximizer of the multinomial logit log-likelihood.
pub fn fit_ml(data: &Dataset, spec: &ModelSpec, opts: &MleOptions) -> Result<MleFit> {
    if spec.switching() {
        return Err(Error::InvalidInput(
            "fit_ml requires a non-switching spec".into(),
        ));
    }
    if data.is_empty() {
        return Err(Error::InvalidInput("dataset has no records".into()));
    }
    if data.n_covariates() != spec.n_covariates() || data.n_outcomes() != spec.n_outcomes() {
        return Err(Error::InvalidInput(format!(
            "spec shape ({}, {}) does not match dataset ({}, {})",
            spec.n_outcomes(),
            spec.n_covariates(),
            data.n_outcomes(),
            data.n_covariates()
        )));
    }
    // A constant covariate column duplicates the intercept.
    for d in 1..data.n_covariates() {
        let first = data.xs(0)[d];
        if (0..data.n_records()).all(|n| data.xs(n)[d] == first) {
            return Err(Error::CollinearColumn { cov: d });
        }
    }

    let params = spec.included_entries();
    let k = params.len();
    let mut beta = vec![0.0; k];
    let mut eval = Workspace::new(data, spec, &params);

    let (mut ll, mut grad, mut neg_hess) = eval.evaluate(data, &beta);
    for iter in 0..opts.max_iter {
        let grad_norm = grad.iter().cloned().fold(0.0f64, |a, g| a.max(g.abs()));
        if grad_norm < opts.grad_tol {
            return finish(data, spec, params, beta, ll, &mut eval, opts);
        }
        // Newton direction; fall back to scaled gradient ascent when the
        // negated Hessian is not positive definite.
        let direction = match linalg::cholesky(&neg_hess, k) {
            Ok(l) => linalg::chol_solve(&l, k, &grad),
            Err(_) => {
                let scale = 1.0 / grad_norm.max(1.0);
                grad.iter().map(|g| g * scale).collect()
            }
        };
        // Backtracking line search. Near the optimum the true improvement of
        // a full Newton step drops below f64 rounding of the log-likelihood,
        // so a tiny decrease is tolerated; concavity plus the gradient check
        // at the top of the loop still guarantee termination.
        let mut step = 1.0;
        let mut improved = false;
        for _ in 0..40 {
            let trial: Vec<f64> = beta
                .iter()
                .zip(&direction)
                .map(|(b, d)| b + step * d)
                .collect();
            let trial_ll = eval.loglik_only(data, &trial);
            if trial_ll > ll - 1e-9 {
                beta = trial;
                improved = true;
                break;
            }
            step *= 0.5;
        }
        if !improved {
            return Err(Error::NonConvergence {
                iterations: iter,
                grad_norm,
                last_point: beta,
            });
        }
        for (slot, &b) in beta.iter().enumerate() {
            if b.abs() > opts.beta_bound {
                let (outcome, cov) = params[slot];
                return Err(Error::Separable {
                    outcome: outcome + 1,
                    cov,
                    value: b,
                    bound: opts.beta_bound,
                });
            }
        }
        let next = eval.evaluate(data, &beta);
        ll = next.0;
        grad = next.1;
        neg_hess = next.2;
    }
    let grad_norm = grad.iter().cloned().fold(0.0f64, |a, g| a.max(g.abs()));
    if grad_norm < opts.grad_tol {
        return finish(data, spec, params, beta, ll, &mut eval, opts);
    }
    Err(Error::NonConvergence {
        iterations: opts.max_iter,
        grad_norm,
        last_point: beta,
    })
}

fn finish(
    data: &Dataset,
    spec: &ModelSpec,
    params: Vec<(usize, usize)>,
    beta: Vec<f64>,
    ll: f64,
    eval: &mut Workspace,
    _opts: &MleOptions,
) -> Result<MleFit> {
    let k = params.len();
    let (_, _, neg_hess) = eval.evaluate(data, &beta);
    let l = linalg::cholesky(&neg_hess, k).map_err(|pivot| {
        let (outcome, cov) = params[pivot];
        Error::DegenerateInformation(format!(
            "information matrix singular at outcome {}, covariate {}",
            outcome + 1,
            cov
        ))
    })?;
    let cov = linalg::chol_inverse(&l, k);
    let mut beta_hat = CoefMatrix::zeros(spec.n_outcomes() - 1, spec.n_covariates());
    let mut se = CoefMatrix::zeros(spec.n_outcomes() - 1, spec.n_covariates());
    for (slot, &(i, d)) in params.iter().enumerate() {
        beta_hat.set(i, d, beta[slot]);
        se.set(i, d, cov[slot * k + slot].max(0.0).sqrt());
    }
    Ok(MleFit {
        spec: spec.clone(),
        beta_hat,
        se,
        loglik: ll,
        k,
        aic: 2.0 * k as f64 - 2.0 * ll,
        cov,
        param_index: params,
    })
}

/// Per-call scratch for likelihood, gradient and Hessian accumulation.
struct Workspace {
    params: Vec<(usize, usize)>,
    probs: Vec<f64>,
    beta_mat: CoefMatrix,
}

impl Workspace {
    fn new(data: &Dataset, spec: &ModelSpec, params: &[(usize, usize)]) -> Self {
        let rows = spec.n_outcomes() - 1;
        Self {
            params: params.to_vec(),
            probs: vec![0.0; data.n_outcomes()],
            beta_mat: CoefMatrix::zeros(rows, spec.n_covariates()),
        }
    }

    fn unpack(&mut self, beta: &[f64]) {
        for v in 0..self.beta_mat.n_rows() {
            for d in 0..self.beta_mat.n_cols() {
                self.beta_mat.set(v, d, 0.0);
            }
        }
        for (slot, &(i, d)) in self.params.iter().enumerate() {
            self.beta_mat.set(i, d, beta[slot]);
        }
    }

    fn loglik_only(&mut self, data: &Dataset, beta: &[f64]) -> f64 {
        self.unpack(beta);
        let mut ll = 0.0;
        for n in 0..data.n_records() {
            crate::model::outcome_probs_into(&self.beta_mat, data.xs(n), &mut self.probs);
            ll += self.probs[data.outcome(n)].ln();
        }
        ll
    }

    /// Returns (loglik, gradient, negated Hessian).
    fn evaluate(&mut self, data: &Dataset, beta: &[f64]) -> (f64, Vec<f64>, Vec<f64>) {
        self.unpack(beta);
        let k = self.params.len();
        let mut ll = 0.0;
        let mut grad = vec![0.0; k];
        let mut neg_hess = vec![0.0; k * k];
        for n in 0..data.n_records() {
            let x = data.xs(n);
            crate::model::outcome_probs_into(&self.beta_mat, x, &mut self.probs);
            let y = data.outcome(n);
            ll += self.probs[y].ln();
            for (slot_a, &(i, d)) in self.params.iter().enumerate() {
                let pi = self.probs[i];
                let indicator = if y == i { 1.0 } else { 0.0 };
                grad[slot_a] += x[d] * (indicator - pi);
                // Upper triangle of -H: x_d x_e * P_i (delta_ij - P_j).
                for (slot_b, &(j, e)) in self.params.iter().enumerate().skip(slot_a) {
                    let pj = self.probs[j];
                    let w = if i == j { pi * (1.0 - pi) } else { -pi * pj };
                    neg_hess[slot_a * k + slot_b] += x[d] * x[e] * w;
                }
            }
        }
        for a in 0..k {
            for b in 0..a {
                neg_hess[a * k + b] = neg_hess[b * k + a];
            }
        }
        (ll, grad, neg_hess)
    }
}

/// Wald statistic and two-sided p-value from the standard normal reference.
pub fn wald_t(fit: &MleFit, outcome: usize, cov: usize) -> Result<(f64, f64)> {
    fit.slot(outcome, cov).ok_or_else(|| {
        Error::InvalidInput(format!(
            "coefficient (outcome {}, covariate {}) is not in the model",
            outcome + 1,
            cov
        ))
    })?;
    let est = fit.beta_hat.get(outcome, cov);
    let se = fit.se.get(outcome, cov);
    if se == 0.0 {
        return Err(Error::DegenerateInformation(format!(
            "zero standard error for outcome {}, covariate {}",
            outcome + 1,
            cov
        )));
    }
    let t = est / se;
    let p = 2.0 * (1.0 - std_normal_cdf(t.abs()));
    Ok((t, p))
}

/// Greedy backward elimination: repeatedly drop the non-intercept coefficient
/// with the largest p-value above 0.05, keeping the drop only if AIC does not
/// increase. Ties on p-value break toward the lowest (outcome, covariate)
/// index. Deterministic.
pub fn select_covariates(
    data: &Dataset,
    candidate: &ModelSpec,
    opts: &MleOptions,
) -> Result<ModelSpec> {
    let mut spec = candidate.clone();
    loop {
        let fit = fit_ml(data, &spec, opts)?;
        let mut droppable: Vec<(f64, usize, usize)> = Vec::new();
        for &(i, d) in &fit.param_index {
            if d == 0 {
                continue; // intercepts stay
            }
            let (_, p) = wald_t(&fit, i, d)?;
            if p > 0.05 {
                droppable.push((p, i, d));
            }
        }
        droppable.sort_by(|a, b| {
            b.0.partial_cmp(&a.0)
                .unwrap()
                .then_with(|| (a.1, a.2).cmp(&(b.1, b.2)))
        });
        let mut accepted = false;
        for &(_, i, d) in &droppable {
            let trial = spec.with_role(i, d, CoefRole::Excluded)?;
            match fit_ml(data, &trial, opts) {
                Ok(trial_fit) if trial_fit.aic <= fit.aic => {
                    spec = trial;
                    accepted = true;
                    break;
                }
                Ok(_) => {}
                Err(Error::CollinearColumn { .. }) => {}
                Err(e) => return Err(e),
            }
        }
        if !accepted {
            return Ok(spec);
        }
    }
}
