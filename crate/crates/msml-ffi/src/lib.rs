//! C ABI for the estimation library.
//!
//! Objects cross the boundary as opaque handles created and destroyed by
//! paired `_new`/`_free` functions; every fallible call returns an
//! [`MsmlStatus`] and writes its result through out-pointers. The most recent
//! error message per thread is available through
//! [`msml_last_error_message`]. The C header is generated into
//! `include/msml.h` at build time.

use std::cell::RefCell;
use std::ffi::{c_char, c_double, c_int, CStr, CString};
use std::path::Path;

use msml::diagnostics::{gof_pvalue, mpsrf, psrf};
use msml::error::Error;
use msml::io::{CovKind, DataSchema};
use msml::mcmc::{derive_seed, run_chains, McmcConfig, PosteriorSample, PriorSpec};
use msml::mle::{fit_ml, select_covariates, MleFit, MleOptions};
use msml::model::{Dataset, ModelSpec};
use msml::posterior::{
    interval_from_draws, restrict_workflow, state_series, RestrictionOutcome, StateSeries,
};
use msml::selection::harmonic_mean_log_ml;

/// Result codes of every fallible call.
#[repr(C)]
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MsmlStatus {
    Ok = 0,
    NullArgument = 1,
    InvalidUtf8 = 2,
    Io = 3,
    Ingest = 4,
    InvalidInput = 5,
    FitFailed = 6,
    Diagnostic = 7,
    IndexOutOfRange = 8,
    /// The restriction workflow reduced the switching model to the
    /// single-state model; no posterior handle was produced.
    Collapsed = 9,
}

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::default());
}

fn set_error(message: &str) {
    let sanitized: String = message.chars().filter(|&c| c != '\0').collect();
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_for(err: &Error) -> MsmlStatus {
    match err {
        Error::Io(_) => MsmlStatus::Io,
        Error::Ingest { .. } => MsmlStatus::Ingest,
        Error::DimensionMismatch { .. } | Error::InvalidInput(_) | Error::Config(_) => {
            MsmlStatus::InvalidInput
        }
        Error::NonConvergence { .. }
        | Error::Separable { .. }
        | Error::CollinearColumn { .. }
        | Error::DegenerateInformation(_)
        | Error::DegenerateChain => MsmlStatus::FitFailed,
        Error::SampleTooSmall { .. }
        | Error::SingularCovariance { .. }
        | Error::SparseData
        | Error::UndefinedCorrelation(_) => MsmlStatus::Diagnostic,
    }
}

fn fail(err: &Error) -> MsmlStatus {
    set_error(&err.to_string());
    status_for(err)
}

/// Copy the most recent error message of this thread into `buffer`
/// (NUL-terminated, truncated to `capacity`). Returns the full message
/// length in bytes, excluding the terminator.
///
/// # Safety
/// `buffer` must point to at least `capacity` writable bytes, or be null
/// (in which case only the length is returned).
#[no_mangle]
pub unsafe extern "C" fn msml_last_error_message(buffer: *mut c_char, capacity: usize) -> usize {
    LAST_ERROR.with(|slot| {
        let msg = slot.borrow();
        let bytes = msg.as_bytes();
        if !buffer.is_null() && capacity > 0 {
            let n = bytes.len().min(capacity - 1);
            std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, n);
            *buffer.add(n) = 0;
        }
        bytes.len()
    })
}

unsafe fn cstr<'a>(ptr: *const c_char) -> Result<&'a str, MsmlStatus> {
    if ptr.is_null() {
        set_error("null string argument");
        return Err(MsmlStatus::NullArgument);
    }
    CStr::from_ptr(ptr).to_str().map_err(|_| {
        set_error("argument is not valid UTF-8");
        MsmlStatus::InvalidUtf8
    })
}

/// Opaque dataset handle.
pub struct MsmlDataset {
    data: Dataset,
}

/// Opaque maximum-likelihood fit handle.
pub struct MsmlMleFit {
    fit: MleFit,
}

/// Opaque posterior-sample handle for MCMC fits.
pub struct MsmlPosterior {
    sample: PosteriorSample,
    series: Option<StateSeries>,
}

/// MCMC run options; zero-initialized fields fall back to defaults.
#[repr(C)]
#[derive(Debug, Clone, Copy)]
pub struct MsmlMcmcOptions {
    pub chains: usize,
    pub burnin: usize,
    pub keep: usize,
    pub thin: usize,
    pub seed: u64,
    pub sigma_beta: c_double,
}

impl MsmlMcmcOptions {
    fn to_config(self) -> (McmcConfig, PriorSpec) {
        let d = McmcConfig::default();
        let config = McmcConfig {
            n_chains: if self.chains == 0 { d.n_chains } else { self.chains },
            n_burnin: if self.burnin == 0 { d.n_burnin } else { self.burnin },
            n_keep: if self.keep == 0 { d.n_keep } else { self.keep },
            thin: if self.thin == 0 { d.thin } else { self.thin },
            seed: self.seed,
            ..d
        };
        let prior = PriorSpec {
            sigma_beta: if self.sigma_beta > 0.0 {
                self.sigma_beta
            } else {
                PriorSpec::default().sigma_beta
            },
        };
        (config, prior)
    }
}

fn parse_schema(outcomes: &str, covariates: &str, n_periods: usize) -> Result<DataSchema, Error> {
    let outcome_labels: Vec<String> = outcomes
        .split(',')
        .map(|s| s.trim().to_string())
        .filter(|s| !s.is_empty())
        .collect();
    let mut cov = Vec::new();
    for item in covariates.split(',') {
        let item = item.trim();
        if item.is_empty() {
            continue;
        }
        let (name, kind) = item.split_once(':').ok_or_else(|| {
            Error::Config(format!("covariate `{item}` must be `name:dummy` or `name:quant`"))
        })?;
        let kind = match kind.trim() {
            "dummy" => CovKind::Dummy,
            "quant" | "quantitative" => CovKind::Quantitative,
            other => return Err(Error::Config(format!("unknown covariate kind `{other}`"))),
        };
        cov.push((name.trim().to_string(), kind));
    }
    let schema = DataSchema {
        outcome_labels,
        covariates: cov,
        n_periods: if n_periods == 0 { None } else { Some(n_periods) },
    };
    schema.validate()?;
    Ok(schema)
}

/// Read a dataset CSV. `outcomes` is the comma-separated ordered label list
/// (last label is the base category); `covariates` lists `name:dummy` or
/// `name:quant` column declarations (may be empty); `n_periods = 0` means
/// "largest week in the file".
///
/// # Safety
/// `path`, `outcomes` and `covariates` must be valid NUL-terminated strings;
/// `out` must be a valid pointer. The returned handle must be released with
/// [`msml_dataset_free`].
#[no_mangle]
pub unsafe extern "C" fn msml_dataset_read_csv(
    path: *const c_char,
    outcomes: *const c_char,
    covariates: *const c_char,
    n_periods: usize,
    out: *mut *mut MsmlDataset,
) -> MsmlStatus {
    if out.is_null() {
        set_error("null output pointer");
        return MsmlStatus::NullArgument;
    }
    let (path, outcomes, covariates) = match (cstr(path), cstr(outcomes), cstr(covariates)) {
        (Ok(a), Ok(b), Ok(c)) => (a, b, c),
        (Err(e), ..) | (_, Err(e), _) | (.., Err(e)) => return e,
    };
    let schema = match parse_schema(outcomes, covariates, n_periods) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    match msml::io::ingest(Path::new(path), &schema) {
        Ok((data, _)) => {
            *out = Box::into_raw(Box::new(MsmlDataset { data }));
            MsmlStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `handle` must come from [`msml_dataset_read_csv`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn msml_dataset_free(handle: *mut MsmlDataset) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live dataset handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_dataset_n_records(
    handle: *const MsmlDataset,
    out: *mut usize,
) -> MsmlStatus {
    if handle.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    *out = (*handle).data.n_records();
    MsmlStatus::Ok
}

/// # Safety
/// `handle` must be a live dataset handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_dataset_n_periods(
    handle: *const MsmlDataset,
    out: *mut usize,
) -> MsmlStatus {
    if handle.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    *out = (*handle).data.n_periods();
    MsmlStatus::Ok
}

/// Fit the single-state model by maximum likelihood. With `select != 0`,
/// backward elimination picks the covariates first.
///
/// # Safety
/// `dataset` must be a live dataset handle; `out` must be valid. The result
/// must be released with [`msml_mle_free`].
#[no_mangle]
pub unsafe extern "C" fn msml_fit_ml(
    dataset: *const MsmlDataset,
    select: c_int,
    out: *mut *mut MsmlMleFit,
) -> MsmlStatus {
    if dataset.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    let data = &(*dataset).data;
    let opts = MleOptions::default();
    let candidate = ModelSpec::ml_all_shared(data.n_outcomes(), data.n_covariates());
    let spec = if select != 0 {
        match select_covariates(data, &candidate, &opts) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        }
    } else {
        candidate
    };
    match fit_ml(data, &spec, &opts) {
        Ok(fit) => {
            *out = Box::into_raw(Box::new(MsmlMleFit { fit }));
            MsmlStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `handle` must come from [`msml_fit_ml`] and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn msml_mle_free(handle: *mut MsmlMleFit) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// # Safety
/// `handle` must be a live fit handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_mle_loglik(
    handle: *const MsmlMleFit,
    out: *mut c_double,
) -> MsmlStatus {
    if handle.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    *out = (*handle).fit.loglik;
    MsmlStatus::Ok
}

/// # Safety
/// `handle` must be a live fit handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_mle_aic(
    handle: *const MsmlMleFit,
    out: *mut c_double,
) -> MsmlStatus {
    if handle.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    *out = (*handle).fit.aic;
    MsmlStatus::Ok
}

/// Number of free coefficients in the fit.
///
/// # Safety
/// `handle` must be a live fit handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_mle_n_params(
    handle: *const MsmlMleFit,
    out: *mut usize,
) -> MsmlStatus {
    if handle.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    *out = (*handle).fit.k;
    MsmlStatus::Ok
}

/// Estimate and standard error of the coefficient for `outcome` (0-based,
/// non-base) and `covariate` (0 is the intercept). Excluded coefficients
/// report an index error.
///
/// # Safety
/// `handle` must be a live fit handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_mle_coef(
    handle: *const MsmlMleFit,
    outcome: usize,
    covariate: usize,
    estimate: *mut c_double,
    std_error: *mut c_double,
) -> MsmlStatus {
    if handle.is_null() || estimate.is_null() || std_error.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    let fit = &(*handle).fit;
    match fit.slot(outcome, covariate) {
        Some(_) => {
            *estimate = fit.beta_hat.get(outcome, covariate);
            *std_error = fit.se.get(outcome, covariate);
            MsmlStatus::Ok
        }
        None => {
            set_error("coefficient is not part of the fitted model");
            MsmlStatus::IndexOutOfRange
        }
    }
}

/// Fit the two-state switching model by MCMC. With `apply_restrictions != 0`
/// the staged credible-interval restriction workflow runs (and the call
/// reports `Collapsed` when the states merge entirely); otherwise every
/// selected coefficient stays state-specific.
///
/// # Safety
/// `dataset` must be a live dataset handle; `out` must be valid. The result
/// must be released with [`msml_posterior_free`].
#[no_mangle]
pub unsafe extern "C" fn msml_fit_msml(
    dataset: *const MsmlDataset,
    options: MsmlMcmcOptions,
    apply_restrictions: c_int,
    out: *mut *mut MsmlPosterior,
) -> MsmlStatus {
    if dataset.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    *out = std::ptr::null_mut();
    let data = &(*dataset).data;
    let (config, prior) = options.to_config();
    let mle_opts = MleOptions::default();
    let candidate = ModelSpec::ml_all_shared(data.n_outcomes(), data.n_covariates());
    let selected = match select_covariates(data, &candidate, &mle_opts) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let initial = selected.expand_to_switching();
    let sample = if apply_restrictions != 0 {
        match restrict_workflow(data, &initial, &prior, &config) {
            Ok(RestrictionOutcome::Switching { sample, .. }) => sample,
            Ok(RestrictionOutcome::Collapsed { .. }) => {
                set_error("restriction workflow collapsed the two states");
                return MsmlStatus::Collapsed;
            }
            Err(e) => return fail(&e),
        }
    } else {
        match run_chains(data, &initial, &prior, &config) {
            Ok(s) => s,
            Err(e) => return fail(&e),
        }
    };
    let series = state_series(&sample).ok();
    *out = Box::into_raw(Box::new(MsmlPosterior { sample, series }));
    MsmlStatus::Ok
}

/// Fit the single-state model by MCMC on the selected covariates.
///
/// # Safety
/// `dataset` must be a live dataset handle; `out` must be valid. The result
/// must be released with [`msml_posterior_free`].
#[no_mangle]
pub unsafe extern "C" fn msml_fit_ml_mcmc(
    dataset: *const MsmlDataset,
    options: MsmlMcmcOptions,
    out: *mut *mut MsmlPosterior,
) -> MsmlStatus {
    if dataset.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    *out = std::ptr::null_mut();
    let data = &(*dataset).data;
    let (config, prior) = options.to_config();
    let candidate = ModelSpec::ml_all_shared(data.n_outcomes(), data.n_covariates());
    let selected = match select_covariates(data, &candidate, &MleOptions::default()) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    match run_chains(data, &selected, &prior, &config) {
        Ok(sample) => {
            *out = Box::into_raw(Box::new(MsmlPosterior { sample, series: None }));
            MsmlStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// # Safety
/// `handle` must come from a fit call and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn msml_posterior_free(handle: *mut MsmlPosterior) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of continuous parameters in the posterior.
///
/// # Safety
/// `handle` must be a live posterior handle; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_posterior_n_params(
    handle: *const MsmlPosterior,
    out: *mut usize,
) -> MsmlStatus {
    if handle.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    *out = (*handle).sample.params().len();
    MsmlStatus::Ok
}

/// Copy the display name of parameter `index` into `buffer`
/// (NUL-terminated, truncated to `capacity`). Returns the name length.
///
/// # Safety
/// `handle` must be a live posterior handle; `buffer` must hold `capacity`
/// writable bytes or be null.
#[no_mangle]
pub unsafe extern "C" fn msml_posterior_param_name(
    handle: *const MsmlPosterior,
    index: usize,
    buffer: *mut c_char,
    capacity: usize,
) -> usize {
    if handle.is_null() {
        return 0;
    }
    let params = (*handle).sample.params();
    let Some(param) = params.get(index) else {
        return 0;
    };
    let name = param.to_string();
    let bytes = name.as_bytes();
    if !buffer.is_null() && capacity > 0 {
        let n = bytes.len().min(capacity - 1);
        std::ptr::copy_nonoverlapping(bytes.as_ptr() as *const c_char, buffer, n);
        *buffer.add(n) = 0;
    }
    bytes.len()
}

/// Posterior mean and equal-tail interval of parameter `index` at `level`.
///
/// # Safety
/// `handle` must be a live posterior handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_posterior_summary(
    handle: *const MsmlPosterior,
    index: usize,
    level: c_double,
    lower: *mut c_double,
    mean: *mut c_double,
    upper: *mut c_double,
) -> MsmlStatus {
    if handle.is_null() || lower.is_null() || mean.is_null() || upper.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    let sample = &(*handle).sample;
    let params = sample.params();
    let Some(param) = params.get(index) else {
        set_error("parameter index out of range");
        return MsmlStatus::IndexOutOfRange;
    };
    let draws = sample.pooled(param);
    match interval_from_draws(&draws, level) {
        Ok(ci) => {
            *lower = ci.lower;
            *mean = ci.mean;
            *upper = ci.upper;
            MsmlStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Posterior probability (and its standard deviation) of the rare state in
/// period `t` (0-based). Only switching fits carry a state series.
///
/// # Safety
/// `handle` must be a live posterior handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_posterior_state_prob(
    handle: *const MsmlPosterior,
    t: usize,
    prob: *mut c_double,
    std: *mut c_double,
) -> MsmlStatus {
    if handle.is_null() || prob.is_null() || std.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    let Some(series) = (*handle).series.as_ref() else {
        set_error("fit has no state series (single-state model)");
        return MsmlStatus::InvalidInput;
    };
    if t >= series.probs.len() {
        set_error("period index out of range");
        return MsmlStatus::IndexOutOfRange;
    }
    *prob = series.probs[t];
    *std = series.stds[t];
    MsmlStatus::Ok
}

/// Harmonic-mean log marginal likelihood with its bootstrap 95% interval.
///
/// # Safety
/// `handle` must be a live posterior handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_posterior_log_marginal(
    handle: *const MsmlPosterior,
    seed: u64,
    log_ml: *mut c_double,
    lower: *mut c_double,
    upper: *mut c_double,
) -> MsmlStatus {
    if handle.is_null() || log_ml.is_null() || lower.is_null() || upper.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    match harmonic_mean_log_ml(&(*handle).sample, seed) {
        Ok(m) => {
            *log_ml = m.log_ml;
            *lower = m.ci95.0;
            *upper = m.ci95.1;
            MsmlStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Maximum univariate potential scale reduction factor over the continuous
/// parameters, and the multivariate factor.
///
/// # Safety
/// `handle` must be a live posterior handle; out-pointers must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_posterior_convergence(
    handle: *const MsmlPosterior,
    max_psrf: *mut c_double,
    mpsrf_out: *mut c_double,
) -> MsmlStatus {
    if handle.is_null() || max_psrf.is_null() || mpsrf_out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    let sample = &(*handle).sample;
    let mut worst = 1.0f64;
    for p in sample.params() {
        match psrf(&sample.per_chain(&p)) {
            Ok(r) => worst = worst.max(r),
            Err(e) => return fail(&e),
        }
    }
    let joint: Vec<Vec<Vec<f64>>> = sample
        .chains
        .iter()
        .map(|c| {
            c.thetas
                .iter()
                .map(|t| {
                    sample
                        .params()
                        .iter()
                        .map(|p| PosteriorSample::extract(t, p))
                        .collect()
                })
                .collect()
        })
        .collect();
    match mpsrf(&joint) {
        Ok(m) => {
            *max_psrf = worst;
            *mpsrf_out = m;
            MsmlStatus::Ok
        }
        Err(e) => fail(&e),
    }
}

/// Monte Carlo goodness-of-fit p-value for a posterior fit at its posterior
/// means.
///
/// # Safety
/// `dataset` and `handle` must be live handles; `out` must be valid.
#[no_mangle]
pub unsafe extern "C" fn msml_posterior_gof(
    dataset: *const MsmlDataset,
    handle: *const MsmlPosterior,
    replicates: usize,
    seed: u64,
    out: *mut c_double,
) -> MsmlStatus {
    if dataset.is_null() || handle.is_null() || out.is_null() {
        set_error("null argument");
        return MsmlStatus::NullArgument;
    }
    let sample = &(*handle).sample;
    let point = sample.posterior_mean_point();
    match gof_pvalue(
        &(*dataset).data,
        &point,
        sample.spec.switching(),
        replicates,
        derive_seed(seed, 12),
    ) {
        Ok(p) => {
            *out = p;
            MsmlStatus::Ok
        }
        Err(e) => fail(&e),
    }
}
