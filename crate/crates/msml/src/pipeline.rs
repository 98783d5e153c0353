//! Batch orchestration: fit the baseline and switching models, compare them,
//! run diagnostics, and emit the report files.
//!
//! Per fitted model the pipeline writes a parameter table CSV (estimate and
//! 95% interval), a JSON report, and for MCMC fits a full-precision raw
//! draws CSV; the switching fit additionally writes the per-week state
//! probability series. Report numbers are rounded to six significant digits;
//! the raw draws keep full precision. All randomness is derived from the one
//! master seed, so a rerun reproduces every output byte for byte.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::diagnostics::{gof_pvalue, mpsrf, psrf};
use crate::error::{Error, Result};
use crate::io::{ConfigFile, CovKind, DataSchema};
use crate::mcmc::{derive_seed, run_chains, McmcConfig, Param, PosteriorSample, PriorSpec};
use crate::mle::{fit_ml, select_covariates, MleFit, MleOptions};
use crate::model::{stationary_probs, Dataset, ModelPoint, ModelSpec};
use crate::posterior::{
    averaged_outcome_probs, interval_from_draws, restrict_workflow, state_series, summarize,
    RestrictionOutcome,
};
use crate::selection::{bayes_factor, harmonic_mean_log_ml, MarginalLik};

/// Round to the given number of significant digits (report formatting).
pub fn round_sig(x: f64, digits: u32) -> f64 {
    if x == 0.0 || !x.is_finite() {
        return x;
    }
    let mag = x.abs().log10().floor();
    let factor = 10f64.powf(digits as f64 - 1.0 - mag);
    (x * factor).round() / factor
}

/// Everything a run needs beyond the dataset itself.
#[derive(Debug, Clone)]
pub struct RunSettings {
    pub schema: DataSchema,
    pub data_path: Option<PathBuf>,
    pub mcmc: McmcConfig,
    pub prior: PriorSpec,
    pub mle: MleOptions,
    pub gof_replicates: usize,
}

impl RunSettings {
    /// Build settings from a parsed config file. CLI flags override after.
    pub fn from_config(cfg: &ConfigFile) -> Result<Self> {
        let outcomes: Vec<String> = cfg
            .require("data", "outcomes")?
            .split(',')
            .map(|s| s.trim().to_string())
            .filter(|s| !s.is_empty())
            .collect();
        let covariates = match cfg.get("data", "covariates") {
            None => Vec::new(),
            Some(raw) => raw
                .split(',')
                .map(|item| {
                    let item = item.trim();
                    if item.is_empty() {
                        return Err(Error::Config("empty covariate entry".into()));
                    }
                    let (name, kind) = item.split_once(':').ok_or_else(|| {
                        Error::Config(format!(
                            "covariate `{item}` must be `name:dummy` or `name:quant`"
                        ))
                    })?;
                    let kind = match kind.trim() {
                        "dummy" => CovKind::Dummy,
                        "quant" | "quantitative" => CovKind::Quantitative,
                        other => {
                            return Err(Error::Config(format!(
                                "unknown covariate kind `{other}`"
                            )))
                        }
                    };
                    Ok((name.trim().to_string(), kind))
                })
                .collect::<Result<Vec<_>>>()?,
        };
        let schema = DataSchema {
            outcome_labels: outcomes,
            covariates,
            n_periods: cfg.get_parsed("data", "periods")?,
        };
        schema.validate()?;
        let defaults = McmcConfig::default();
        let mcmc = McmcConfig {
            n_chains: cfg.get_parsed("mcmc", "chains")?.unwrap_or(defaults.n_chains),
            n_burnin: cfg.get_parsed("mcmc", "burnin")?.unwrap_or(defaults.n_burnin),
            n_keep: cfg.get_parsed("mcmc", "keep")?.unwrap_or(defaults.n_keep),
            thin: cfg.get_parsed("mcmc", "thin")?.unwrap_or(defaults.thin),
            seed: cfg.get_parsed("mcmc", "seed")?.unwrap_or(defaults.seed),
            initial_step: cfg
                .get_parsed("mcmc", "initial_step")?
                .unwrap_or(defaults.initial_step),
            target_accept: cfg
                .get_parsed("mcmc", "target_accept")?
                .unwrap_or(defaults.target_accept),
        };
        let prior = PriorSpec {
            sigma_beta: cfg
                .get_parsed("mcmc", "sigma_beta")?
                .unwrap_or(PriorSpec::default().sigma_beta),
        };
        let mle_defaults = MleOptions::default();
        let mle = MleOptions {
            max_iter: cfg.get_parsed("mle", "max_iter")?.unwrap_or(mle_defaults.max_iter),
            grad_tol: cfg.get_parsed("mle", "grad_tol")?.unwrap_or(mle_defaults.grad_tol),
            beta_bound: cfg
                .get_parsed("mle", "beta_bound")?
                .unwrap_or(mle_defaults.beta_bound),
        };
        Ok(Self {
            schema,
            data_path: cfg.get("data", "path").map(PathBuf::from),
            mcmc,
            prior,
            mle,
            gof_replicates: cfg.get_parsed("gof", "replicates")?.unwrap_or(10_000),
        })
    }

    pub fn covariate_label(&self, d: usize) -> String {
        if d == 0 {
            "intercept".to_string()
        } else {
            self.schema.covariates[d - 1].0.clone()
        }
    }
}

/// One row of the parameter table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ParamRow {
    pub parameter: String,
    pub outcome: String,
    pub covariate: String,
    /// "shared", "0", "1", or "" for single-state fits.
    pub state: String,
    pub estimate: f64,
    pub lower95: f64,
    pub upper95: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LoglikSummary {
    pub mean: f64,
    pub lower95: f64,
    pub upper95: f64,
}

/// Per-model report, serialized as JSON next to the parameter table.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FitReport {
    pub model: String,
    pub n_obs: usize,
    pub outcome_counts: Vec<usize>,
    pub n_free_beta: usize,
    pub params: Vec<ParamRow>,
    /// Full-precision point estimates for reanalysis (posterior means for
    /// MCMC fits, the MLE point otherwise).
    pub point: ModelPoint,
    pub switching: bool,
    pub aic: Option<f64>,
    pub max_loglik: f64,
    pub posterior_loglik: Option<LoglikSummary>,
    pub marginal_loglik: Option<MarginalLik>,
    pub gof_pvalue: Option<f64>,
    pub max_psrf: Option<f64>,
    pub mpsrf: Option<f64>,
    /// Mean acceptance rate per block label across chains.
    pub acceptance_rates: Vec<(String, f64)>,
    pub stationary: Option<(f64, f64)>,
    pub averaged_outcome_probs: Option<[Vec<f64>; 2]>,
    pub warnings: Vec<String>,
}

fn rounded(mut report: FitReport) -> FitReport {
    for row in report.params.iter_mut() {
        row.estimate = round_sig(row.estimate, 6);
        row.lower95 = round_sig(row.lower95, 6);
        row.upper95 = round_sig(row.upper95, 6);
    }
    if let Some(a) = report.aic.as_mut() {
        *a = round_sig(*a, 6);
    }
    report.max_loglik = round_sig(report.max_loglik, 6);
    if let Some(s) = report.posterior_loglik.as_mut() {
        s.mean = round_sig(s.mean, 6);
        s.lower95 = round_sig(s.lower95, 6);
        s.upper95 = round_sig(s.upper95, 6);
    }
    if let Some(m) = report.marginal_loglik.as_mut() {
        m.log_ml = round_sig(m.log_ml, 6);
        m.ci95 = (round_sig(m.ci95.0, 6), round_sig(m.ci95.1, 6));
    }
    if let Some(p) = report.gof_pvalue.as_mut() {
        *p = round_sig(*p, 6);
    }
    if let Some(p) = report.max_psrf.as_mut() {
        *p = round_sig(*p, 6);
    }
    if let Some(p) = report.mpsrf.as_mut() {
        *p = round_sig(*p, 6);
    }
    for (_, r) in report.acceptance_rates.iter_mut() {
        *r = round_sig(*r, 6);
    }
    if let Some((a, b)) = report.stationary.as_mut() {
        *a = round_sig(*a, 6);
        *b = round_sig(*b, 6);
    }
    if let Some(tables) = report.averaged_outcome_probs.as_mut() {
        for t in tables.iter_mut() {
            for v in t.iter_mut() {
                *v = round_sig(*v, 6);
            }
        }
    }
    report
}

fn outcome_label(settings: &RunSettings, i: usize) -> String {
    settings.schema.outcome_labels[i].clone()
}

/// Report for a maximum-likelihood fit; intervals are +-1.96 standard errors.
pub fn mle_report(data: &Dataset, fit: &MleFit, settings: &RunSettings) -> FitReport {
    let mut params = Vec::new();
    for &(i, d) in &fit.param_index {
        let est = fit.beta_hat.get(i, d);
        let se = fit.se.get(i, d);
        params.push(ParamRow {
            parameter: format!("beta[{}][{}]", i + 1, settings.covariate_label(d)),
            outcome: outcome_label(settings, i),
            covariate: settings.covariate_label(d),
            state: String::new(),
            estimate: est,
            lower95: est - 1.96 * se,
            upper95: est + 1.96 * se,
        });
    }
    FitReport {
        model: "ml-mle".into(),
        n_obs: data.n_records(),
        outcome_counts: data.outcome_counts(),
        n_free_beta: fit.k,
        params,
        point: ModelPoint::single_state(fit.beta_hat.clone()),
        switching: false,
        aic: Some(fit.aic),
        max_loglik: fit.loglik,
        posterior_loglik: None,
        marginal_loglik: None,
        gof_pvalue: None,
        max_psrf: None,
        mpsrf: None,
        acceptance_rates: Vec::new(),
        stationary: None,
        averaged_outcome_probs: None,
        warnings: Vec::new(),
    }
}

fn param_row(
    settings: &RunSettings,
    param: &Param,
    ci: &crate::posterior::CredibleInterval,
) -> ParamRow {
    match *param {
        Param::Beta { state, outcome, cov } => ParamRow {
            parameter: format!(
                "beta{}[{}][{}]",
                state.map_or(String::new(), |s| s.to_string()),
                outcome + 1,
                settings.covariate_label(cov)
            ),
            outcome: outcome_label(settings, outcome),
            covariate: settings.covariate_label(cov),
            state: state.map_or("shared".to_string(), |s| s.to_string()),
            estimate: ci.mean,
            lower95: ci.lower,
            upper95: ci.upper,
        },
        Param::P01 | Param::P10 => ParamRow {
            parameter: if matches!(param, Param::P01) { "p01" } else { "p10" }.into(),
            outcome: String::new(),
            covariate: String::new(),
            state: String::new(),
            estimate: ci.mean,
            lower95: ci.lower,
            upper95: ci.upper,
        },
    }
}

/// Report for an MCMC fit (single-state or switching): posterior summaries,
/// marginal likelihood, goodness of fit and convergence diagnostics.
pub fn mcmc_report(
    data: &Dataset,
    sample: &PosteriorSample,
    settings: &RunSettings,
    model_name: &str,
    seed_stream: u64,
) -> Result<FitReport> {
    let intervals = summarize(sample, 0.95)?;
    let params: Vec<ParamRow> = intervals
        .iter()
        .map(|(p, ci)| param_row(settings, p, ci))
        .collect();
    let point = sample.posterior_mean_point();
    let switching = sample.spec.switching();

    let marginal = harmonic_mean_log_ml(sample, derive_seed(seed_stream, 1))?;
    let gof = if data.is_empty() {
        None
    } else {
        Some(gof_pvalue(
            data,
            &point,
            switching,
            settings.gof_replicates,
            derive_seed(seed_stream, 2),
        )?)
    };

    let logliks = sample.pooled_logliks();
    let ll_ci = interval_from_draws(&logliks, 0.95)?;
    let posterior_loglik = Some(LoglikSummary {
        mean: ll_ci.mean,
        lower95: ll_ci.lower,
        upper95: ll_ci.upper,
    });

    let (max_psrf_v, mpsrf_v) = if sample.chains.len() >= 2 {
        let mut worst: f64 = 1.0;
        for p in sample.params() {
            let chains = sample.per_chain(&p);
            worst = worst.max(psrf(&chains)?);
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
        (Some(worst), Some(mpsrf(&joint)?))
    } else {
        (None, None)
    };

    // Mean acceptance rate per block label across chains.
    let mut acceptance: Vec<(String, f64)> = Vec::new();
    if let Some(first) = sample.chains.first() {
        for (bi, block) in first.blocks.iter().enumerate() {
            let rates: Vec<f64> = sample
                .chains
                .iter()
                .map(|c| c.blocks[bi].rate())
                .filter(|r| r.is_finite())
                .collect();
            if !rates.is_empty() {
                acceptance.push((block.label.clone(), crate::stats::mean(&rates)));
            }
        }
    }

    let stationary = if switching {
        Some(stationary_probs(point.p01, point.p10)?)
    } else {
        None
    };
    let averaged = if data.is_empty() {
        None
    } else {
        Some(averaged_outcome_probs(sample, data)?)
    };

    Ok(FitReport {
        model: model_name.into(),
        n_obs: data.n_records(),
        outcome_counts: data.outcome_counts(),
        n_free_beta: sample.spec.n_free_beta(),
        params,
        point,
        switching,
        aic: None,
        max_loglik: sample.max_observed_loglik(),
        posterior_loglik,
        marginal_loglik: Some(marginal),
        gof_pvalue: gof,
        max_psrf: max_psrf_v,
        mpsrf: mpsrf_v,
        acceptance_rates: acceptance,
        stationary,
        averaged_outcome_probs: averaged,
        warnings: sample.warnings.clone(),
    })
}

fn params_csv(report: &FitReport) -> String {
    let mut out = String::from("parameter,outcome,covariate,state,estimate,lower95,upper95\n");
    for r in &report.params {
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{}",
            r.parameter, r.outcome, r.covariate, r.state, r.estimate, r.lower95, r.upper95
        );
    }
    out
}

fn draws_csv(sample: &PosteriorSample) -> String {
    let params = sample.params();
    let mut out = String::from("chain,draw,loglik");
    for p in &params {
        let _ = write!(out, ",{p}");
    }
    if sample.spec.switching() {
        out.push_str(",states");
    }
    out.push('\n');
    for (c, chain) in sample.chains.iter().enumerate() {
        for (k, theta) in chain.thetas.iter().enumerate() {
            let _ = write!(out, "{},{},{}", c, k, chain.logliks[k]);
            for p in &params {
                let _ = write!(out, ",{}", PosteriorSample::extract(theta, p));
            }
            if sample.spec.switching() {
                out.push(',');
                for &s in &theta.states {
                    out.push(if s == 0 { '0' } else { '1' });
                }
            }
            out.push('\n');
        }
    }
    out
}

fn states_csv(series: &crate::posterior::StateSeries) -> String {
    let mut out = String::from("week,prob_state1,std\n");
    for t in 0..series.probs.len() {
        let _ = writeln!(
            out,
            "{},{},{}",
            t + 1,
            round_sig(series.probs[t], 6),
            round_sig(series.stds[t], 6)
        );
    }
    out
}

fn write_report(dir: &Path, report: &FitReport) -> Result<()> {
    std::fs::create_dir_all(dir)?;
    let pretty = rounded(report.clone());
    std::fs::write(dir.join("params.csv"), params_csv(&pretty))?;
    let json = serde_json::to_string_pretty(&pretty)
        .map_err(|e| Error::Config(format!("report serialization: {e}")))?;
    std::fs::write(dir.join("report.json"), json)?;
    Ok(())
}

/// Write the standard file set of one fitted model: parameter table and JSON
/// report, plus the raw draws (and, for switching fits, the state series)
/// when a posterior sample is given.
pub fn write_fit_outputs(
    dir: &Path,
    report: &FitReport,
    sample: Option<&PosteriorSample>,
) -> Result<()> {
    write_report(dir, report)?;
    if let Some(sample) = sample {
        std::fs::write(dir.join("draws.csv"), draws_csv(sample))?;
        if sample.spec.switching() {
            let series = state_series(sample)?;
            std::fs::write(dir.join("states.csv"), states_csv(&series))?;
        }
    }
    Ok(())
}

pub fn load_report(path: &Path) -> Result<FitReport> {
    let text = std::fs::read_to_string(path)?;
    serde_json::from_str(&text).map_err(|e| Error::Config(format!("cannot parse report: {e}")))
}

/// Model-comparison summary across the pipeline's fits.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ComparisonReport {
    pub log_ml_ml_mcmc: MarginalLik,
    pub log_ml_msml: Option<MarginalLik>,
    /// Positive favors the switching model.
    pub log_bayes_factor_msml_over_ml: Option<f64>,
    pub msml_collapsed: bool,
}

#[derive(Debug)]
pub struct PipelineOutput {
    pub selected_spec: ModelSpec,
    pub mle: FitReport,
    pub ml_mcmc: FitReport,
    pub msml: Option<FitReport>,
    pub comparison: ComparisonReport,
    pub out_dir: PathBuf,
}

/// The full estimation protocol: select covariates and fit the baseline by
/// maximum likelihood, refit the same spec by MCMC, then fit the switching
/// model through the staged restriction workflow; compare marginal
/// likelihoods and write every report under `out_dir`.
pub fn run_pipeline(
    data: &Dataset,
    settings: &RunSettings,
    out_dir: &Path,
) -> Result<PipelineOutput> {
    std::fs::create_dir_all(out_dir)?;
    let candidate = ModelSpec::ml_all_shared(data.n_outcomes(), data.n_covariates());
    let selected = select_covariates(data, &candidate, &settings.mle)?;
    let mle_fit = fit_ml(data, &selected, &settings.mle)?;
    let mut mle_rep = mle_report(data, &mle_fit, settings);
    mle_rep.gof_pvalue = Some(gof_pvalue(
        data,
        &mle_rep.point,
        false,
        settings.gof_replicates,
        derive_seed(settings.mcmc.seed, 900),
    )?);
    write_report(&out_dir.join("ml_mle"), &mle_rep)?;

    // Same spec by MCMC.
    let ml_cfg = McmcConfig {
        seed: derive_seed(settings.mcmc.seed, 101),
        ..settings.mcmc.clone()
    };
    let ml_sample = run_chains(data, &selected, &settings.prior, &ml_cfg)?;
    let ml_rep = mcmc_report(data, &ml_sample, settings, "ml-mcmc", ml_cfg.seed)?;
    write_fit_outputs(&out_dir.join("ml_mcmc"), &ml_rep, Some(&ml_sample))?;

    // Switching model via the restriction workflow.
    let msml_cfg = McmcConfig {
        seed: derive_seed(settings.mcmc.seed, 102),
        ..settings.mcmc.clone()
    };
    let initial = selected.expand_to_switching();
    let outcome = restrict_workflow(data, &initial, &settings.prior, &msml_cfg)?;
    std::fs::write(
        out_dir.join("restrictions.txt"),
        outcome.trace().join("\n") + "\n",
    )?;
    let (msml_rep, comparison) = match outcome {
        RestrictionOutcome::Switching { sample, .. } => {
            let rep = mcmc_report(data, &sample, settings, "msml", msml_cfg.seed)?;
            write_fit_outputs(&out_dir.join("msml"), &rep, Some(&sample))?;
            let comparison = ComparisonReport {
                log_ml_ml_mcmc: ml_rep.marginal_loglik.expect("mcmc report carries it"),
                log_ml_msml: rep.marginal_loglik,
                log_bayes_factor_msml_over_ml: rep.marginal_loglik.map(|m| {
                    round_sig(
                        bayes_factor(&ml_rep.marginal_loglik.expect("present"), &m),
                        6,
                    )
                }),
                msml_collapsed: false,
            };
            (Some(rep), comparison)
        }
        RestrictionOutcome::Collapsed { .. } => {
            let comparison = ComparisonReport {
                log_ml_ml_mcmc: ml_rep.marginal_loglik.expect("mcmc report carries it"),
                log_ml_msml: None,
                log_bayes_factor_msml_over_ml: None,
                msml_collapsed: true,
            };
            (None, comparison)
        }
    };
    let json = serde_json::to_string_pretty(&comparison)
        .map_err(|e| Error::Config(format!("comparison serialization: {e}")))?;
    std::fs::write(out_dir.join("comparison.json"), json)?;

    Ok(PipelineOutput {
        selected_spec: selected,
        mle: mle_rep,
        ml_mcmc: ml_rep,
        msml: msml_rep,
        comparison,
        out_dir: out_dir.to_path_buf(),
    })
}
