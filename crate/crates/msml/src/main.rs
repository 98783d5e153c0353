//! Command-line front end: dataset generation, model fitting, comparison,
//! goodness of fit and correlation analysis, driven by a sectioned
//! key-value config file.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use rand::rngs::StdRng;
use rand::SeedableRng;

use msml::corr::{corr_matrix, weekly_average, weekly_harmonic_visibility, NamedSeries};
use msml::diagnostics::gof_pvalue;
use msml::error::{Category, Error};
use msml::io::{ConfigFile, DataSchema, IngestSummary};
use msml::mcmc::derive_seed;
use msml::model::{CoefMatrix, Dataset, ModelPoint, ModelSpec};
use msml::pipeline::{self, load_report, round_sig, RunSettings};
use msml::posterior::StateSeries;
use msml::synth::{generate, CovariateKind, GenConfig, PeriodCounts};

#[derive(Parser)]
#[command(name = "msml", version, about = "Markov-switching multinomial logit estimation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct CommonOpts {
    /// Run configuration file (sectioned key = value format).
    #[arg(long)]
    config: PathBuf,
    /// Override the dataset path from [data] path.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Output directory.
    #[arg(long, default_value = "out")]
    out: PathBuf,
    /// Master RNG seed (overrides config and MSML_SEED).
    #[arg(long)]
    seed: Option<u64>,
    /// Number of MCMC chains.
    #[arg(long)]
    chains: Option<usize>,
    /// Burn-in sweeps per chain.
    #[arg(long)]
    burnin: Option<usize>,
    /// Kept draws per chain.
    #[arg(long)]
    keep: Option<usize>,
    /// Thinning interval.
    #[arg(long)]
    thin: Option<usize>,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset from the [generate] section.
    Generate(CommonOpts),
    /// Fit the single-state model by maximum likelihood with covariate
    /// selection.
    FitMl(CommonOpts),
    /// Fit the switching model through the staged restriction workflow.
    FitMsml(CommonOpts),
    /// Run the full protocol: ML by MLE, ML by MCMC, switching model,
    /// comparison and diagnostics.
    Pipeline(CommonOpts),
    /// Compare two fitted models by their stored marginal likelihoods.
    Compare {
        /// Baseline model report.json.
        #[arg(long)]
        report_a: PathBuf,
        /// Alternative model report.json.
        #[arg(long)]
        report_b: PathBuf,
    },
    /// Recompute the goodness-of-fit p-value for a stored fit.
    Gof {
        #[command(flatten)]
        common: CommonOpts,
        /// report.json of the fitted model.
        #[arg(long)]
        report: PathBuf,
        /// Monte Carlo replicates.
        #[arg(long)]
        replicates: Option<usize>,
    },
    /// Weighted correlations of state series and external series.
    Correlate {
        /// State-series CSV (week,prob_state1,std); repeatable.
        #[arg(long = "series")]
        series: Vec<PathBuf>,
        /// External weekly series CSV (week,value); repeatable.
        #[arg(long = "external")]
        external: Vec<PathBuf>,
        /// External daily series CSV averaged into weeks of 7 days.
        #[arg(long = "external-daily-mean")]
        external_daily_mean: Vec<PathBuf>,
        /// External daily visibility CSV, harmonic weekly mean with a
        /// 0.25-mile floor.
        #[arg(long = "external-daily-visibility")]
        external_daily_visibility: Vec<PathBuf>,
        /// Week subset, e.g. `1-13,45-52`; default all weeks.
        #[arg(long)]
        weeks: Option<String>,
        /// Output CSV path (stdout if omitted).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

fn exit_code_for(err: &Error) -> u8 {
    match err.category() {
        Category::Config => 1,
        Category::Ingest => 2,
        Category::Fit => 3,
        Category::Diagnostic => 4,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}

fn env_seed() -> Option<u64> {
    std::env::var("MSML_SEED").ok().and_then(|s| s.parse().ok())
}

fn apply_overrides(settings: &mut RunSettings, opts: &CommonOpts) {
    if let Some(seed) = opts.seed.or_else(env_seed) {
        settings.mcmc.seed = seed;
    }
    if let Some(v) = opts.chains {
        settings.mcmc.n_chains = v;
    }
    if let Some(v) = opts.burnin {
        settings.mcmc.n_burnin = v;
    }
    if let Some(v) = opts.keep {
        settings.mcmc.n_keep = v;
    }
    if let Some(v) = opts.thin {
        settings.mcmc.thin = v;
    }
}

fn load_settings(opts: &CommonOpts) -> Result<(ConfigFile, RunSettings), Error> {
    let cfg = ConfigFile::from_path(&opts.config)?;
    let mut settings = RunSettings::from_config(&cfg)?;
    apply_overrides(&mut settings, opts);
    if let Some(data) = &opts.data {
        settings.data_path = Some(data.clone());
    }
    Ok((cfg, settings))
}

fn load_dataset(settings: &RunSettings) -> Result<(Dataset, IngestSummary), Error> {
    let path = settings
        .data_path
        .as_ref()
        .ok_or_else(|| Error::Config("no dataset path: set [data] path or --data".into()))?;
    let (data, summary) = msml::io::ingest(path, &settings.schema)?;
    print!("{}", summary.describe(&settings.schema.outcome_labels));
    Ok((data, summary))
}

fn run(cli: Cli) -> Result<(), Error> {
    match cli.command {
        Command::Generate(opts) => cmd_generate(&opts),
        Command::FitMl(opts) => cmd_fit_ml(&opts),
        Command::FitMsml(opts) => cmd_fit_msml(&opts),
        Command::Pipeline(opts) => cmd_pipeline(&opts),
        Command::Compare { report_a, report_b } => cmd_compare(&report_a, &report_b),
        Command::Gof { common, report, replicates } => cmd_gof(&common, &report, replicates),
        Command::Correlate {
            series,
            external,
            external_daily_mean,
            external_daily_visibility,
            weeks,
            out,
        } => cmd_correlate(
            &series,
            &external,
            &external_daily_mean,
            &external_daily_visibility,
            weeks.as_deref(),
            out.as_deref(),
        ),
    }
}

fn parse_beta_rows(
    cfg: &ConfigFile,
    prefix: &str,
    n_outcomes: usize,
    n_covariates: usize,
) -> Result<CoefMatrix, Error> {
    let mut rows = Vec::new();
    for i in 1..n_outcomes {
        let key = format!("{prefix}_{i}");
        let raw = cfg.require("generate", &key)?;
        let row: Vec<f64> = raw
            .split(',')
            .map(|v| {
                v.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::Config(format!("[generate] {key}: `{v}` is not numeric")))
            })
            .collect::<Result<_, _>>()?;
        if row.len() != n_covariates {
            return Err(Error::Config(format!(
                "[generate] {key} has {} values, expected {}",
                row.len(),
                n_covariates
            )));
        }
        rows.push(row);
    }
    Ok(CoefMatrix::from_rows(rows))
}

fn parse_covariate_samplers(raw: &str) -> Result<Vec<CovariateKind>, Error> {
    raw.split(',')
        .map(|item| {
            let item = item.trim();
            let mut parts = item.split(':');
            match parts.next().unwrap_or("") {
                "intercept" => Ok(CovariateKind::Intercept),
                "bernoulli" => {
                    let q: f64 = parts
                        .next()
                        .ok_or_else(|| Error::Config(format!("`{item}` needs a probability")))?
                        .parse()
                        .map_err(|_| Error::Config(format!("`{item}`: bad probability")))?;
                    Ok(CovariateKind::Bernoulli(q))
                }
                "uniform" => {
                    let a: f64 = parts
                        .next()
                        .ok_or_else(|| Error::Config(format!("`{item}` needs bounds")))?
                        .parse()
                        .map_err(|_| Error::Config(format!("`{item}`: bad lower bound")))?;
                    let b: f64 = parts
                        .next()
                        .ok_or_else(|| Error::Config(format!("`{item}` needs two bounds")))?
                        .parse()
                        .map_err(|_| Error::Config(format!("`{item}`: bad upper bound")))?;
                    Ok(CovariateKind::Uniform(a, b))
                }
                other => Err(Error::Config(format!("unknown covariate sampler `{other}`"))),
            }
        })
        .collect()
}

fn cmd_generate(opts: &CommonOpts) -> Result<(), Error> {
    let cfg = ConfigFile::from_path(&opts.config)?;
    let n_periods: usize = cfg
        .get_parsed("generate", "periods")?
        .ok_or_else(|| Error::Config("missing [generate] periods".into()))?;
    let n_outcomes: usize = cfg
        .get_parsed("generate", "outcomes")?
        .ok_or_else(|| Error::Config("missing [generate] outcomes".into()))?;
    let samplers = parse_covariate_samplers(cfg.require("generate", "covariates")?)?;
    let n_covariates = samplers.len();
    let switching: bool = cfg.get_parsed("generate", "switching")?.unwrap_or(false);

    let counts = if let Some(n) = cfg.get_parsed::<usize>("generate", "records_per_period")? {
        PeriodCounts::Fixed(n)
    } else if let Some(rate) = cfg.get_parsed::<f64>("generate", "rate")? {
        PeriodCounts::PoissonRate(rate)
    } else if let Some(raw) = cfg.get("generate", "counts") {
        let v: Vec<usize> = raw
            .split(',')
            .map(|x| {
                x.trim()
                    .parse()
                    .map_err(|_| Error::Config(format!("bad count `{x}`")))
            })
            .collect::<Result<_, _>>()?;
        PeriodCounts::PerPeriod(v)
    } else {
        return Err(Error::Config(
            "[generate] needs records_per_period, rate, or counts".into(),
        ));
    };

    let beta0 = parse_beta_rows(&cfg, "beta0", n_outcomes, n_covariates)?;
    let (spec, point) = if switching {
        let beta1 = parse_beta_rows(&cfg, "beta1", n_outcomes, n_covariates)?;
        let p01: f64 = cfg
            .get_parsed("generate", "p01")?
            .ok_or_else(|| Error::Config("missing [generate] p01".into()))?;
        let p10: f64 = cfg
            .get_parsed("generate", "p10")?
            .ok_or_else(|| Error::Config("missing [generate] p10".into()))?;
        (
            ModelSpec::msml_all_specific(n_outcomes, n_covariates),
            ModelPoint { beta0, beta1, p01, p10 },
        )
    } else {
        (
            ModelSpec::ml_all_shared(n_outcomes, n_covariates),
            ModelPoint::single_state(beta0),
        )
    };

    let seed = opts
        .seed
        .or_else(env_seed)
        .or(cfg.get_parsed("generate", "seed")?)
        .unwrap_or(0);
    let gen_cfg = GenConfig { n_periods, counts, covariates: samplers.clone() };
    let mut rng = StdRng::seed_from_u64(seed);
    let (data, states) = generate(&spec, &point, &gen_cfg, &mut rng)?;

    let labels: Vec<String> = match cfg.get("generate", "labels") {
        Some(raw) => raw.split(',').map(|s| s.trim().to_string()).collect(),
        None => (1..=n_outcomes).map(|i| format!("o{i}")).collect(),
    };
    if labels.len() != n_outcomes {
        return Err(Error::Config(format!(
            "[generate] labels has {} entries, expected {n_outcomes}",
            labels.len()
        )));
    }
    let schema = DataSchema {
        outcome_labels: labels,
        covariates: samplers
            .iter()
            .enumerate()
            .skip(1)
            .map(|(d, k)| {
                let kind = match k {
                    CovariateKind::Bernoulli(_) => msml::io::CovKind::Dummy,
                    _ => msml::io::CovKind::Quantitative,
                };
                (format!("x{d}"), kind)
            })
            .collect(),
        n_periods: Some(n_periods),
    };
    std::fs::create_dir_all(&opts.out)?;
    msml::io::write_dataset_csv(&data, &schema, &opts.out.join("dataset.csv"))?;
    let state_values: Vec<f64> = states.iter().map(|&s| s as f64).collect();
    msml::io::write_series_csv(&opts.out.join("true_states.csv"), "state", &state_values)?;
    let truth = serde_json::json!({
        "point": point,
        "switching": switching,
        "seed": seed,
        "n_periods": n_periods,
    });
    std::fs::write(
        opts.out.join("truth.json"),
        serde_json::to_string_pretty(&truth).expect("serializable"),
    )?;
    println!(
        "generated {} records over {} periods into {}",
        data.n_records(),
        n_periods,
        opts.out.display()
    );
    Ok(())
}

fn cmd_fit_ml(opts: &CommonOpts) -> Result<(), Error> {
    let (_, settings) = load_settings(opts)?;
    let (data, _) = load_dataset(&settings)?;
    let candidate = ModelSpec::ml_all_shared(data.n_outcomes(), data.n_covariates());
    let selected = msml::mle::select_covariates(&data, &candidate, &settings.mle)?;
    let fit = msml::mle::fit_ml(&data, &selected, &settings.mle)?;
    let mut report = pipeline::mle_report(&data, &fit, &settings);
    report.gof_pvalue = Some(gof_pvalue(
        &data,
        &report.point,
        false,
        settings.gof_replicates,
        derive_seed(settings.mcmc.seed, 900),
    )?);
    let dir = opts.out.join("ml_mle");
    pipeline::write_fit_outputs(&dir, &report, None)?;
    println!(
        "ml-mle: loglik {} aic {} k {} gof {}",
        round_sig(fit.loglik, 6),
        round_sig(fit.aic, 6),
        fit.k,
        report.gof_pvalue.map(|p| round_sig(p, 6)).unwrap_or(f64::NAN),
    );
    println!("reports in {}", dir.display());
    Ok(())
}

fn cmd_fit_msml(opts: &CommonOpts) -> Result<(), Error> {
    let (_, settings) = load_settings(opts)?;
    let (data, _) = load_dataset(&settings)?;
    let candidate = ModelSpec::ml_all_shared(data.n_outcomes(), data.n_covariates());
    let selected = msml::mle::select_covariates(&data, &candidate, &settings.mle)?;
    let initial = selected.expand_to_switching();
    let outcome =
        msml::posterior::restrict_workflow(&data, &initial, &settings.prior, &settings.mcmc)?;
    for line in outcome.trace() {
        println!("restriction: {line}");
    }
    match outcome {
        msml::posterior::RestrictionOutcome::Switching { sample, .. } => {
            let report =
                pipeline::mcmc_report(&data, &sample, &settings, "msml", settings.mcmc.seed)?;
            let dir = opts.out.join("msml");
            pipeline::write_fit_outputs(&dir, &report, Some(&sample))?;
            println!(
                "msml: log marginal likelihood {}",
                report
                    .marginal_loglik
                    .map(|m| round_sig(m.log_ml, 6))
                    .unwrap_or(f64::NAN)
            );
            for w in &report.warnings {
                println!("warning: {w}");
            }
            println!("reports in {}", dir.display());
        }
        msml::posterior::RestrictionOutcome::Collapsed { .. } => {
            println!(
                "msml: restriction workflow collapsed the two states; \
                 the model reduces to the single-state fit"
            );
        }
    }
    Ok(())
}

fn cmd_pipeline(opts: &CommonOpts) -> Result<(), Error> {
    let (_, settings) = load_settings(opts)?;
    let (data, _) = load_dataset(&settings)?;
    let output = pipeline::run_pipeline(&data, &settings, &opts.out)?;
    println!(
        "ml-mle: loglik {} aic {}",
        round_sig(output.mle.max_loglik, 6),
        output.mle.aic.map(|a| round_sig(a, 6)).unwrap_or(f64::NAN)
    );
    println!(
        "ml-mcmc: log marginal likelihood {}",
        output
            .ml_mcmc
            .marginal_loglik
            .map(|m| round_sig(m.log_ml, 6))
            .unwrap_or(f64::NAN)
    );
    match (&output.msml, output.comparison.log_bayes_factor_msml_over_ml) {
        (Some(m), Some(bf)) => {
            println!(
                "msml: log marginal likelihood {}",
                m.marginal_loglik.map(|v| round_sig(v.log_ml, 6)).unwrap_or(f64::NAN)
            );
            println!("log Bayes factor (msml over ml): {bf}");
        }
        _ => println!("msml: collapsed to the single-state model"),
    }
    for rep in [&output.mle, &output.ml_mcmc] {
        for w in &rep.warnings {
            println!("warning [{}]: {w}", rep.model);
        }
    }
    if let Some(m) = &output.msml {
        for w in &m.warnings {
            println!("warning [msml]: {w}");
        }
    }
    println!("reports in {}", output.out_dir.display());
    Ok(())
}

fn cmd_compare(report_a: &Path, report_b: &Path) -> Result<(), Error> {
    let a = load_report(report_a)?;
    let b = load_report(report_b)?;
    let (ma, mb) = match (a.marginal_loglik, b.marginal_loglik) {
        (Some(ma), Some(mb)) => (ma, mb),
        _ => {
            return Err(Error::InvalidInput(
                "both reports need a stored marginal likelihood (MCMC fits)".into(),
            ))
        }
    };
    let bf = msml::selection::bayes_factor(&ma, &mb);
    println!("log marginal likelihood {}: {}", a.model, round_sig(ma.log_ml, 6));
    println!("log marginal likelihood {}: {}", b.model, round_sig(mb.log_ml, 6));
    println!("log Bayes factor ({} over {}): {}", b.model, a.model, round_sig(bf, 6));
    if bf > 0.0 {
        println!("favored: {}", b.model);
    } else if bf < 0.0 {
        println!("favored: {}", a.model);
    } else {
        println!("models are equally supported");
    }
    Ok(())
}

fn cmd_gof(opts: &CommonOpts, report_path: &Path, replicates: Option<usize>) -> Result<(), Error> {
    let (_, settings) = load_settings(opts)?;
    let (data, _) = load_dataset(&settings)?;
    let report = load_report(report_path)?;
    let n_rep = replicates.unwrap_or(settings.gof_replicates);
    let p = gof_pvalue(
        &data,
        &report.point,
        report.switching,
        n_rep,
        derive_seed(settings.mcmc.seed, 901),
    )?;
    println!("goodness-of-fit p-value ({}, {n_rep} replicates): {}", report.model, round_sig(p, 6));
    Ok(())
}

fn parse_week_mask(spec: &str, t: usize) -> Result<Vec<bool>, Error> {
    let mut mask = vec![false; t];
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (lo, hi) = match part.split_once('-') {
            Some((a, b)) => {
                let lo: usize = a.trim().parse().map_err(|_| {
                    Error::Config(format!("bad week range `{part}`"))
                })?;
                let hi: usize = b.trim().parse().map_err(|_| {
                    Error::Config(format!("bad week range `{part}`"))
                })?;
                (lo, hi)
            }
            None => {
                let w: usize = part
                    .parse()
                    .map_err(|_| Error::Config(format!("bad week `{part}`")))?;
                (w, w)
            }
        };
        if lo < 1 || hi > t || lo > hi {
            return Err(Error::Config(format!(
                "week range `{part}` outside [1, {t}]"
            )));
        }
        for w in lo..=hi {
            mask[w - 1] = true;
        }
    }
    Ok(mask)
}

fn series_name(path: &Path) -> String {
    path.file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| path.display().to_string())
}

fn read_state_series_csv(path: &Path) -> Result<StateSeries, Error> {
    let text = std::fs::read_to_string(path)?;
    let mut probs = Vec::new();
    let mut stds = Vec::new();
    for (idx, line) in text.lines().enumerate() {
        if idx == 0 || line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').map(|f| f.trim()).collect();
        if fields.len() < 3 {
            return Err(Error::Ingest {
                line: idx + 1,
                message: "state series rows need `week,prob_state1,std`".into(),
            });
        }
        let p: f64 = fields[1].parse().map_err(|_| Error::Ingest {
            line: idx + 1,
            message: format!("bad probability `{}`", fields[1]),
        })?;
        let s: f64 = fields[2].parse().map_err(|_| Error::Ingest {
            line: idx + 1,
            message: format!("bad std `{}`", fields[2]),
        })?;
        probs.push(p);
        stds.push(s);
    }
    Ok(StateSeries { probs, stds })
}

fn cmd_correlate(
    series: &[PathBuf],
    external: &[PathBuf],
    daily_mean: &[PathBuf],
    daily_visibility: &[PathBuf],
    weeks: Option<&str>,
    out: Option<&Path>,
) -> Result<(), Error> {
    let mut named = Vec::new();
    for path in series {
        let s = read_state_series_csv(path)?;
        named.push(NamedSeries::from_state_series(series_name(path), &s)?);
    }
    for path in external {
        named.push(NamedSeries::plain(series_name(path), msml::io::read_series_csv(path)?));
    }
    for path in daily_mean {
        let daily = msml::io::read_series_csv(path)?;
        named.push(NamedSeries::plain(series_name(path), weekly_average(&daily, 7)));
    }
    for path in daily_visibility {
        let daily = msml::io::read_series_csv(path)?;
        named.push(NamedSeries::plain(
            series_name(path),
            weekly_harmonic_visibility(&daily, 7, 0.25),
        ));
    }
    if named.is_empty() {
        return Err(Error::Config("no series given".into()));
    }
    let t = named[0].values.len();
    let mask = weeks.map(|w| parse_week_mask(w, t)).transpose()?;
    let matrix = corr_matrix(&named, mask.as_deref())?;
    let mut text = String::from("series");
    for l in &matrix.labels {
        text.push(',');
        text.push_str(l);
    }
    text.push('\n');
    for (i, l) in matrix.labels.iter().enumerate() {
        text.push_str(l);
        for j in 0..matrix.labels.len() {
            text.push_str(&format!(",{}", round_sig(matrix.get(i, j), 6)));
        }
        text.push('\n');
    }
    match out {
        Some(path) => {
            if let Some(parent) = path.parent() {
                if !parent.as_os_str().is_empty() {
                    std::fs::create_dir_all(parent)?;
                }
            }
            std::fs::write(path, &text)?;
            println!("correlation matrix in {}", path.display());
        }
        None => print!("{text}"),
    }
    Ok(())
}
