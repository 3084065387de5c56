//! Implementations of the subcommands. Each returns the process exit code:
//! 0 for converged success, 2 for a flagged degenerate result (errors
//! propagate as `Err` and exit 1).

use std::io::Write;
use std::path::PathBuf;

use anyhow::{bail, Context, Result};
use patience_core::baselines::{self, UsabPolicy};
use patience_core::classify::{self, ScorerConfig};
use patience_core::em::{self, EmInit};
use patience_core::em_cov::{self, CovInit};
use patience_core::queueing::{erlang_a, staffing_search, ErlangAInput, StaffingTarget};
use patience_core::simulate::{self, EstimatorId, SimConfig};
use patience_core::types::{Dataset, ObservationTriple, TimeUnit};
use serde::Serialize;

use crate::cli::*;
use crate::config::Defaults;
use crate::formats;
use crate::output::{
    command_echo, file_digest, BootstrapBlock, Interval, Parameters, RateValue, RunResult,
    SCHEMA_VERSION,
};
use crate::parallel;

/// Resolved fitting controls.
struct Fit {
    epsilon: f64,
    max_iter: usize,
    seed: u64,
}

impl Fit {
    fn resolve(flags: &FitFlags, defaults: &Defaults) -> Fit {
        Fit {
            epsilon: flags.epsilon.unwrap_or(defaults.epsilon),
            max_iter: flags.max_iter.unwrap_or(defaults.max_iter),
            seed: flags.seed.unwrap_or(defaults.seed),
        }
    }
}

fn out_writer(path: Option<&PathBuf>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(
            std::fs::File::create(p).with_context(|| format!("cannot create {}", p.display()))?,
        ),
        None => Box::new(std::io::stdout().lock()),
    })
}

fn display_unit(unit: Option<&String>, defaults: &Defaults) -> Result<String> {
    let unit = unit.cloned().unwrap_or_else(|| defaults.unit.clone());
    if unit != "hr" && unit != "min" {
        bail!("--unit must be hr or min, got {unit:?}");
    }
    Ok(unit)
}

/// NaN-aware CSV number formatting.
fn csv_num(v: f64) -> String {
    if v.is_nan() {
        String::from("NA")
    } else {
        v.to_string()
    }
}

// ---------------------------------------------------------------- estimate

pub fn estimate(args: &EstimateArgs, defaults: &Defaults) -> Result<i32> {
    let fit = Fit::resolve(&args.fit, defaults);
    let unit = display_unit(args.unit.as_ref(), defaults)?;
    let digest = file_digest(&args.input)?;
    let dataset = if args.events {
        let (dataset, report) = formats::read_events(&args.input)?;
        if !report.rejected.is_empty() {
            eprintln!("rejected {} malformed conversation(s):", report.rejected.len());
            for (idx, err) in &report.rejected {
                eprintln!("  conversation group {idx}: {err}");
            }
        }
        dataset
    } else {
        formats::read_triples(&args.input)?
    };
    if dataset.is_empty() {
        bail!("input contains no usable observations");
    }

    let bootstrap_resamples = match args.bootstrap.as_deref() {
        None => 0,
        Some("default") => defaults.bootstrap,
        Some(text) => text.parse::<usize>().context("--bootstrap expects a count")?,
    };

    let (result, code) = match args.method.as_str() {
        "em" => estimate_em(args, &dataset, &fit, &unit, &digest, bootstrap_resamples)?,
        "em-cov" => estimate_em_cov(args, &dataset, &fit, &unit, &digest, bootstrap_resamples)?,
        "m1" | "m2" => estimate_baseline(args, &dataset, &fit, &unit, &digest, bootstrap_resamples)?,
        other => bail!("unknown --method {other:?} (expected em, em-cov, m1, or m2)"),
    };
    let mut out = out_writer(args.out.as_ref())?;
    out.write_all(result.to_json()?.as_bytes())?;
    Ok(code)
}

fn base_result(estimator: &str, seed: u64, unit: &str, digest: &str) -> RunResult {
    RunResult {
        schema_version: SCHEMA_VERSION,
        tool_version: env!("CARGO_PKG_VERSION").to_string(),
        command: command_echo(),
        estimator: estimator.to_string(),
        seed,
        input_digest_sha256: digest.to_string(),
        display_unit: unit.to_string(),
        converged: true,
        degenerate: false,
        iterations: 0,
        parameters: Parameters {
            theta: RateValue::from_per_minute(0.0),
            gamma: RateValue::from_per_minute(0.0),
            q: None,
            beta0: None,
            beta: None,
            multipliers: None,
            covariate_names: None,
        },
        mean_patience_minutes: None,
        bootstrap: None,
    }
}

fn exit_code(converged: bool, degenerate: bool) -> Result<i32> {
    if degenerate {
        Ok(2)
    } else if !converged {
        bail!("estimator did not converge within the iteration ceiling");
    } else {
        Ok(0)
    }
}

fn estimate_em(
    args: &EstimateArgs,
    dataset: &Dataset,
    fit: &Fit,
    unit: &str,
    digest: &str,
    bootstrap: usize,
) -> Result<(RunResult, i32)> {
    let emfit = em::fit_em(dataset, &EmInit::Random { seed: fit.seed }, fit.epsilon, fit.max_iter)?;
    let mut result = base_result("em", fit.seed, unit, digest);
    result.converged = emfit.converged;
    result.degenerate = emfit.degenerate;
    result.iterations = emfit.iterations;
    result.parameters.theta = RateValue::from_per_minute(emfit.theta);
    result.parameters.gamma = RateValue::from_per_minute(emfit.gamma);
    result.parameters.q = Some(emfit.q);
    if emfit.theta > 0.0 {
        result.mean_patience_minutes = Some(1.0 / emfit.theta);
    }
    if bootstrap > 0 {
        let (epsilon, max_iter) = (fit.epsilon, fit.max_iter);
        let ci = parallel::with_jobs(args.jobs, || {
            parallel::run_bootstrap(dataset, bootstrap, fit.seed, |d| {
                em::fit_em(d, &EmInit::Half, epsilon, max_iter)
                    .map(|f| vec![f.theta * 60.0, f.gamma * 60.0, f.q])
            })
        })??;
        result.bootstrap = Some(BootstrapBlock {
            resamples_requested: ci.requested,
            resamples_succeeded: ci.succeeded,
            unreliable: ci.unreliable,
            intervals: vec![
                Interval { name: "theta_per_hour".into(), lower: ci.lower[0], upper: ci.upper[0] },
                Interval { name: "gamma_per_hour".into(), lower: ci.lower[1], upper: ci.upper[1] },
                Interval { name: "q".into(), lower: ci.lower[2], upper: ci.upper[2] },
            ],
        });
    }
    let code = exit_code(emfit.converged, emfit.degenerate)?;
    Ok((result, code))
}

/// Restrict the dataset to the named covariate columns (in the given order).
fn select_covariates(dataset: &Dataset, names: &[String]) -> Result<Dataset> {
    if names.is_empty() {
        return Ok(dataset.clone());
    }
    let available = dataset.covariate_names.clone().unwrap_or_default();
    let indices: Vec<usize> = names
        .iter()
        .map(|n| {
            available.iter().position(|a| a == n).with_context(|| {
                format!("unknown covariate {n:?}; file has {available:?}")
            })
        })
        .collect::<Result<_>>()?;
    let observations: Vec<ObservationTriple> = dataset
        .observations
        .iter()
        .map(|o| {
            let x = o.covariates.as_ref().expect("validated covariates");
            ObservationTriple {
                covariates: Some(indices.iter().map(|&j| x[j]).collect()),
                ..o.clone()
            }
        })
        .collect();
    Dataset::with_covariates(observations, dataset.unit, names.to_vec())
        .map_err(|e| anyhow::anyhow!("{e}"))
}

fn estimate_em_cov(
    args: &EstimateArgs,
    dataset: &Dataset,
    fit: &Fit,
    unit: &str,
    digest: &str,
    bootstrap: usize,
) -> Result<(RunResult, i32)> {
    if dataset.covariate_count() == 0 {
        bail!("--method em-cov needs covariate columns in the input");
    }
    let dataset = select_covariates(dataset, &args.covariates)?;
    let names = dataset.covariate_names.clone().unwrap_or_default();
    let covfit = em_cov::fit_em_cov(&dataset, &CovInit::Nested, fit.epsilon, fit.max_iter)?;

    // Rates reported at the mean covariate vector.
    let k = dataset.covariate_count();
    let n = dataset.len() as f64;
    let mut mean_x = vec![0.0; k];
    for obs in &dataset.observations {
        for (j, v) in obs.covariates.as_ref().expect("validated").iter().enumerate() {
            mean_x[j] += v / n;
        }
    }
    let theta_at_mean = covfit.theta_at(&mean_x);

    let mut result = base_result("em-cov", fit.seed, unit, digest);
    result.converged = covfit.converged;
    result.degenerate = covfit.degenerate;
    result.iterations = covfit.iterations;
    result.parameters.theta = RateValue::from_per_minute(theta_at_mean);
    result.parameters.gamma = RateValue::from_per_minute(covfit.gamma);
    result.parameters.q = Some(covfit.q);
    result.parameters.beta0 = Some(covfit.beta0);
    result.parameters.beta = Some(covfit.beta.clone());
    result.parameters.multipliers = Some(covfit.multipliers.clone());
    result.parameters.covariate_names = Some(names.clone());
    if covfit.beta0.is_finite() {
        result.mean_patience_minutes = Some(covfit.mean_patience_at(&mean_x));
    }
    if bootstrap > 0 && !covfit.degenerate {
        let (epsilon, max_iter) = (fit.epsilon, fit.max_iter);
        let warm = CovInit::Warm { beta0: covfit.beta0, beta: covfit.beta.clone() };
        let ci = parallel::with_jobs(args.jobs, || {
            parallel::run_bootstrap(&dataset, bootstrap, fit.seed, |d| {
                em_cov::fit_em_cov(d, &warm, epsilon, max_iter).map(|f| {
                    let mut v = vec![f.beta0];
                    v.extend_from_slice(&f.beta);
                    v
                })
            })
        })??;
        let mut intervals =
            vec![Interval { name: "beta0".into(), lower: ci.lower[0], upper: ci.upper[0] }];
        for (j, name) in names.iter().enumerate() {
            intervals.push(Interval {
                name: format!("beta_{name}"),
                lower: ci.lower[j + 1],
                upper: ci.upper[j + 1],
            });
        }
        result.bootstrap = Some(BootstrapBlock {
            resamples_requested: ci.requested,
            resamples_succeeded: ci.succeeded,
            unreliable: ci.unreliable,
            intervals,
        });
    }
    let code = exit_code(covfit.converged, covfit.degenerate)?;
    Ok((result, code))
}

fn estimate_baseline(
    args: &EstimateArgs,
    dataset: &Dataset,
    fit: &Fit,
    unit: &str,
    digest: &str,
    bootstrap: usize,
) -> Result<(RunResult, i32)> {
    let policy = match (args.method.as_str(), args.usab_policy.as_str()) {
        (_, "as-served") => UsabPolicy::AsServed,
        ("m1", "as-abandoned") => UsabPolicy::AsAbandoned,
        ("m2", "as-sab") => UsabPolicy::AsSab,
        (m, p) => bail!("--usab-policy {p:?} is not valid for --method {m}"),
    };
    let run = |d: &Dataset| -> patience_core::Result<baselines::RateEstimate> {
        if args.method == "m1" {
            baselines::method1(d, &policy)
        } else {
            baselines::method2(d, &policy)
        }
    };
    let est = run(dataset)?;
    let estimator = format!("{}-{}", args.method, args.usab_policy);
    let mut result = base_result(&estimator, fit.seed, unit, digest);
    result.degenerate = est.degenerate;
    result.parameters.theta = RateValue::from_per_minute(est.theta);
    result.parameters.gamma = RateValue::from_per_minute(est.gamma);
    if est.theta > 0.0 {
        result.mean_patience_minutes = Some(est.mean_patience);
    }
    if bootstrap > 0 {
        let ci = parallel::with_jobs(args.jobs, || {
            parallel::run_bootstrap(dataset, bootstrap, fit.seed, |d| {
                run(d).map(|e| vec![e.theta * 60.0, e.gamma * 60.0])
            })
        })??;
        result.bootstrap = Some(BootstrapBlock {
            resamples_requested: ci.requested,
            resamples_succeeded: ci.succeeded,
            unreliable: ci.unreliable,
            intervals: vec![
                Interval { name: "theta_per_hour".into(), lower: ci.lower[0], upper: ci.upper[0] },
                Interval { name: "gamma_per_hour".into(), lower: ci.lower[1], upper: ci.upper[1] },
            ],
        });
    }
    let code = exit_code(true, est.degenerate)?;
    Ok((result, code))
}

// ---------------------------------------------------------------- simulate

pub fn simulate(args: &SimulateArgs, defaults: &Defaults) -> Result<i32> {
    let config = SimConfig {
        theta: args.theta,
        gamma: args.gamma,
        q: args.q,
        n: args.n,
        p_sr1: args.p_sr1,
        seed: args.seed.unwrap_or(defaults.seed),
        unit: TimeUnit::Hours,
    };
    let sim = simulate::gen_dataset(&config)?;
    let mut out = out_writer(args.out.as_ref())?;
    formats::write_triples(&sim.dataset, &mut out)?;
    Ok(0)
}

// --------------------------------------------------------------- benchmark

pub fn benchmark(args: &BenchmarkArgs, defaults: &Defaults) -> Result<i32> {
    if args.grid != "reference" {
        bail!("unknown --grid {:?} (available: reference)", args.grid);
    }
    let fit = Fit::resolve(&args.fit, defaults);
    let grid = simulate::default_grid(args.n, fit.seed);
    let rows = parallel::with_jobs(args.jobs.or(defaults.jobs), || {
        parallel::run_benchmark(&grid, &EstimatorId::ALL, args.samples, fit.epsilon, fit.max_iter)
    })?;

    let mut out = out_writer(args.out.as_ref())?;
    writeln!(
        out,
        "theta,gamma,q,n,p_sab,estimator,succeeded,attempted,\
         mean_theta,sd_theta,ci_theta_lo,ci_theta_hi,mse_theta,\
         mean_gamma,sd_gamma,ci_gamma_lo,ci_gamma_hi,mse_gamma,\
         mean_q,sd_q,ci_q_lo,ci_q_hi,mse_q"
    )?;
    for r in &rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
            r.config.theta,
            r.config.gamma,
            r.config.q,
            r.config.n,
            csv_num(r.p_sab),
            r.estimator.name(),
            r.succeeded,
            r.attempted,
            csv_num(r.mean_theta),
            csv_num(r.sd_theta),
            csv_num(r.ci_theta.0),
            csv_num(r.ci_theta.1),
            csv_num(r.mse_theta),
            csv_num(r.mean_gamma),
            csv_num(r.sd_gamma),
            csv_num(r.ci_gamma.0),
            csv_num(r.ci_gamma.1),
            csv_num(r.mse_gamma),
            csv_num(r.mean_q),
            csv_num(r.sd_q),
            csv_num(r.ci_q.0),
            csv_num(r.ci_q.1),
            csv_num(r.mse_q),
        )?;
    }
    if let Some(plot) = &args.plot_out {
        let mut p = out_writer(Some(plot))?;
        writeln!(p, "p_sab,estimator,mse_theta,mse_gamma,mse_q")?;
        for r in &rows {
            writeln!(
                p,
                "{},{},{},{},{}",
                csv_num(r.p_sab),
                r.estimator.name(),
                csv_num(r.mse_theta),
                csv_num(r.mse_gamma),
                csv_num(r.mse_q),
            )?;
        }
    }
    Ok(0)
}

// ----------------------------------------------------------- classify-eval

#[derive(Serialize)]
struct ClassifySummary {
    schema_version: u32,
    command: String,
    input_digest_sha256: String,
    columns_total: usize,
    columns_kept: usize,
    threshold: f64,
    auc: f64,
    youden_threshold: f64,
    youden_sensitivity: f64,
    youden_specificity: f64,
    f1_threshold: f64,
    f1_value: f64,
    error_rate_at_youden: f64,
    positives_at_threshold: usize,
}

pub fn classify_eval(args: &ClassifyEvalArgs, defaults: &Defaults) -> Result<i32> {
    let threshold = args.threshold.unwrap_or(defaults.threshold);
    let digest = file_digest(&args.features)?;
    let matrix = formats::read_features(&args.features)?;
    let Some(labels) = matrix.labels.clone() else {
        bail!("the feature file needs a label column for evaluation");
    };
    let reduced = classify::select_top_k(&matrix, args.k)?;
    let model = classify::train_scorer(&reduced, &ScorerConfig::default())?;
    let scores = model.score_matrix(&reduced)?;
    let report = classify::roc_and_thresholds(&scores, &labels)?;
    if let Some(path) = &args.report {
        let mut out = out_writer(Some(path))?;
        writeln!(out, "fpr,tpr,threshold")?;
        for (fpr, tpr, c) in &report.roc {
            writeln!(out, "{fpr},{tpr},{c}")?;
        }
    }
    let positives = scores.iter().filter(|s| **s >= threshold).count();
    let summary = ClassifySummary {
        schema_version: SCHEMA_VERSION,
        command: command_echo(),
        input_digest_sha256: digest,
        columns_total: matrix.columns.len(),
        columns_kept: reduced.columns.len(),
        threshold,
        auc: report.auc,
        youden_threshold: report.youden_c,
        youden_sensitivity: report.youden_sensitivity,
        youden_specificity: report.youden_specificity,
        f1_threshold: report.f1_c,
        f1_value: report.f1_value,
        error_rate_at_youden: report.error_rate,
        positives_at_threshold: positives,
    };
    println!("{}", serde_json::to_string_pretty(&summary)?);
    Ok(0)
}

// ---------------------------------------------------------------- staffing

#[derive(Serialize)]
struct StaffingReport {
    schema_version: u32,
    command: String,
    lambda_per_hour: f64,
    mu_per_hour: f64,
    theta_per_hour: f64,
    /// Server count evaluated (given or found by the search).
    n: u32,
    #[serde(skip_serializing_if = "Option::is_none")]
    target: Option<String>,
    p_wait: f64,
    p_abandon: f64,
    mean_wait_hours: f64,
    mean_wait_minutes: f64,
    occupancy: f64,
}

pub fn staffing(args: &StaffingArgs, _defaults: &Defaults) -> Result<i32> {
    let (n, target) = if let Some(n) = args.n {
        (n, None)
    } else if let Some(p) = args.target_abandon {
        let n = staffing_search(args.lambda, args.mu, args.theta, StaffingTarget::MaxAbandon(p), args.max_n)?;
        (n, Some(format!("p_abandon <= {p}")))
    } else if let Some(p) = args.target_wait {
        let n = staffing_search(args.lambda, args.mu, args.theta, StaffingTarget::MaxWait(p), args.max_n)?;
        (n, Some(format!("p_wait <= {p}")))
    } else {
        bail!("provide --n, --target-abandon, or --target-wait");
    };
    let out = erlang_a(&ErlangAInput { lambda: args.lambda, mu: args.mu, theta_ab: args.theta, n })?;
    let report = StaffingReport {
        schema_version: SCHEMA_VERSION,
        command: command_echo(),
        lambda_per_hour: args.lambda,
        mu_per_hour: args.mu,
        theta_per_hour: args.theta,
        n,
        target,
        p_wait: out.p_wait,
        p_abandon: out.p_abandon,
        mean_wait_hours: out.mean_wait,
        mean_wait_minutes: out.mean_wait * 60.0,
        occupancy: out.occupancy,
    };
    let mut w = out_writer(args.out.as_ref())?;
    writeln!(w, "{}", serde_json::to_string_pretty(&report)?)?;
    Ok(0)
}

// ----------------------------------------------------------- group-patience

pub fn group_patience(args: &GroupPatienceArgs, defaults: &Defaults) -> Result<i32> {
    let fit = Fit::resolve(&args.fit, defaults);
    let dataset = formats::read_triples(&args.input)?;
    let names = dataset.covariate_names.clone().unwrap_or_default();
    let Some(index) = names.iter().position(|n| n == &args.by) else {
        bail!("unknown covariate {:?}; file has {names:?}", args.by);
    };
    let buckets =
        em_cov::group_patience(&dataset, index, &args.buckets, fit.epsilon, fit.max_iter)?;
    let mut out = out_writer(args.out.as_ref())?;
    writeln!(
        out,
        "bucket,lower,upper,n,theta_per_hour,gamma_per_hour,q,mean_patience_minutes,converged"
    )?;
    for b in &buckets {
        // Dataset durations are minutes; rates convert to per hour.
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            b.label,
            csv_num(b.lower),
            csv_num(b.upper),
            b.n,
            csv_num(b.fit.theta * 60.0),
            csv_num(b.fit.gamma * 60.0),
            csv_num(b.fit.q),
            csv_num(b.fit.mean_patience()),
            b.fit.converged,
        )?;
    }
    Ok(0)
}

/// Dispatch helper used by `main` and by integration tests.
pub fn run(cli: &Cli, defaults: &Defaults) -> Result<i32> {
    match &cli.command {
        Command::Estimate(args) => estimate(args, defaults),
        Command::Simulate(args) => simulate(args, defaults),
        Command::Benchmark(args) => benchmark(args, defaults),
        Command::ClassifyEval(args) => classify_eval(args, defaults),
        Command::Staffing(args) => staffing(args, defaults),
        Command::GroupPatience(args) => group_patience(args, defaults),
    }
}
