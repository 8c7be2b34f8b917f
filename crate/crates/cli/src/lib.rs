//! Command-line front end for `mvexpectile`.
//!
//! Every verb reads a JSON config, optionally patched with `--set key=value`
//! overrides, and writes JSON (`exact`, `limit`, `estimate`) or CSV
//! (`simulate`, `sweep`, `boxplot`) to `--output` or stdout.

use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use clap::{Parser, ValueEnum};
use mvexpectile::asymptotics::{
    limit_comonotonic, limit_independent, solve_limit_system_weighted, LimitVector,
    TailDependenceModel,
};
use mvexpectile::estimation::{estimate_extreme_expectile, k_growth_diagnostic};
use mvexpectile::expectile::{solve_multivariate_expectile, WeightMatrix};
use mvexpectile::simulation::{
    draw_sample, median, run_boxplot_study, run_k_sweep, write_boxplot_csv, write_sweep_csv,
    BoxplotConfig,
};
use mvexpectile::{
    Dependence, Error, ExpectileProblem, ExperimentConfig, MarginSpec, Norm, SampleMatrix,
};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const EXIT_USAGE: u8 = 2;
pub const EXIT_MISSING_CONFIG: u8 = 3;
pub const EXIT_SCHEMA: u8 = 4;
pub const EXIT_NONCONVERGENCE: u8 = 5;
pub const EXIT_IO: u8 = 6;

/// Failure with its process exit code.
///
/// `diagnostic` is a machine-readable document written in place of the
/// regular output (solver non-convergence, estimation breakdown).
#[derive(Debug, thiserror::Error)]
#[error("{message}")]
pub struct CliError {
    pub code: u8,
    pub message: String,
    pub diagnostic: Option<Value>,
}

impl CliError {
    fn new(code: u8, message: impl Into<String>) -> Self {
        Self {
            code,
            message: message.into(),
            diagnostic: None,
        }
    }

    fn usage(message: impl Into<String>) -> Self {
        Self::new(EXIT_USAGE, message)
    }

    fn schema(message: impl Into<String>) -> Self {
        Self::new(EXIT_SCHEMA, message)
    }

    fn io(context: &str, err: impl std::fmt::Display) -> Self {
        Self::new(EXIT_IO, format!("{context}: {err}"))
    }
}

impl From<Error> for CliError {
    fn from(err: Error) -> Self {
        let message = err.to_string();
        match err {
            Error::AtLevel { alpha, source } => {
                let mut inner = CliError::from(*source);
                if let Some(Value::Object(map)) = inner.diagnostic.as_mut() {
                    map.insert("alpha".into(), json!(alpha));
                }
                inner.message = message;
                inner
            }
            Error::NonConvergence {
                best,
                residual,
                iterations,
            } => CliError {
                code: EXIT_NONCONVERGENCE,
                message,
                diagnostic: Some(json!({
                    "error": "non_convergence",
                    "best": best,
                    "residual": residual,
                    "iterations": iterations,
                })),
            },
            Error::TailTooHeavy { gamma_hat } => CliError {
                code: EXIT_NONCONVERGENCE,
                message,
                diagnostic: Some(json!({ "error": "tail_too_heavy", "gamma_hat": gamma_hat })),
            },
            Error::Io(_) => CliError::new(EXIT_IO, message),
            Error::Csv(ref e) if e.is_io_error() => CliError::new(EXIT_IO, message),
            _ => CliError::schema(message),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum Verb {
    /// Solve the exact multivariate expectile system.
    Exact,
    /// Compute the extreme-level limit vector.
    Limit,
    /// Estimate an extreme expectile from a sample CSV.
    Estimate,
    /// Draw a sample and write it as CSV.
    Simulate,
    /// Estimator-vs-exact sweep over levels and k.
    Sweep,
    /// Distribution of the tail-equivalence estimates across sample sizes.
    Boxplot,
}

impl Verb {
    pub fn name(self) -> String {
        self.to_possible_value()
            .map(|v| v.get_name().to_string())
            .unwrap_or_default()
    }
}

#[derive(Debug, Parser)]
#[command(
    name = "mvexp",
    version,
    about = "Multivariate expectiles of heavy-tailed risk vectors"
)]
struct Args {
    #[arg(value_enum)]
    verb: Verb,
    /// JSON config describing the job.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Destination file; stdout when omitted.
    #[arg(long, short)]
    output: Option<PathBuf>,
    /// Override a scalar leaf of the config, e.g. `k=500` or `margins.0.params.a=3`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    sets: Vec<String>,
    /// Override the master seed (simulate, sweep, boxplot).
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for replications.
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    jobs: Option<u64>,
    /// Dependence model for `limit`: indep, como or archimedean.
    #[arg(long)]
    model: Option<String>,
}

/// Config of the `exact` verb.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExactConfig {
    pub margins: Vec<MarginSpec>,
    #[serde(default)]
    pub weights: Option<WeightMatrix>,
    pub dependence: Dependence,
    pub alpha: f64,
    #[serde(default = "default_exact_tol")]
    pub tol: f64,
    #[serde(default = "default_max_iter")]
    pub max_iter: usize,
}

fn default_exact_tol() -> f64 {
    1e-10
}

fn default_max_iter() -> usize {
    200
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum LimitModel {
    #[serde(rename = "indep", alias = "independent")]
    Independent,
    #[serde(rename = "como", alias = "comonotonic")]
    Comonotonic,
    #[serde(rename = "archimedean")]
    Archimedean,
}

/// Config of the `limit` verb.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct LimitConfig {
    pub model: LimitModel,
    pub theta: f64,
    pub c: Vec<f64>,
    /// Generator index of the Archimedean model.
    #[serde(default)]
    pub theta_psi: Option<f64>,
    #[serde(default)]
    pub weights: Option<WeightMatrix>,
    /// Starting point for the numeric solver.
    #[serde(default)]
    pub init: Option<LimitVector>,
    #[serde(default = "default_limit_tol")]
    pub tol: f64,
}

fn default_limit_tol() -> f64 {
    1e-12
}

/// Config of the `estimate` verb. Exactly one of `k` and `k_grid` is set.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct EstimateConfig {
    pub samples: PathBuf,
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default)]
    pub k_grid: Vec<usize>,
    pub alpha: f64,
    pub dependence: Dependence,
    #[serde(default)]
    pub norm: Norm,
}

/// Config of the `simulate` verb.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SimulateConfig {
    pub margins: Vec<MarginSpec>,
    pub dependence: Dependence,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
}

/// A config validated against its verb's schema.
#[derive(Debug, Clone)]
pub enum Job {
    Exact(ExactConfig),
    Limit(LimitConfig),
    Estimate(EstimateConfig),
    Simulate(SimulateConfig),
    Sweep(ExperimentConfig),
    Boxplot(BoxplotConfig),
}

#[derive(Debug, Clone)]
pub struct Command {
    pub verb: Verb,
    pub config_path: PathBuf,
    pub output: Option<PathBuf>,
    pub jobs: Option<usize>,
    pub job: Job,
}

/// One estimate as emitted by `estimate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateOutput {
    pub gamma_hat: f64,
    pub c_hat: Vec<f64>,
    pub k: usize,
    pub expectile: Vec<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub diagnostic: Option<f64>,
}

/// Parse arguments (without the program name) and load the config.
pub fn parse_command<I, S>(argv: I) -> Result<Command, CliError>
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let args = Args::try_parse_from(
        std::iter::once("mvexp".into()).chain(argv.into_iter().map(Into::into)),
    )
    .map_err(|e| {
        let code = if e.use_stderr() { EXIT_USAGE } else { 0 };
        CliError::new(code, e.render().to_string())
    })?;

    let mut overrides = args
        .sets
        .iter()
        .map(|s| {
            s.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.to_string()))
                .filter(|(k, _)| !k.is_empty())
                .ok_or_else(|| CliError::usage(format!("--set expects KEY=VALUE, got {s:?}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    if let Some(seed) = args.seed {
        let key = match args.verb {
            Verb::Simulate => "seed",
            Verb::Sweep | Verb::Boxplot => "master_seed",
            _ => {
                return Err(CliError::usage(
                    "--seed applies to simulate, sweep and boxplot",
                ))
            }
        };
        overrides.push((key.into(), seed.to_string()));
    }
    if let Some(model) = &args.model {
        if args.verb != Verb::Limit {
            return Err(CliError::usage("--model applies to limit only"));
        }
        overrides.push(("model".into(), Value::String(model.clone()).to_string()));
    }

    let config_path = args
        .config
        .ok_or_else(|| CliError::new(EXIT_MISSING_CONFIG, "missing --config"))?;
    let text = std::fs::read_to_string(&config_path).map_err(|e| {
        let code = if e.kind() == io::ErrorKind::NotFound {
            EXIT_MISSING_CONFIG
        } else {
            EXIT_IO
        };
        CliError::new(
            code,
            format!("cannot read config {}: {e}", config_path.display()),
        )
    })?;
    let mut value: Value = serde_json::from_str(&text).map_err(|e| {
        CliError::schema(format!(
            "config {} is not valid JSON: {e}",
            config_path.display()
        ))
    })?;
    for (key, raw) in &overrides {
        apply_override(&mut value, key, raw)?;
    }
    let job = typed_job(args.verb, value)?;
    Ok(Command {
        verb: args.verb,
        config_path,
        output: args.output,
        jobs: args.jobs.map(|j| j as usize),
        job,
    })
}

/// Set a scalar leaf addressed by a dotted path. Numeric segments index arrays.
///
/// The value is parsed as JSON when possible and taken as a string otherwise.
pub fn apply_override(root: &mut Value, key: &str, raw: &str) -> Result<(), CliError> {
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    if new.is_object() || new.is_array() {
        return Err(CliError::schema(format!(
            "--set {key}: only scalar values are allowed"
        )));
    }
    let segments: Vec<&str> = key.split('.').collect();
    let (last, parents) = segments
        .split_last()
        .expect("split yields at least one segment");
    let mut node = root;
    for seg in parents {
        node = match node {
            Value::Object(map) => map.get_mut(*seg),
            Value::Array(items) => seg.parse::<usize>().ok().and_then(|i| items.get_mut(i)),
            _ => None,
        }
        .ok_or_else(|| CliError::schema(format!("--set {key}: no such path segment {seg:?}")))?;
    }
    let slot = match node {
        Value::Object(map) => map.entry(last.to_string()).or_insert(Value::Null),
        Value::Array(items) => last
            .parse::<usize>()
            .ok()
            .and_then(|i| items.get_mut(i))
            .ok_or_else(|| CliError::schema(format!("--set {key}: index {last:?} out of range")))?,
        _ => {
            return Err(CliError::schema(format!(
                "--set {key}: parent is not an object or array"
            )))
        }
    };
    if slot.is_object() || slot.is_array() {
        return Err(CliError::schema(format!(
            "--set {key}: target is not a scalar leaf"
        )));
    }
    *slot = new;
    Ok(())
}

fn typed_job(verb: Verb, value: Value) -> Result<Job, CliError> {
    fn parse<T: serde::de::DeserializeOwned>(value: Value) -> Result<T, CliError> {
        serde_json::from_value(value)
            .map_err(|e| CliError::schema(format!("config schema violation: {e}")))
    }
    let job = match verb {
        Verb::Exact => Job::Exact(parse(value)?),
        Verb::Limit => {
            let cfg: LimitConfig = parse(value)?;
            if cfg.model == LimitModel::Archimedean && cfg.theta_psi.is_none() {
                return Err(CliError::schema("archimedean model requires theta_psi"));
            }
            Job::Limit(cfg)
        }
        Verb::Estimate => {
            let cfg: EstimateConfig = parse(value)?;
            if cfg.k.is_some() == !cfg.k_grid.is_empty() {
                return Err(CliError::schema(
                    "estimate config needs exactly one of k and k_grid",
                ));
            }
            Job::Estimate(cfg)
        }
        Verb::Simulate => Job::Simulate(parse(value)?),
        Verb::Sweep => {
            let cfg: ExperimentConfig = parse(value)?;
            cfg.validate()?;
            Job::Sweep(cfg)
        }
        Verb::Boxplot => Job::Boxplot(parse(value)?),
    };
    Ok(job)
}

/// Where results go: a file, or stdout when no `--output` was given.
fn open_output(path: Option<&Path>) -> Result<Box<dyn Write>, CliError> {
    match path {
        Some(p) => File::create(p)
            .map(|f| Box::new(BufWriter::new(f)) as Box<dyn Write>)
            .map_err(|e| CliError::io(&format!("cannot create {}", p.display()), e)),
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn write_json(path: Option<&Path>, value: &impl Serialize) -> Result<(), CliError> {
    let mut out = open_output(path)?;
    let text = serde_json::to_string_pretty(value).map_err(|e| CliError::schema(e.to_string()))?;
    writeln!(out, "{text}")
        .and_then(|_| out.flush())
        .map_err(|e| CliError::io("write failed", e))
}

/// Write the diagnostic document of a failed command, if it has one.
pub fn emit_diagnostic(cmd_output: Option<&Path>, err: &CliError) -> Result<(), CliError> {
    match &err.diagnostic {
        Some(d) => write_json(cmd_output, d),
        None => Ok(()),
    }
}

fn with_pool<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T, CliError> {
    match jobs {
        None => Ok(f()),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map(|pool| pool.install(f))
            .map_err(|e| CliError::usage(format!("cannot start {n} worker threads: {e}"))),
    }
}

fn limit_vector(cfg: &LimitConfig) -> Result<LimitVector, Error> {
    let model = match cfg.model {
        LimitModel::Independent => TailDependenceModel::Independent,
        LimitModel::Comonotonic => TailDependenceModel::Comonotonic,
        LimitModel::Archimedean => {
            TailDependenceModel::archimedean(cfg.theta_psi.unwrap_or(cfg.theta))?
        }
    };
    let closed = match cfg.model {
        LimitModel::Comonotonic => limit_comonotonic(cfg.theta, &cfg.c)?,
        _ => limit_independent(cfg.theta, &cfg.c)?,
    };
    let solvable_in_closed_form = cfg.model != LimitModel::Archimedean
        && cfg.init.is_none()
        && cfg.weights.as_ref().is_none_or(WeightMatrix::is_all_ones);
    if solvable_in_closed_form {
        return Ok(closed);
    }
    let init = cfg.init.clone().unwrap_or(closed);
    solve_limit_system_weighted(
        cfg.theta,
        &cfg.c,
        &model,
        cfg.weights.as_ref(),
        &init,
        cfg.tol,
    )
}

fn estimate(
    samples: &SampleMatrix,
    cfg: &EstimateConfig,
    k: usize,
) -> Result<EstimateOutput, Error> {
    let (est, expectile) =
        estimate_extreme_expectile(samples, k, cfg.alpha, cfg.dependence, cfg.norm)?;
    Ok(EstimateOutput {
        gamma_hat: est.gamma_hat,
        c_hat: est.c_hat,
        k: est.k,
        expectile,
        diagnostic: None,
    })
}

/// Execute a parsed command.
pub fn run_command(cmd: &Command) -> Result<(), CliError> {
    let output = cmd.output.as_deref();
    match &cmd.job {
        Job::Exact(cfg) => {
            let weights = cfg
                .weights
                .clone()
                .unwrap_or_else(|| WeightMatrix::ones(cfg.margins.len()));
            let problem =
                ExpectileProblem::new(cfg.margins.clone(), weights, cfg.dependence, cfg.alpha)?;
            let solution = solve_multivariate_expectile(&problem, cfg.tol, cfg.max_iter)?;
            write_json(output, &solution)
        }
        Job::Limit(cfg) => write_json(output, &limit_vector(cfg)?),
        Job::Estimate(cfg) => {
            let samples = SampleMatrix::load_csv(&cfg.samples)?;
            match cfg.k {
                Some(k) => write_json(output, &estimate(&samples, cfg, k)?),
                None => {
                    let rows = cfg
                        .k_grid
                        .iter()
                        .map(|&k| {
                            let mut row = estimate(&samples, cfg, k)?;
                            row.diagnostic = Some(k_growth_diagnostic(samples.n(), k, cfg.alpha));
                            Ok(row)
                        })
                        .collect::<Result<Vec<_>, Error>>()?;
                    write_json(output, &rows)
                }
            }
        }
        Job::Simulate(cfg) => {
            let sample = draw_sample(&cfg.margins, cfg.dependence, cfg.n, cfg.seed)?;
            let mut out = open_output(output)?;
            sample.write_csv(&mut out)?;
            out.flush().map_err(|e| CliError::io("write failed", e))
        }
        Job::Sweep(cfg) => {
            let records = with_pool(cmd.jobs, || run_k_sweep(cfg))??;
            for &alpha in &cfg.alpha_grid {
                for k in cfg.effective_k_grid() {
                    let cell: Vec<_> = records
                        .iter()
                        .filter(|r| r.alpha == alpha && r.k == k)
                        .collect();
                    let flagged = cell.iter().filter(|r| r.error_flag).count();
                    let medians: Vec<String> = (1..=cfg.margins.len())
                        .map(|j| {
                            let m =
                                median(cell.iter().filter(|r| r.component == j).map(|r| r.ratio));
                            format!("{m:.4}")
                        })
                        .collect();
                    eprintln!(
                        "alpha={alpha} k={k}: median ratio [{}], {flagged} flagged rows",
                        medians.join(", ")
                    );
                }
            }
            let mut out = open_output(output)?;
            write_sweep_csv(&records, &mut out)?;
            Ok(())
        }
        Job::Boxplot(cfg) => {
            let records = with_pool(cmd.jobs, || run_boxplot_study(cfg))??;
            for &n in &cfg.n_grid {
                let medians: Vec<String> = (1..=cfg.margins.len())
                    .map(|j| {
                        let gamma = median(
                            records
                                .iter()
                                .filter(|r| r.n == n && r.component == j)
                                .map(|r| r.gamma_hat),
                        );
                        let c = median(
                            records
                                .iter()
                                .filter(|r| r.n == n && r.component == j)
                                .map(|r| r.c_hat),
                        );
                        format!("gamma_{j} {gamma:.4} c_{j} {c:.4}")
                    })
                    .collect();
                eprintln!("n={n}: median {}", medians.join(", "));
            }
            let mut out = open_output(output)?;
            write_boxplot_csv(&records, &mut out)?;
            Ok(())
        }
    }
}

/// Parse, run and report; returns the process exit code.
pub fn main_with_args<I, S>(argv: I) -> u8
where
    I: IntoIterator<Item = S>,
    S: Into<std::ffi::OsString> + Clone,
{
    let cmd = match parse_command(argv) {
        Ok(cmd) => cmd,
        Err(e) if e.code == 0 => {
            print!("{}", e.message);
            return 0;
        }
        Err(e) => {
            eprint!("{}", e.message);
            if !e.message.ends_with('\n') {
                eprintln!();
            }
            return e.code;
        }
    };
    match run_command(&cmd) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("mvexp {}: {e}", cmd.verb.name());
            if let Err(write_err) = emit_diagnostic(cmd.output.as_deref(), &e) {
                eprintln!("mvexp: {write_err}");
            }
            e.code
        }
    }
}
