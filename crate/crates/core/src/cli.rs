//! Command-line front end: `fit`, `ci`, `simulate-critical-values` and `coverage`.
//!
//! Payloads go to stdout or to the requested files; diagnostics go to stderr. Exit codes:
//! 0 success, 1 I/O, 2 malformed input or configuration, 3 solver failure, 4 `x0` outside
//! the fit, 5 missing critical value or noise scale.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::ci::{
    ci_derivative, ci_value, convex_density_intervals, logconcave_intervals,
    logconcave_mode_interval, nuisance_a_random_design, regression_mode_interval, NuisanceScale,
    Target,
};
use crate::convex_lse::{
    check_lse_characterization, default_characterization_tolerance, fit_convex_lse,
    RegressionData, SolverOptions,
};
use crate::coverage::{run_coverage, ExperimentConfig, Model};
use crate::density::{
    check_convex_density_characterization, check_logconcave_characterization,
    fit_convex_density_lse, fit_log_concave_mle, ConvexDensityCharacterization,
    ConvexDensityOptions, LogConcaveCharacterization, LogConcaveFit, LogConcaveOptions,
    SampleData,
};
use crate::error::{Error, Result};
use crate::pwl::{PiecewiseLinearFunction, Shape};
use crate::sim::{oracle_table, pivotal_table, simulate_samples, write_ecdf_file, Design, SimulationConfig};
use crate::tables::CriticalValueTable;

pub const WORKERS_ENV: &str = "CONVEX_LNE_WORKERS";

#[derive(Debug, Parser)]
#[command(name = "convex-lne", version, about = "Shape-constrained fits and pivotal confidence intervals")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModelArg {
    ConvexRegression,
    LogConcave,
    ConvexDensity,
}

impl From<ModelArg> for Model {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::ConvexRegression => Model::ConvexRegression,
            ModelArg::LogConcave => Model::LogConcave,
            ModelArg::ConvexDensity => Model::ConvexDensity,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum TargetArg {
    Value,
    Derivative,
    Mode,
}

impl From<TargetArg> for Target {
    fn from(t: TargetArg) -> Self {
        match t {
            TargetArg::Value => Target::Value,
            TargetArg::Derivative => Target::Derivative,
            TargetArg::Mode => Target::Mode,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DesignArg {
    Fixed,
    Random,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit a shape-constrained estimator to a CSV file.
    Fit {
        input: PathBuf,
        #[arg(long, value_enum)]
        model: ModelArg,
        /// Write the fit here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Confidence interval from a fit file.
    Ci {
        fit: PathBuf,
        #[arg(long)]
        x0: Option<f64>,
        #[arg(long, value_enum)]
        target: TargetArg,
        #[arg(long, default_value_t = 0.95)]
        level: f64,
        /// Critical-value table JSON; entries override the built-in table.
        #[arg(long)]
        table: Option<PathBuf>,
        #[arg(long, conflicts_with = "auto_sigma")]
        sigma: Option<f64>,
        /// Use the first-difference estimate stored in the fit file.
        #[arg(long)]
        auto_sigma: bool,
        #[arg(long, value_enum, default_value_t = DesignArg::Fixed)]
        design: DesignArg,
    },
    /// Simulate critical values of the pivotal and oracle limit laws.
    SimulateCriticalValues {
        #[arg(long, default_value = "quadratic(12,0.5)")]
        f0: String,
        #[arg(long, default_value_t = 0.5)]
        x0: f64,
        #[arg(long, default_value_t = 10_000)]
        n: usize,
        #[arg(long, default_value_t = 10_000)]
        reps: usize,
        #[arg(long, default_value_t = 1)]
        seed: u64,
        #[arg(long, default_value_t = 1.0)]
        sigma: f64,
        #[arg(long, value_enum, default_value_t = DesignArg::Fixed)]
        design: DesignArg,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
        /// Table JSON path; the ECDF CSV and manifest are written next to it.
        #[arg(long)]
        out: PathBuf,
    },
    /// Run a coverage experiment described by a `key = value` file.
    Coverage {
        config: PathBuf,
        /// Output prefix for `.csv`, `.json` and `.manifest.json`; CSV goes to stdout if absent.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long, env = WORKERS_ENV)]
        workers: Option<usize>,
    },
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Io(_) => 1,
        Error::NonConvergence { .. }
        | Error::Replication { .. }
        | Error::FailureRate { .. }
        | Error::ZeroWidthPiece(_)
        | Error::EmptyPiece { .. } => 3,
        Error::OutOfRange { .. } | Error::SideUnavailable(_) => 4,
        Error::MissingStatistic(_) | Error::DeltaOutsideGrid { .. } | Error::MissingScale(_) => 5,
        _ => 2,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitFile {
    pub model: Model,
    pub knots: Vec<f64>,
    pub values: Vec<f64>,
    pub shape: Shape,
    pub meta: FitMeta,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitMeta {
    pub n: usize,
    /// What `values` holds: `fitted`, `log-density` or `density`.
    pub values: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub sigma_hat: Option<f64>,
    pub characterization_passed: bool,
    pub input: String,
}

#[derive(Debug, Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: Value,
    seed: Option<u64>,
    version: &'a str,
    wall_time_secs: f64,
    outputs: Vec<String>,
    table_source: Option<String>,
}

fn write_manifest(path: &Path, m: &RunManifest<'_>) -> Result<()> {
    std::fs::write(path, serde_json::to_string_pretty(m)?)?;
    Ok(())
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(suffix);
    PathBuf::from(s)
}

fn read_columns(path: &Path, want: &[&str]) -> Result<Vec<Vec<f64>>> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_path(path)?;
    let headers: Vec<String> = rdr.headers()?.iter().map(str::to_string).collect();
    if headers != want {
        return Err(Error::InvalidInput(format!(
            "expected header {:?}, found {:?}",
            want.join(","),
            headers.join(",")
        )));
    }
    let mut cols = vec![Vec::new(); want.len()];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        for (j, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                Error::InvalidInput(format!("row {}: cannot parse {field:?} as a number", row + 1))
            })?;
            cols[j].push(v);
        }
    }
    Ok(cols)
}

pub fn fit_file(input: &Path, model: Model) -> Result<FitFile> {
    let name = input.display().to_string();
    match model {
        Model::ConvexRegression => {
            let cols = read_columns(input, &["x", "y"])?;
            let data = RegressionData::from_unsorted(cols[0].iter().copied().zip(cols[1].iter().copied()))?;
            let f = fit_convex_lse(&data, &SolverOptions::default())?;
            let ch = check_lse_characterization(&f, &data, default_characterization_tolerance(&data))?;
            Ok(FitFile {
                model,
                knots: f.knots().to_vec(),
                values: f.values().to_vec(),
                shape: f.shape(),
                meta: FitMeta {
                    n: data.n(),
                    values: "fitted".into(),
                    sigma_hat: crate::ci::estimate_sigma(&data).ok(),
                    characterization_passed: ch.passed,
                    input: name,
                },
            })
        }
        Model::LogConcave => {
            let mut cols = read_columns(input, &["x"])?;
            let data = SampleData::new(cols.remove(0))?;
            let fit = fit_log_concave_mle(&data, &LogConcaveOptions::default())?;
            let ch = check_logconcave_characterization(
                &fit,
                &data,
                LogConcaveCharacterization::default_tolerance(&data),
            );
            Ok(FitFile {
                model,
                knots: fit.phi().knots().to_vec(),
                values: fit.phi().values().to_vec(),
                shape: Shape::Concave,
                meta: FitMeta {
                    n: data.n(),
                    values: "log-density".into(),
                    sigma_hat: None,
                    characterization_passed: ch.passed,
                    input: name,
                },
            })
        }
        Model::ConvexDensity => {
            let mut cols = read_columns(input, &["x"])?;
            let data = SampleData::new(cols.remove(0))?;
            data.require_nonnegative()?;
            let f = fit_convex_density_lse(&data, &ConvexDensityOptions::default())?;
            let ch = check_convex_density_characterization(
                &f,
                &data,
                ConvexDensityCharacterization::default_tolerance(&data),
            )?;
            Ok(FitFile {
                model,
                knots: f.knots().to_vec(),
                values: f.values().to_vec(),
                shape: f.shape(),
                meta: FitMeta {
                    n: data.n(),
                    values: "density".into(),
                    sigma_hat: None,
                    characterization_passed: ch.passed,
                    input: name,
                },
            })
        }
    }
}

fn load_table(path: Option<&Path>) -> Result<CriticalValueTable> {
    let builtin = CriticalValueTable::builtin();
    match path {
        Some(p) => Ok(builtin.overlay(&CriticalValueTable::read(p)?)),
        None => Ok(builtin),
    }
}

pub struct CiRequest<'a> {
    pub x0: Option<f64>,
    pub target: Target,
    pub level: f64,
    pub table: &'a CriticalValueTable,
    pub sigma: Option<f64>,
    pub auto_sigma: bool,
    pub design: Design,
}

pub fn interval_from_fit(fit: &FitFile, req: &CiRequest<'_>) -> Result<crate::ci::ConfidenceInterval> {
    let delta = 1.0 - req.level;
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidLevel(req.level));
    }
    let f = PiecewiseLinearFunction::new(fit.knots.clone(), fit.values.clone(), fit.shape)?;
    let x0 = || req.x0.ok_or_else(|| Error::InvalidInput(format!("--x0 is required for the {} target", req.target.name())));
    let n = fit.meta.n;
    match fit.model {
        Model::ConvexRegression => {
            if req.target == Target::Mode {
                return regression_mode_interval(&f, delta, req.table);
            }
            let x0 = x0()?;
            f.evaluate(x0)?;
            let sigma = match (req.sigma, req.auto_sigma) {
                (Some(s), _) => s,
                (None, true) => fit.meta.sigma_hat.ok_or_else(|| {
                    Error::MissingScale("the fit file carries no sigma estimate; pass --sigma".into())
                })?,
                (None, false) => {
                    return Err(Error::MissingScale(
                        "value and derivative intervals need --sigma <s> or --auto-sigma".into(),
                    ))
                }
            };
            let piece = f.linear_piece_containing(x0, f.kink_tolerance())?;
            let scale = match req.design {
                Design::Fixed => NuisanceScale::new(sigma)?,
                Design::Uniform => nuisance_a_random_design(f.knots(), &piece, sigma)?,
            };
            match req.target {
                Target::Value => ci_value(&f, &piece, x0, n, scale, delta, req.table),
                _ => ci_derivative(&piece, x0, n, scale, delta, req.table),
            }
        }
        Model::LogConcave => {
            let lc = LogConcaveFit::new(f, n)?;
            if req.target == Target::Mode {
                return logconcave_mode_interval(&lc, delta, req.table);
            }
            let x0 = x0()?;
            lc.log_density(x0)?;
            let local = logconcave_intervals(&lc, x0, delta, req.table)?;
            Ok(if req.target == Target::Value { local.value } else { local.derivative })
        }
        Model::ConvexDensity => {
            if req.target == Target::Mode {
                return Err(Error::InvalidInput("convex-density fits have no mode target".into()));
            }
            let local = convex_density_intervals(&f, n, x0()?, delta, req.table)?;
            Ok(if req.target == Target::Value { local.value } else { local.derivative })
        }
    }
}

fn design(d: DesignArg) -> Design {
    match d {
        DesignArg::Fixed => Design::Fixed,
        DesignArg::Random => Design::Uniform,
    }
}

/// Runs a parsed command, writing payloads to `stdout`.
pub fn run(cli: Cli, stdout: &mut dyn Write) -> Result<()> {
    let start = Instant::now();
    match cli.command {
        Command::Fit { input, model, out } => {
            let fit = fit_file(&input, model.into())?;
            if !fit.meta.characterization_passed {
                log::warn!("fit did not pass its characterization check");
            }
            let text = serde_json::to_string(&fit)?;
            match out {
                Some(p) => {
                    std::fs::write(&p, &text)?;
                    write_manifest(
                        &with_suffix(&p, ".manifest.json"),
                        &RunManifest {
                            command: "fit",
                            config: json!({"input": input, "model": fit.model}),
                            seed: None,
                            version: env!("CARGO_PKG_VERSION"),
                            wall_time_secs: start.elapsed().as_secs_f64(),
                            outputs: vec![p.display().to_string()],
                            table_source: None,
                        },
                    )?;
                }
                None => writeln!(stdout, "{text}")?,
            }
        }
        Command::Ci {
            fit,
            x0,
            target,
            level,
            table,
            sigma,
            auto_sigma,
            design: d,
        } => {
            let text = std::fs::read_to_string(&fit)?;
            let fit: FitFile = serde_json::from_str(&text)?;
            if table.is_none() {
                log::info!("using the built-in critical-value table");
            }
            let table = load_table(table.as_deref())?;
            let ci = interval_from_fit(
                &fit,
                &CiRequest {
                    x0,
                    target: target.into(),
                    level,
                    table: &table,
                    sigma,
                    auto_sigma,
                    design: design(d),
                },
            )?;
            writeln!(stdout, "{}", serde_json::to_string(&ci)?)?;
        }
        Command::SimulateCriticalValues {
            f0,
            x0,
            n,
            reps,
            seed,
            sigma,
            design: d,
            workers,
            out,
        } => {
            let config = SimulationConfig {
                f0: f0.parse()?,
                x0,
                n,
                b: reps,
                seed,
                sigma,
                design: design(d),
                workers: workers.unwrap_or(1),
            };
            let samples = simulate_samples(&config)?;
            let uncertified = samples.iter().filter(|s| !s.certified).count();
            if uncertified > 0 {
                log::warn!("{uncertified} fits failed their characterization check");
            }
            let mut table = pivotal_table(&config, &samples)?;
            match oracle_table(&config, &samples) {
                Ok(o) => table = table.overlay(&o),
                Err(e) => log::warn!("oracle laws skipped: {e}"),
            }
            table.write(&out)?;
            let ecdf = with_suffix(&out, ".ecdf.csv");
            write_ecdf_file(&table, &ecdf)?;
            let mut cfg = BTreeMap::new();
            cfg.insert("f0", json!(config.f0.to_string()));
            cfg.insert("x0", json!(x0));
            cfg.insert("n", json!(n));
            cfg.insert("reps", json!(reps));
            cfg.insert("sigma", json!(sigma));
            cfg.insert("design", json!(config.design));
            cfg.insert("workers", json!(config.workers));
            write_manifest(
                &with_suffix(&out, ".manifest.json"),
                &RunManifest {
                    command: "simulate-critical-values",
                    config: json!(cfg),
                    seed: Some(seed),
                    version: env!("CARGO_PKG_VERSION"),
                    wall_time_secs: start.elapsed().as_secs_f64(),
                    outputs: vec![out.display().to_string(), ecdf.display().to_string()],
                    table_source: None,
                },
            )?;
        }
        Command::Coverage { config, out, workers } => {
            let text = std::fs::read_to_string(&config)?;
            let mut cfg = ExperimentConfig::from_kv(&text)?;
            if let Some(w) = workers {
                cfg.workers = w;
            }
            let table = load_table(cfg.table.as_deref().map(Path::new))?;
            let report = run_coverage(&cfg, &table)?;
            match out {
                Some(prefix) => {
                    let csv_path = with_suffix(&prefix, ".csv");
                    let json_path = with_suffix(&prefix, ".json");
                    report.write_csv(std::fs::File::create(&csv_path)?)?;
                    std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
                    write_manifest(
                        &with_suffix(&prefix, ".manifest.json"),
                        &RunManifest {
                            command: "coverage",
                            config: json!({"file": config, "text": text, "workers": cfg.workers}),
                            seed: Some(cfg.seed),
                            version: env!("CARGO_PKG_VERSION"),
                            wall_time_secs: start.elapsed().as_secs_f64(),
                            outputs: vec![csv_path.display().to_string(), json_path.display().to_string()],
                            table_source: Some(cfg.table.clone().unwrap_or_else(|| "builtin".into())),
                        },
                    )?;
                }
                None => report.write_csv(&mut *stdout)?,
            }
        }
    }
    Ok(())
}

/// Parses `args`, runs the command and returns the process exit code.
pub fn main_with<I, T>(args: I, stdout: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match run(cli, stdout) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}
