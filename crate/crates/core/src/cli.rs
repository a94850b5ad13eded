//! Tick-file ingestion, JSON reports and the command-line front end.
//!
//! Tick files are long-format CSV with header `asset_id,timestamp,log_price`,
//! one row per observation, timestamps strictly increasing within each asset.

use std::collections::HashMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::avar::{acov_matrix_hat, svec_pairs, AcovMatrix, GmsAcovConfig};
use crate::citest::{ci_test, CiConfig, CiTestResult};
use crate::error::{CovestError, Result};
use crate::estimators::{estimate_matrix, CovEstimate, EstimateConfig, Method, TickSeries};
use crate::mc::{mc_validate, replicate_rng, McReport, Scenario, ScenarioSpec};
use crate::sim::{simulate_dataset, ItoModelConfig, NoiseConfig, SamplingKind};

/// Expected CSV header.
pub const TICK_HEADER: [&str; 3] = ["asset_id", "timestamp", "log_price"];

/// Tick series keyed by asset identifier, in order of first appearance.
#[derive(Debug, Clone, PartialEq)]
pub struct TickData {
    pub assets: Vec<String>,
    pub series: Vec<TickSeries>,
}

impl TickData {
    /// Position of an asset.
    pub fn index_of(&self, asset: &str) -> Result<usize> {
        self.assets
            .iter()
            .position(|a| a == asset)
            .ok_or_else(|| CovestError::InvalidParameter(format!("unknown asset '{asset}'")))
    }
}

/// Reads a tick file; the horizon defaults to the largest timestamp.
pub fn load_ticks(path: &Path) -> Result<TickData> {
    load_ticks_with_horizon(path, None)
}

/// Reads a tick file with an explicit horizon.
pub fn load_ticks_with_horizon(path: &Path, horizon: Option<f64>) -> Result<TickData> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_path(path)?;
    let mut records = reader.records();
    let header = match records.next() {
        None => {
            return Err(CovestError::Parse {
                line: 1,
                message: "no records".into(),
            })
        }
        Some(h) => h?,
    };
    if header.iter().collect::<Vec<_>>() != TICK_HEADER {
        return Err(CovestError::Parse {
            line: 1,
            message: format!("expected header '{}'", TICK_HEADER.join(",")),
        });
    }
    let mut assets: Vec<String> = Vec::new();
    let mut lookup: HashMap<String, usize> = HashMap::new();
    let mut times: Vec<Vec<f64>> = Vec::new();
    let mut values: Vec<Vec<f64>> = Vec::new();
    for rec in records {
        let rec = rec?;
        let line = rec.position().map_or(0, |p| p.line() as usize);
        let bad = |message: String| CovestError::Parse { line, message };
        if rec.len() != 3 {
            return Err(bad(format!("expected 3 fields, found {}", rec.len())));
        }
        let asset = rec[0].to_string();
        let t: f64 = rec[1]
            .parse()
            .map_err(|_| bad(format!("invalid timestamp '{}'", &rec[1])))?;
        let y: f64 = rec[2]
            .parse()
            .map_err(|_| bad(format!("invalid log_price '{}'", &rec[2])))?;
        if !t.is_finite() || t < 0.0 {
            return Err(bad(format!(
                "timestamp must be finite and nonnegative, got {t}"
            )));
        }
        if !y.is_finite() {
            return Err(bad(format!("log_price must be finite, got {y}")));
        }
        let k = *lookup.entry(asset.clone()).or_insert_with(|| {
            assets.push(asset.clone());
            times.push(Vec::new());
            values.push(Vec::new());
            assets.len() - 1
        });
        if let Some(&last) = times[k].last() {
            if t <= last {
                return Err(bad(format!(
                    "timestamp {t} of asset '{asset}' does not exceed previous {last}"
                )));
            }
        }
        times[k].push(t);
        values[k].push(y);
    }
    if assets.is_empty() {
        return Err(CovestError::Parse {
            line: 2,
            message: "no records".into(),
        });
    }
    let t_max = times
        .iter()
        .filter_map(|t| t.last().copied())
        .fold(0.0_f64, f64::max);
    let horizon = horizon.unwrap_or(t_max);
    let series = times
        .into_iter()
        .zip(values)
        .map(|(t, v)| TickSeries::from_parts(t, v, horizon))
        .collect::<Result<Vec<_>>>()?;
    Ok(TickData { assets, series })
}

/// Writes tick series in the long CSV format.
pub fn write_ticks(path: &Path, assets: &[String], series: &[TickSeries]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(TICK_HEADER)?;
    for (a, s) in assets.iter().zip(series) {
        for (t, y) in s.times().iter().zip(s.values()) {
            w.write_record([a.as_str(), &format!("{t:?}"), &format!("{y:?}")])?;
        }
    }
    w.flush()?;
    Ok(())
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Integrated-covariance section of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateSection {
    pub method: Method,
    pub kernel: Option<String>,
    pub matrix: Vec<Vec<f64>>,
    pub svec: Vec<f64>,
    pub pairs: Vec<crate::estimators::PairConfig>,
    pub min_eigenvalue: f64,
}

impl From<&CovEstimate> for EstimateSection {
    fn from(e: &CovEstimate) -> Self {
        Self {
            method: e.method,
            kernel: e.kernel.clone(),
            matrix: rows(&e.matrix),
            svec: e.svec.clone(),
            pairs: e.pairs.clone(),
            min_eigenvalue: e.min_eigenvalue,
        }
    }
}

/// Asymptotic-covariance section of a report.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AcovSection {
    pub rate: crate::avar::Rate,
    pub n_total: usize,
    pub svec_pairs: Vec<(usize, usize)>,
    pub matrix: Vec<Vec<f64>>,
    pub rescaled: Vec<Vec<f64>>,
    pub refresh_counts: Vec<Vec<f64>>,
}

impl From<&AcovMatrix> for AcovSection {
    fn from(a: &AcovMatrix) -> Self {
        Self {
            rate: a.rate,
            n_total: a.n_total,
            svec_pairs: svec_pairs(a.p),
            matrix: rows(&a.matrix),
            rescaled: rows(&a.rescaled),
            refresh_counts: rows(&a.counts),
        }
    }
}

/// Wall-clock timing.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timings {
    pub elapsed_seconds: f64,
}

/// Machine-readable report written by every subcommand; all keys are always present.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub command: String,
    pub config: serde_json::Value,
    pub seeds: Vec<u64>,
    pub assets: Vec<String>,
    pub estimates: Option<EstimateSection>,
    pub acov: Option<AcovSection>,
    pub standard_errors: Option<Vec<f64>>,
    pub test: Option<CiTestResult>,
    pub mc: Option<McReport>,
    pub simulation: Option<SimulationSection>,
    pub timings: Option<Timings>,
}

impl RunReport {
    fn empty(command: &str, config: serde_json::Value) -> Self {
        Self {
            command: command.into(),
            config,
            seeds: Vec::new(),
            assets: Vec::new(),
            estimates: None,
            acov: None,
            standard_errors: None,
            test: None,
            mc: None,
            simulation: None,
            timings: None,
        }
    }
}

/// Ground truth of a simulation run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationSection {
    pub ticks_path: String,
    pub integrated_covariance: Vec<Vec<f64>>,
    pub observations: Vec<usize>,
}

/// Command-line interface.
#[derive(Debug, Parser)]
#[command(
    name = "covest",
    version,
    about = "Integrated covariance estimation for high-frequency data"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

/// Subcommands.
#[derive(Debug, Subcommand)]
pub enum Command {
    /// Simulate tick data and write it as CSV.
    Simulate(SimulateArgs),
    /// Estimate the integrated covariance matrix (with standard errors when available).
    Estimate(EstimateArgs),
    /// Estimate the asymptotic covariance matrix of the estimates.
    Acov(EstimateArgs),
    /// Conditional-independence test of two assets given a third.
    Citest(CitestArgs),
    /// Monte Carlo validation scenario.
    McValidate(McArgs),
}

/// Options shared by the estimation commands.
#[derive(Debug, Clone, Args, Serialize)]
pub struct MethodArgs {
    /// Estimator: rc, ms, kernel, hy or gms.
    #[arg(long, default_value = "gms")]
    pub method: String,
    /// Kernel: cubic, parzen or th<r>.
    #[arg(long, default_value = "cubic")]
    pub kernel: String,
    /// Tuning constant c in M = c·√N.
    #[arg(long, default_value_t = 1.0)]
    pub c: f64,
    /// Apply end-effect adjustments.
    #[arg(long, default_value_t = true, action = clap::ArgAction::Set)]
    pub adjusted: bool,
    /// Number of histogram bins for the asymptotic covariance estimator.
    #[arg(long)]
    pub bins: Option<usize>,
}

impl MethodArgs {
    fn method(&self) -> Result<Method> {
        Method::parse(&self.method)
    }

    fn estimate_config(&self) -> EstimateConfig {
        EstimateConfig {
            kernel: self.kernel.clone(),
            c: self.c,
            pair_c: Vec::new(),
            adjusted: self.adjusted,
        }
    }

    fn acov_config(&self) -> GmsAcovConfig {
        GmsAcovConfig {
            kernel: self.kernel.clone(),
            c: self.c,
            bins: self.bins,
            adjusted: self.adjusted,
            ..GmsAcovConfig::default()
        }
    }
}

/// Arguments of `estimate` and `acov`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct EstimateArgs {
    /// Tick file.
    #[arg(long)]
    pub input: PathBuf,
    #[command(flatten)]
    pub method: MethodArgs,
    /// Report path (stdout if omitted).
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Record wall-clock timings in the report.
    #[arg(long)]
    pub timings: bool,
}

/// Arguments of `citest`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct CitestArgs {
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub x1: String,
    #[arg(long)]
    pub x2: String,
    #[arg(long)]
    pub z: String,
    #[command(flatten)]
    pub method: MethodArgs,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timings: bool,
}

/// Arguments of `simulate`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct SimulateArgs {
    /// Tick file to write.
    #[arg(long)]
    pub out: PathBuf,
    /// Report path (stdout if omitted).
    #[arg(long)]
    pub report: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Number of assets.
    #[arg(long, default_value_t = 4)]
    pub p: usize,
    /// Observations per asset (equidistant intervals or Poisson rate).
    #[arg(long, default_value_t = 1000)]
    pub n: usize,
    /// Sampling design: equidistant or poisson.
    #[arg(long, default_value = "poisson")]
    pub sampling: String,
    /// Noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    pub eta: f64,
    /// Volatility model: sv (stochastic with leverage) or constant.
    #[arg(long, default_value = "sv")]
    pub model: String,
    #[arg(long)]
    pub timings: bool,
}

/// Arguments of `mc-validate`.
#[derive(Debug, Clone, Args, Serialize)]
pub struct McArgs {
    /// rc_clt, hy_cov, gms_cov, ms_equiv, ci_size, ci_power, hy_rate or gms_rate.
    #[arg(long)]
    pub scenario: String,
    #[arg(long, default_value_t = 500)]
    pub replicates: usize,
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Sample size override.
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long)]
    pub timings: bool,
}

fn echo<T: Serialize>(x: &T) -> serde_json::Value {
    serde_json::to_value(x).unwrap_or(serde_json::Value::Null)
}

/// Estimation report for loaded tick data.
pub fn estimate_report(
    data: &TickData,
    args: &MethodArgs,
    with_estimates: bool,
) -> Result<RunReport> {
    let method = args.method()?;
    let mut report = RunReport::empty(if with_estimates { "estimate" } else { "acov" }, echo(args));
    report.assets = data.assets.clone();
    let est = estimate_matrix(&data.series, method, &args.estimate_config())?;
    if with_estimates {
        report.estimates = Some((&est).into());
    }
    if method != Method::Hy {
        let acov = acov_matrix_hat(&data.series, method, &args.acov_config())?;
        report.standard_errors = Some(acov.standard_errors());
        report.acov = Some((&acov).into());
    }
    Ok(report)
}

/// Conditional-independence report for loaded tick data.
pub fn citest_report(data: &TickData, args: &CitestArgs) -> Result<RunReport> {
    let method = args.method.method()?;
    let (i1, i2, iz) = (
        data.index_of(&args.x1)?,
        data.index_of(&args.x2)?,
        data.index_of(&args.z)?,
    );
    let config = CiConfig {
        estimate: args.method.estimate_config(),
        acov: args.method.acov_config(),
    };
    let result = ci_test(
        &data.series[i1],
        &data.series[i2],
        &data.series[iz],
        method,
        &config,
    )?;
    let mut report = RunReport::empty("citest", echo(args));
    report.assets = vec![args.x1.clone(), args.x2.clone(), args.z.clone()];
    report.test = Some(result);
    Ok(report)
}

/// Simulates a dataset, writes it and reports the ground truth.
pub fn simulate_report(args: &SimulateArgs) -> Result<RunReport> {
    let p = args.p;
    if p == 0 {
        return Err(CovestError::InvalidParameter("p must be positive".into()));
    }
    let model = match args.model.as_str() {
        "sv" => ItoModelConfig::default_sv(p, 1.0, 10 * args.n),
        "constant" => {
            let sigma = DMatrix::from_fn(p, p, |i, j| if i == j { 1.0 } else { 0.5 });
            ItoModelConfig::constant(sigma, 1.0, 10 * args.n)
        }
        other => {
            return Err(CovestError::InvalidParameter(format!(
                "unknown model '{other}'"
            )))
        }
    };
    let sampling = match args.sampling.as_str() {
        "equidistant" => SamplingKind::Equidistant { n: args.n },
        "poisson" => SamplingKind::Poisson {
            rates: vec![args.n as f64; p],
            augment: true,
        },
        other => {
            return Err(CovestError::InvalidParameter(format!(
                "unknown sampling '{other}'"
            )))
        }
    };
    let noise = NoiseConfig::independent(&vec![args.eta; p]);
    let mut rng = replicate_rng(args.seed, 0);
    let (data, paths) = simulate_dataset(&model, &sampling, &noise, &mut rng)?;
    let assets: Vec<String> = (1..=p).map(|k| format!("X{k}")).collect();
    write_ticks(&args.out, &assets, &data)?;
    let mut report = RunReport::empty("simulate", echo(args));
    report.seeds = vec![args.seed];
    report.simulation = Some(SimulationSection {
        ticks_path: args.out.display().to_string(),
        integrated_covariance: rows(&paths.integrated),
        observations: data.iter().map(|s| s.len()).collect(),
    });
    report.assets = assets;
    Ok(report)
}

/// Runs a Monte Carlo scenario.
pub fn mc_report(args: &McArgs) -> Result<RunReport> {
    let mut spec = ScenarioSpec::new(Scenario::parse(&args.scenario)?);
    spec.n = args.n;
    let mc = mc_validate(&spec, args.replicates, args.seed)?;
    let mut report = RunReport::empty("mc-validate", echo(args));
    report.seeds = vec![args.seed];
    report.mc = Some(mc);
    Ok(report)
}

/// Serialises a report as pretty JSON to a file or stdout.
pub fn write_report(report: &RunReport, out: Option<&Path>) -> Result<()> {
    let text = serde_json::to_string_pretty(report)?;
    match out {
        Some(path) => {
            let mut w = BufWriter::new(File::create(path)?);
            w.write_all(text.as_bytes())?;
            w.write_all(b"\n")?;
            w.flush()?;
        }
        None => {
            let mut out = std::io::stdout().lock();
            match writeln!(out, "{text}") {
                Err(e) if e.kind() == std::io::ErrorKind::BrokenPipe => {}
                other => other?,
            }
        }
    }
    Ok(())
}

/// Executes a parsed command and writes its report.
pub fn run(cli: Cli) -> Result<()> {
    let start = Instant::now();
    let (mut report, out, timings) = match &cli.command {
        Command::Simulate(a) => (simulate_report(a)?, a.report.clone(), a.timings),
        Command::Estimate(a) => (
            estimate_report(&load_ticks(&a.input)?, &a.method, true)?,
            a.out.clone(),
            a.timings,
        ),
        Command::Acov(a) => (
            estimate_report(&load_ticks(&a.input)?, &a.method, false)?,
            a.out.clone(),
            a.timings,
        ),
        Command::Citest(a) => (
            citest_report(&load_ticks(&a.input)?, a)?,
            a.out.clone(),
            a.timings,
        ),
        Command::McValidate(a) => (mc_report(a)?, a.out.clone(), a.timings),
    };
    if timings {
        report.timings = Some(Timings {
            elapsed_seconds: start.elapsed().as_secs_f64(),
        });
    }
    write_report(&report, out.as_deref())
}
