//! The `logshift` command line: `simulate`, `fit`, `path`, `screen`, `eval`
//! and `prox-curve`.
//!
//! Configuration files are JSON; any flag given on the command line wins over
//! the file. `β` and `b` accept `inf`. Every JSON document written carries
//! `schema_version`.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use log::{info, warn};
use serde::{Deserialize, Serialize};

use crate::admm::AdmmConfig;
use crate::datagen::{self, SimConfig};
use crate::dataio::{self, ObservationSet};
use crate::error::{Error, Result};
use crate::matcore::SymMatrix;
use crate::metrics::{self, MetricsReport};
use crate::objective::{CovarianceSet, Hyperparams, PrecisionSet};
use crate::penalty::scalar_logshift_prox;
use crate::screening;
use crate::serde_ext::{parse_extended_real, ExtReal, ExtRealVec};
use crate::solver::{self, SolveReport, SolverConfig};
use crate::SCHEMA_VERSION;

#[derive(Debug, Parser)]
#[command(name = "logshift", version, about = "Joint sparse Gaussian graphical models with the log-shift penalty")]
pub struct Cli {
    /// Worker threads for blocks, graphs and path points (default: all cores).
    #[arg(long, global = true)]
    pub threads: Option<usize>,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Sample tridiagonal ground truth and Gaussian observations.
    Simulate(SimulateArgs),
    /// Fit one set of hyperparameters.
    Fit(FitArgs),
    /// Fit a grid of hyperparameters with warm starts.
    Path(PathArgs),
    /// Show the block partition found by screening.
    Screen(ScreenArgs),
    /// Score precision matrices against held-out data and/or ground truth.
    Eval(EvalArgs),
    /// Tabulate the scalar log-shift thresholding rule.
    ProxCurve(ProxCurveArgs),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HeaderMode {
    /// Treat the first row as names when it is not all numeric.
    Auto,
    Yes,
    No,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// JSON simulation config (p, k, n, seed, and optional generator settings).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub p: Option<usize>,
    #[arg(long)]
    pub k: Option<usize>,
    /// Sample size per graph; one value is used for every graph.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Validation sample size per graph.
    #[arg(long, value_delimiter = ',')]
    pub n_validation: Option<Vec<usize>>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory for group_<k>.csv, validation_<k>.csv and truth.json.
    #[arg(long)]
    pub out: PathBuf,
}

/// Where the data come from and how they are preprocessed.
#[derive(Debug, Args)]
pub struct DataArgs {
    /// One CSV per graph: observations (rows) by variables (columns), or
    /// covariance matrices with `--from-covariance`.
    #[arg(required = true)]
    pub files: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    pub header: HeaderMode,
    /// Inputs are covariance matrices (with a header row of names).
    #[arg(long)]
    pub from_covariance: bool,
    /// Sample sizes for `--from-covariance`; one value is used for every graph.
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<f64>>,
    /// Convert price columns to log returns first.
    #[arg(long)]
    pub log_returns: bool,
    /// Replace each column by its normal scores.
    #[arg(long)]
    pub gaussianize: bool,
    /// Fit on this fraction of each group's rows; the rest is held out.
    #[arg(long)]
    pub train_frac: Option<f64>,
    /// Seed for the train/held-out split.
    #[arg(long)]
    pub seed: Option<u64>,
}

/// Hyperparameters and solver settings; each overrides `--config`.
#[derive(Debug, Args)]
pub struct HyperArgs {
    /// JSON file with any of the fields below (and the data options).
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Log-shift scale; `inf` gives the convex sparse-group penalty.
    #[arg(long)]
    pub beta: Option<String>,
    /// Mix between the ℓ1 (1) and group ℓ2 (0) norms.
    #[arg(long)]
    pub nu: Option<f64>,
    /// Spectral caps: one value, or one per graph; `inf` for none.
    #[arg(long)]
    pub b: Option<String>,
    /// ADMM penalty parameter.
    #[arg(long)]
    pub rho: Option<f64>,
    /// ADMM absolute and relative tolerance.
    #[arg(long)]
    pub tol: Option<f64>,
    /// ADMM iteration limit per MM step.
    #[arg(long)]
    pub max_iter: Option<usize>,
    /// Relative objective change that stops MM.
    #[arg(long)]
    pub mm_tol: Option<f64>,
    #[arg(long)]
    pub mm_max_iter: Option<usize>,
}

#[derive(Debug, Args)]
pub struct FitArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Output directory for precision_<k>.csv and report.json.
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct PathArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// JSON grid: a list of points `{"gamma", "beta", "nu", "b"}` or a
    /// product `{"gamma": [...], "beta": [...], "nu": [...]}`.
    #[arg(long)]
    pub grid: PathBuf,
    /// Validation observation CSVs (same layout and preprocessing as the data).
    #[arg(long, num_args = 1..)]
    pub validation: Vec<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Debug, Args)]
pub struct ScreenArgs {
    #[command(flatten)]
    pub data: DataArgs,
    #[command(flatten)]
    pub hyper: HyperArgs,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Estimated precision matrices, one CSV per graph.
    #[arg(long, required = true, num_args = 1..)]
    pub estimate: Vec<PathBuf>,
    /// Held-out observation CSVs (or covariances with `--from-covariance`).
    #[arg(long, num_args = 1..)]
    pub validation: Vec<PathBuf>,
    #[arg(long, value_enum, default_value_t = HeaderMode::Auto)]
    pub header: HeaderMode,
    #[arg(long)]
    pub from_covariance: bool,
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<f64>>,
    #[arg(long)]
    pub log_returns: bool,
    #[arg(long)]
    pub gaussianize: bool,
    /// truth.json written by `simulate`.
    #[arg(long)]
    pub truth: Option<PathBuf>,
    /// Output JSON file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct ProxCurveArgs {
    #[arg(long)]
    pub gamma: f64,
    #[arg(long)]
    pub beta: String,
    #[arg(long, default_value_t = -5.0, allow_hyphen_values = true)]
    pub y_min: f64,
    #[arg(long, default_value_t = 5.0, allow_hyphen_values = true)]
    pub y_max: f64,
    /// Number of grid points, endpoints included.
    #[arg(long, default_value_t = 1001)]
    pub points: usize,
    /// Output TSV file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

/// Optional fields of a `fit`/`path`/`screen` config file.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitFile {
    pub gamma: Option<f64>,
    pub beta: Option<ExtReal>,
    pub nu: Option<f64>,
    pub b: Option<ExtRealVec>,
    pub rho: Option<f64>,
    pub tol: Option<f64>,
    pub max_iter: Option<usize>,
    pub mm_tol: Option<f64>,
    pub mm_max_iter: Option<usize>,
    pub seed: Option<u64>,
    pub train_frac: Option<f64>,
    pub log_returns: Option<bool>,
    pub gaussianize: Option<bool>,
}

/// Everything that determined a fit, echoed into its report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveConfig {
    pub hyperparams: Hyperparams,
    pub solver: SolverConfig,
    pub inputs: Vec<PathBuf>,
    pub header: HeaderMode,
    pub from_covariance: bool,
    pub n: Option<Vec<f64>>,
    pub log_returns: bool,
    pub gaussianize: bool,
    pub train_frac: Option<f64>,
    pub seed: u64,
}

#[derive(Debug, Serialize)]
pub struct FitOutput<'a> {
    pub schema_version: u32,
    pub config: &'a EffectiveConfig,
    pub names: &'a [String],
    pub heldout_negloglik: Option<f64>,
    pub report: &'a SolveReport,
}

/// `truth.json`: the generating precision matrices and their support.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TruthFile {
    pub schema_version: u32,
    pub config: SimConfig,
    pub names: Vec<String>,
    /// 0-based pairs `(i, j)`, `i < j`, nonzero in the truth.
    pub support: Vec<(usize, usize)>,
    pub precisions: Vec<Vec<Vec<f64>>>,
}

impl TruthFile {
    pub fn precision_set(&self) -> Result<PrecisionSet> {
        let ms = self
            .precisions
            .iter()
            .map(|rows| {
                let p = rows.len();
                if rows.iter().any(|r| r.len() != p) {
                    return Err(Error::Invalid("truth matrix is not square".into()));
                }
                let dense = nalgebra::DMatrix::from_fn(p, p, |i, j| rows[i][j]);
                SymMatrix::from_dense_checked(&dense, 1e-12)
            })
            .collect::<Result<Vec<_>>>()?;
        PrecisionSet::new(ms)
    }
}

#[derive(Debug, Serialize)]
pub struct ScreenOutput {
    pub schema_version: u32,
    pub gamma: f64,
    pub nu: f64,
    pub count: usize,
    pub sizes: Vec<usize>,
    /// 0-based variable indices per block.
    pub blocks: Vec<Vec<usize>>,
    pub block_names: Vec<Vec<String>>,
    pub edges_screened_out: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridPoint {
    pub gamma: f64,
    #[serde(default)]
    pub beta: Option<ExtReal>,
    #[serde(default)]
    pub nu: Option<f64>,
    #[serde(default)]
    pub b: Option<ExtRealVec>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum GridFile {
    Points(Vec<GridPoint>),
    Wrapped { points: Vec<GridPoint> },
    Product {
        gamma: Vec<f64>,
        #[serde(default)]
        beta: Option<Vec<ExtReal>>,
        #[serde(default)]
        nu: Option<Vec<f64>>,
        #[serde(default)]
        b: Option<ExtRealVec>,
    },
}

impl GridFile {
    /// Expands to points; a product iterates `gamma` fastest.
    pub fn points(&self) -> Vec<GridPoint> {
        match self {
            GridFile::Points(p) | GridFile::Wrapped { points: p } => p.clone(),
            GridFile::Product { gamma, beta, nu, b } => {
                let betas: Vec<Option<ExtReal>> = match beta {
                    Some(v) => v.iter().copied().map(Some).collect(),
                    None => vec![None],
                };
                let nus: Vec<Option<f64>> = match nu {
                    Some(v) => v.iter().copied().map(Some).collect(),
                    None => vec![None],
                };
                let mut out = Vec::new();
                for &n in &nus {
                    for &bt in &betas {
                        for &g in gamma {
                            out.push(GridPoint { gamma: g, beta: bt, nu: n, b: b.clone() });
                        }
                    }
                }
                out
            }
        }
    }
}

#[derive(Debug, Serialize)]
pub struct PathEntry {
    pub index: usize,
    pub gamma: f64,
    #[serde(with = "crate::serde_ext::extended_real")]
    pub beta: f64,
    pub nu: f64,
    pub edges: Option<usize>,
    pub train_objective: Option<f64>,
    pub validation_negloglik: Option<f64>,
    pub error: Option<String>,
}

#[derive(Debug, Serialize)]
pub struct PathOutput {
    pub schema_version: u32,
    pub selected: Option<usize>,
    pub points: Vec<PathEntry>,
}

/// Parses argv, runs the command, and maps errors to a nonzero exit code.
pub fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: cannot start {n} threads: {e}");
            return ExitCode::FAILURE;
        }
    }
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

pub fn run(cmd: Command) -> Result<()> {
    match cmd {
        Command::Simulate(a) => cmd_simulate(&a),
        Command::Fit(a) => cmd_fit(&a),
        Command::Path(a) => cmd_path(&a),
        Command::Screen(a) => cmd_screen(&a),
        Command::Eval(a) => cmd_eval(&a),
        Command::ProxCurve(a) => cmd_prox_curve(&a),
    }
}

fn parse_ext(flag: &str, s: &str) -> Result<f64> {
    parse_extended_real(s)
        .ok_or_else(|| Error::Invalid(format!("--{flag}: expected a number or \"inf\", got {s:?}")))
}

fn parse_ext_list(flag: &str, s: &str) -> Result<Vec<f64>> {
    s.split(',').map(|x| parse_ext(flag, x)).collect()
}

fn broadcast<T: Clone>(what: &str, v: Vec<T>, k: usize) -> Result<Vec<T>> {
    match v.len() {
        1 => Ok(vec![v[0].clone(); k]),
        len if len == k => Ok(v),
        len => Err(Error::Invalid(format!("{len} values of {what} for {k} graphs"))),
    }
}

fn write_stdout_or(path: Option<&Path>, bytes: &[u8]) -> Result<()> {
    match path {
        Some(p) => dataio::write_atomic(p, bytes),
        None => {
            let mut out = std::io::stdout().lock();
            out.write_all(bytes)?;
            out.flush()?;
            Ok(())
        }
    }
}

fn json_bytes<T: Serialize>(value: &T) -> Result<Vec<u8>> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    Ok(bytes)
}

// ---- simulate --------------------------------------------------------------

pub fn cmd_simulate(a: &SimulateArgs) -> Result<()> {
    let mut cfg = match &a.config {
        Some(path) => dataio::read_json::<SimConfig>(path)?,
        None => {
            let (p, k, n) = match (a.p, a.k, &a.n) {
                (Some(p), Some(k), Some(n)) => (p, k, n.clone()),
                _ => {
                    return Err(Error::Invalid(
                        "simulate needs --config or all of --p, --k and --n".into(),
                    ))
                }
            };
            SimConfig::new(p, k, n, a.seed.unwrap_or(0))
        }
    };
    if let Some(p) = a.p {
        cfg.p = p;
    }
    if let Some(k) = a.k {
        cfg.k = k;
    }
    if let Some(n) = &a.n {
        cfg.n = broadcast("--n", n.clone(), cfg.k)?;
    }
    if let Some(n) = &a.n_validation {
        cfg.n_validation = Some(broadcast("--n-validation", n.clone(), cfg.k)?);
    }
    if let Some(seed) = a.seed {
        cfg.seed = seed;
    }
    if cfg.n.len() == 1 && cfg.k > 1 {
        cfg.n = vec![cfg.n[0]; cfg.k];
    }
    cfg.validate()?;
    let sim = datagen::simulate(&cfg)?;
    let truth = PrecisionSet::new(sim.truth.clone())?;
    let names = sim.observations.names().to_vec();
    let mask = metrics::support_mask(&truth);
    let file = TruthFile {
        schema_version: SCHEMA_VERSION,
        config: cfg.clone(),
        names: names.clone(),
        support: mask.upper_pairs().filter(|&(i, j, x)| i < j && x).map(|(i, j, _)| (i, j)).collect(),
        precisions: sim
            .truth
            .iter()
            .map(|m| (0..m.dim()).map(|i| (0..m.dim()).map(|j| m.get(i, j)).collect()).collect())
            .collect(),
    };
    with_cleanup(&a.out, |written| {
        written.extend(dataio::write_observations(&sim.observations, &a.out, "group")?);
        if let Some(v) = &sim.validation {
            written.extend(dataio::write_observations(v, &a.out, "validation")?);
        }
        let tp = a.out.join("truth.json");
        dataio::write_json(&tp, &file)?;
        written.push(tp);
        Ok(())
    })?;
    println!(
        "simulated p={} k={} n={:?} seed={} ({} true edges) -> {}",
        cfg.p,
        cfg.k,
        cfg.n,
        cfg.seed,
        file.support.len(),
        a.out.display()
    );
    Ok(())
}

/// Runs `body`, which records every file it writes; on failure those files
/// (and `dir`, if this call created it and it is left empty) are removed.
fn with_cleanup(dir: &Path, body: impl FnOnce(&mut Vec<PathBuf>) -> Result<()>) -> Result<()> {
    let existed = dir.exists();
    fs::create_dir_all(dir)?;
    let mut written = Vec::new();
    let res = body(&mut written);
    if res.is_err() {
        for p in &written {
            let _ = fs::remove_file(p);
        }
        if !existed {
            let _ = fs::remove_dir(dir);
        }
    }
    res
}

// ---- shared data loading -----------------------------------------------------

fn first_row_is_header(path: &Path) -> Result<bool> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(false).from_path(path)?;
    match rdr.records().next() {
        Some(rec) => Ok(rec?.iter().any(|c| c.trim().parse::<f64>().is_err())),
        None => Ok(false),
    }
}

fn load_observations(files: &[PathBuf], header: HeaderMode) -> Result<ObservationSet> {
    let has_header = match header {
        HeaderMode::Yes => true,
        HeaderMode::No => false,
        HeaderMode::Auto => match files.first() {
            Some(f) => first_row_is_header(f)?,
            None => false,
        },
    };
    dataio::load_csv(files, has_header)
}

fn preprocess(obs: ObservationSet, log_returns: bool, gaussianize: bool) -> Result<ObservationSet> {
    let obs = if log_returns { obs.try_map(dataio::log_returns)? } else { obs };
    if gaussianize {
        obs.try_map(dataio::gaussianize)
    } else {
        Ok(obs)
    }
}

fn covariance_from_files(
    files: &[PathBuf],
    n: Option<&[f64]>,
) -> Result<(Vec<String>, CovarianceSet)> {
    let (names, s) = dataio::load_sym_matrices(files)?;
    let n = n.ok_or_else(|| Error::Invalid("--from-covariance needs --n".into()))?;
    let n = broadcast("--n", n.to_vec(), s.len())?;
    Ok((names, CovarianceSet::new(s, n)?))
}

struct Problem {
    names: Vec<String>,
    train: CovarianceSet,
    holdout: Option<CovarianceSet>,
}

fn load_problem(cfg: &EffectiveConfig) -> Result<Problem> {
    if cfg.from_covariance {
        if cfg.log_returns || cfg.gaussianize || cfg.train_frac.is_some() {
            return Err(Error::Invalid(
                "--log-returns, --gaussianize and --train-frac need observation data".into(),
            ));
        }
        let (names, train) = covariance_from_files(&cfg.inputs, cfg.n.as_deref())?;
        return Ok(Problem { names, train, holdout: None });
    }
    if cfg.n.is_some() {
        return Err(Error::Invalid("--n applies only with --from-covariance".into()));
    }
    let obs = preprocess(load_observations(&cfg.inputs, cfg.header)?, cfg.log_returns, cfg.gaussianize)?;
    let names = obs.names().to_vec();
    match cfg.train_frac {
        Some(frac) => {
            let (tr, ho) = dataio::split(&obs, frac, cfg.seed)?;
            Ok(Problem {
                names,
                train: dataio::sample_covariance(&tr),
                holdout: Some(dataio::sample_covariance(&ho)),
            })
        }
        None => Ok(Problem { names, train: dataio::sample_covariance(&obs), holdout: None }),
    }
}

fn effective_config(data: &DataArgs, hyper: &HyperArgs, need_gamma: bool) -> Result<EffectiveConfig> {
    let file: FitFile = match &hyper.config {
        Some(p) => dataio::read_json(p)?,
        None => FitFile::default(),
    };
    let k = data.files.len();
    let gamma = match hyper.gamma.or(file.gamma) {
        Some(g) => g,
        None if need_gamma => return Err(Error::Invalid("--gamma is required".into())),
        None => 0.0,
    };
    let beta = match &hyper.beta {
        Some(s) => parse_ext("beta", s)?,
        None => file.beta.map(|b| b.0).unwrap_or(f64::INFINITY),
    };
    let nu = hyper.nu.or(file.nu).unwrap_or(0.5);
    let b = match &hyper.b {
        Some(s) => parse_ext_list("b", s)?,
        None => file.b.map(|b| b.0).unwrap_or_else(|| vec![f64::INFINITY]),
    };
    let b = broadcast("--b", b, k)?;
    let hyperparams = Hyperparams::with_caps(gamma, beta, nu, b)?;

    let defaults = SolverConfig::default();
    let tol = hyper.tol.or(file.tol);
    let solver = SolverConfig {
        admm: AdmmConfig {
            rho: hyper.rho.or(file.rho).unwrap_or(defaults.admm.rho),
            max_iter: hyper.max_iter.or(file.max_iter).unwrap_or(defaults.admm.max_iter),
            eps_abs: tol.unwrap_or(defaults.admm.eps_abs),
            eps_rel: tol.unwrap_or(defaults.admm.eps_rel),
        },
        mm_tol: hyper.mm_tol.or(file.mm_tol).unwrap_or(defaults.mm_tol),
        mm_max_iter: hyper.mm_max_iter.or(file.mm_max_iter).unwrap_or(defaults.mm_max_iter),
    };
    solver.validate()?;
    Ok(EffectiveConfig {
        hyperparams,
        solver,
        inputs: data.files.clone(),
        header: data.header,
        from_covariance: data.from_covariance,
        n: data.n.clone(),
        log_returns: data.log_returns || file.log_returns.unwrap_or(false),
        gaussianize: data.gaussianize || file.gaussianize.unwrap_or(false),
        train_frac: data.train_frac.or(file.train_frac),
        seed: data.seed.or(file.seed).unwrap_or(0),
    })
}

fn warn_if_saturated(hp: &Hyperparams, cov: &CovarianceSet) {
    if hp.gamma == 0.0 && hp.b.iter().all(|b| b.is_infinite()) {
        for (k, &n) in cov.sample_sizes().iter().enumerate() {
            if n < cov.p() as f64 {
                warn!(
                    "graph {} has n = {n} < p = {}: with gamma = 0 and no cap the likelihood is unbounded (saturated model)",
                    k + 1,
                    cov.p()
                );
            }
        }
    }
}

fn write_fit(
    dir: &Path,
    cfg: &EffectiveConfig,
    names: &[String],
    omega: &PrecisionSet,
    report: &SolveReport,
    heldout: Option<f64>,
) -> Result<()> {
    with_cleanup(dir, |written| {
        written.extend(dataio::write_precisions(omega, names, dir)?);
        let path = dir.join("report.json");
        dataio::write_json(
            &path,
            &FitOutput {
                schema_version: SCHEMA_VERSION,
                config: cfg,
                names,
                heldout_negloglik: heldout,
                report,
            },
        )?;
        written.push(path);
        Ok(())
    })
}

// ---- fit ---------------------------------------------------------------------

pub fn cmd_fit(a: &FitArgs) -> Result<()> {
    let cfg = effective_config(&a.data, &a.hyper, true)?;
    let prob = load_problem(&cfg)?;
    warn_if_saturated(&cfg.hyperparams, &prob.train);
    let (omega, report) = solver::fit(&prob.train, &cfg.hyperparams, &cfg.solver)?;
    let heldout = match &prob.holdout {
        Some(h) => Some(metrics::heldout_negloglik(h, &omega)?),
        None => None,
    };
    write_fit(&a.out, &cfg, &prob.names, &omega, &report, heldout)?;
    if !report.converged {
        warn!("MM or ADMM stopped at an iteration limit");
    }
    println!(
        "fit: {} edges, F = {}, {} MM steps, certified = {} (beta_required = {}), {:.3} s",
        report.edge_count,
        report.final_objective(),
        report.mm_iterations,
        report.convexity_certified,
        report.beta_required,
        report.wall_time
    );
    Ok(())
}

// ---- path --------------------------------------------------------------------

fn format_opt(x: Option<f64>) -> String {
    x.map(|v| v.to_string()).unwrap_or_else(|| "NA".into())
}

pub fn cmd_path(a: &PathArgs) -> Result<()> {
    let base = effective_config(&a.data, &a.hyper, false)?;
    let grid_file: GridFile = dataio::read_json(&a.grid)?;
    let points = grid_file.points();
    if points.is_empty() {
        return Err(Error::Invalid("the grid is empty".into()));
    }
    let k = base.inputs.len();
    let hps = points
        .iter()
        .map(|pt| {
            let b = match &pt.b {
                Some(b) => broadcast("b", b.0.clone(), k)?,
                None => base.hyperparams.b.clone(),
            };
            Hyperparams::with_caps(
                pt.gamma,
                pt.beta.map(|x| x.0).unwrap_or(base.hyperparams.beta),
                pt.nu.unwrap_or(base.hyperparams.nu),
                b,
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let prob = load_problem(&base)?;
    let validation = if a.validation.is_empty() {
        prob.holdout.clone()
    } else {
        if base.from_covariance {
            return Err(Error::Invalid("--validation needs observation data".into()));
        }
        let obs = preprocess(
            load_observations(&a.validation, base.header)?,
            base.log_returns,
            base.gaussianize,
        )?;
        Some(dataio::sample_covariance(&obs))
    };

    let results = solver::fit_path(&prob.train, &hps, &base.solver);
    let selected = match &validation {
        Some(v) => {
            let cands: Vec<Option<&PrecisionSet>> =
                results.iter().map(|r| r.as_ref().ok().map(|(o, _)| o)).collect();
            match metrics::select_by_validation(&cands, v) {
                Ok(i) => Some(i),
                Err(e) => {
                    warn!("no grid point could be scored on the validation data: {e}");
                    None
                }
            }
        }
        None => None,
    };

    with_cleanup(&a.out, |written| {
        let mut entries = Vec::with_capacity(points.len());
        let mut tsv = String::from(
            "index\tgamma\tbeta\tnu\tedges\ttrain_objective\tvalidation_negloglik\tselected\tstatus\n",
        );
        for (idx, (hp, res)) in hps.iter().zip(&results).enumerate() {
            let mut entry = PathEntry {
                index: idx,
                gamma: hp.gamma,
                beta: hp.beta,
                nu: hp.nu,
                edges: None,
                train_objective: None,
                validation_negloglik: None,
                error: None,
            };
            match res {
                Ok((omega, report)) => {
                    let val = validation
                        .as_ref()
                        .and_then(|v| metrics::heldout_negloglik(v, omega).ok());
                    entry.edges = Some(report.edge_count);
                    entry.train_objective = Some(report.final_objective());
                    entry.validation_negloglik = val;
                    let cfg = EffectiveConfig { hyperparams: hp.clone(), ..base.clone() };
                    let dir = a.out.join(format!("point_{idx:03}"));
                    write_fit(&dir, &cfg, &prob.names, omega, report, val)?;
                    written.push(dir);
                }
                Err(e) => entry.error = Some(e.to_string()),
            }
            tsv.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\n",
                idx,
                hp.gamma,
                if hp.beta.is_infinite() { "inf".to_string() } else { hp.beta.to_string() },
                hp.nu,
                entry.edges.map(|e| e.to_string()).unwrap_or_else(|| "NA".into()),
                format_opt(entry.train_objective),
                format_opt(entry.validation_negloglik),
                u8::from(selected == Some(idx)),
                if entry.error.is_some() { "error" } else { "ok" },
            ));
            entries.push(entry);
        }
        let tp = a.out.join("frontier.tsv");
        dataio::write_atomic(&tp, tsv.as_bytes())?;
        written.push(tp);
        let jp = a.out.join("path.json");
        dataio::write_json(
            &jp,
            &PathOutput { schema_version: SCHEMA_VERSION, selected, points: entries },
        )?;
        written.push(jp);
        Ok(())
    })
    .inspect_err(|_| {
        for idx in 0..hps.len() {
            let _ = fs::remove_dir_all(a.out.join(format!("point_{idx:03}")));
        }
    })?;
    let failures = results.iter().filter(|r| r.is_err()).count();
    println!(
        "path: {} points ({} failed), selected = {}",
        hps.len(),
        failures,
        selected.map(|i| i.to_string()).unwrap_or_else(|| "none".into())
    );
    info!("wrote {}", a.out.display());
    Ok(())
}

// ---- screen ------------------------------------------------------------------

pub fn cmd_screen(a: &ScreenArgs) -> Result<()> {
    let cfg = effective_config(&a.data, &a.hyper, true)?;
    let prob = load_problem(&cfg)?;
    let part = screening::screen(&prob.train, &cfg.hyperparams);
    let summary = part.summary();
    let out = ScreenOutput {
        schema_version: SCHEMA_VERSION,
        gamma: cfg.hyperparams.gamma,
        nu: cfg.hyperparams.nu,
        count: summary.count,
        sizes: summary.sizes,
        block_names: part
            .blocks
            .iter()
            .map(|b| b.iter().map(|&i| prob.names[i].clone()).collect())
            .collect(),
        blocks: part.blocks,
        edges_screened_out: summary.edges_screened_out,
    };
    write_stdout_or(a.out.as_deref(), &json_bytes(&out)?)
}

// ---- eval --------------------------------------------------------------------

pub fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let (est_names, est) = dataio::load_sym_matrices(&a.estimate)?;
    let est = PrecisionSet::new(est)?;
    let holdout = if a.validation.is_empty() {
        None
    } else if a.from_covariance {
        Some(covariance_from_files(&a.validation, a.n.as_deref())?.1)
    } else {
        let obs = preprocess(load_observations(&a.validation, a.header)?, a.log_returns, a.gaussianize)?;
        if obs.names() != est_names.as_slice() {
            warn!("validation column names differ from the estimate's");
        }
        Some(dataio::sample_covariance(&obs))
    };
    let truth = match &a.truth {
        Some(p) => Some(dataio::read_json::<TruthFile>(p)?.precision_set()?),
        None => None,
    };
    let report = MetricsReport::compute(&est, holdout.as_ref(), truth.as_ref())?;
    write_stdout_or(a.out.as_deref(), &json_bytes(&report)?)
}

// ---- prox-curve --------------------------------------------------------------

/// `y` and `argmin_x ½(x − y)² + γβ log(1 + |x|/β)` on an even grid.
pub fn prox_curve(gamma: f64, beta: f64, y_min: f64, y_max: f64, points: usize) -> Result<Vec<(f64, f64)>> {
    if !(gamma >= 0.0 && gamma.is_finite()) {
        return Err(Error::Invalid(format!("gamma must be finite and nonnegative, got {gamma}")));
    }
    crate::penalty::check_beta(beta)?;
    if !(y_min.is_finite() && y_max.is_finite() && y_min <= y_max) {
        return Err(Error::Invalid("need finite y_min <= y_max".into()));
    }
    if points < 2 {
        return Err(Error::Invalid("need at least 2 points".into()));
    }
    let last = (points - 1) as f64;
    Ok((0..points)
        .map(|i| {
            // Weighted form keeps a range symmetric about zero exactly symmetric.
            let y = ((last - i as f64) * y_min + i as f64 * y_max) / last;
            (y, scalar_logshift_prox(y, gamma, beta))
        })
        .collect())
}

pub fn cmd_prox_curve(a: &ProxCurveArgs) -> Result<()> {
    let beta = parse_ext("beta", &a.beta)?;
    let rows = prox_curve(a.gamma, beta, a.y_min, a.y_max, a.points)?;
    let mut tsv = String::from("y\txhat\n");
    for (y, x) in rows {
        tsv.push_str(&format!("{y}\t{x}\n"));
    }
    write_stdout_or(a.out.as_deref(), tsv.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;
    use clap::CommandFactory;

    #[test]
    fn cli_definition_is_consistent() {
        Cli::command().debug_assert();
    }

    #[test]
    fn grid_file_forms() {
        let g: GridFile = serde_json::from_str(r#"[{"gamma": 1.0, "beta": "inf"}, {"gamma": 2}]"#).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 2);
        assert_eq!(pts[0].beta, Some(ExtReal(f64::INFINITY)));
        let g: GridFile =
            serde_json::from_str(r#"{"gamma": [1, 2, 3], "beta": [0.5, "inf"], "nu": [0.5]}"#).unwrap();
        let pts = g.points();
        assert_eq!(pts.len(), 6);
        assert_eq!(pts[3].gamma, 1.0);
        assert_eq!(pts[3].beta, Some(ExtReal(f64::INFINITY)));
        let g: GridFile = serde_json::from_str(r#"{"points": [{"gamma": 4, "b": [1, "inf"]}]}"#).unwrap();
        assert_eq!(g.points()[0].b, Some(ExtRealVec(vec![1.0, f64::INFINITY])));
    }

    #[test]
    fn prox_curve_is_odd_and_soft_thresholds_at_infinity() {
        let rows = prox_curve(1.5, f64::INFINITY, -4.0, 4.0, 81).unwrap();
        for (y, x) in &rows {
            assert!((x - y.signum() * (y.abs() - 1.5).max(0.0)).abs() < 1e-12);
        }
        let rows = prox_curve(2.0, 0.3, -3.0, 3.0, 61).unwrap();
        for i in 0..rows.len() {
            let (y, x) = rows[i];
            let (ym, xm) = rows[rows.len() - 1 - i];
            assert!((y + ym).abs() < 1e-12);
            assert_eq!(x, -xm);
        }
        assert!(prox_curve(1.0, 1.0, 1.0, 0.0, 5).is_err());
    }

    #[test]
    fn fit_file_rejects_unknown_fields() {
        assert!(serde_json::from_str::<FitFile>(r#"{"gama": 1}"#).is_err());
        let f: FitFile = serde_json::from_str(r#"{"gamma": 1, "beta": "inf", "b": 4}"#).unwrap();
        assert_eq!(f.b, Some(ExtRealVec(vec![4.0])));
    }
}
