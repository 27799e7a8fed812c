//! The four subcommands.
//!
//! Every option can come from three layers, highest precedence first: command
//! line flags, the `--config` JSON file, and the `config` object of a manifest
//! given with `--manifest`. Each run writes `manifest.json` with all options
//! resolved, so passing that manifest back reproduces the run.

use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use gen_en_core::conditions::{self, ConditionReport, LemmaEventReport, TheoremQuantities};
use gen_en_core::experiments::{ExperimentKind, ExperimentPlan, GridSpec};
use gen_en_core::simulate::{self, CovarianceFactors, CovarianceSpec, Dataset, SeedRecord, TruthSpec};
use gen_en_core::solvers::{Method, PenaltyConfig, RegressionProblem, SolverOptions};
use gen_en_core::SymMatrix;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::formats::{self, DataFile, DatasetSidecar, Manifest};
use crate::{runner, CliError};

#[derive(Debug, Parser)]
#[command(
    name = "gen-en",
    version,
    about = "Simulate, fit and study the generalized Elastic Net"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Draw one dataset from the block covariance model
    Simulate(SimulateArgs),
    /// Fit Lasso, Elastic Net or gEN at one (lambda, eta)
    Fit(FitArgs),
    /// Irrepresentable-type criteria and finite-sample diagnostics for a dataset
    Conditions(ConditionsArgs),
    /// Run a replicated simulation experiment
    Experiment(ExperimentArgs),
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// JSON file with option values; command line flags take precedence
    #[arg(long, value_name = "FILE")]
    pub config: Option<PathBuf>,
    /// manifest.json of an earlier run to start from
    #[arg(long, value_name = "FILE")]
    pub manifest: Option<PathBuf>,
    /// Output directory, created if missing
    #[arg(long, value_name = "DIR", default_value = "gen-en-out")]
    pub out: PathBuf,
}

/// Overlays `$base` under `$top` for the listed optional fields.
macro_rules! overlay {
    ($top:expr, $base:expr; $($field:ident),+ $(,)?) => {
        $( if $top.$field.is_none() { $top.$field = $base.$field; } )+
    };
}

/// Lower layers (config file, then manifest) for the options of `command`.
fn lower_layers<T: DeserializeOwned + Default>(common: &Common, command: &str) -> Result<Vec<T>, CliError> {
    let mut layers = Vec::new();
    if let Some(path) = &common.config {
        layers.push(formats::read_json::<T>(path)?);
    }
    if let Some(path) = &common.manifest {
        let m: Manifest<T> = formats::read_json(path)?;
        if m.command != command {
            return Err(CliError::Config(format!(
                "{}: manifest is for `{}`, not `{command}`",
                path.display(),
                m.command
            )));
        }
        layers.push(m.config);
    }
    Ok(layers)
}

fn config_err(e: gen_en_core::Error) -> CliError {
    CliError::Config(e.to_string())
}

fn required<T>(value: Option<T>, flag: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Usage(format!("missing required option --{flag}")))
}

fn three(values: &[f64], flag: &str) -> Result<[f64; 3], CliError> {
    values
        .try_into()
        .map_err(|_| CliError::Config(format!("--{flag} needs exactly three values, got {}", values.len())))
}

fn finish_run<C: Serialize>(out: &Path, command: &str, config: &C, mut written: Vec<PathBuf>) -> Result<Vec<PathBuf>, CliError> {
    let path = out.join("manifest.json");
    formats::write_json(&path, &Manifest::new(command, config))?;
    written.push(path);
    Ok(written)
}

pub fn parse_method(s: &str) -> Result<Method, String> {
    Method::parse(s).ok_or_else(|| format!("unknown method `{s}` (expected lasso, en or gen)"))
}

pub fn parse_kind(s: &str) -> Result<ExperimentKind, String> {
    ExperimentKind::parse(s)
        .ok_or_else(|| format!("unknown experiment kind `{s}` (expected criteria_box, condition_curves or tprfpr)"))
}

/// `log:LO:HI:COUNT`, `rel:LO_RATIO:COUNT` (multiples of the null lambda) or
/// a comma-separated list of values.
pub fn parse_grid(s: &str) -> Result<GridSpec, String> {
    let num = |v: &str| v.trim().parse::<f64>().map_err(|_| format!("bad number `{v}` in grid `{s}`"));
    let count = |v: &str| v.trim().parse::<usize>().map_err(|_| format!("bad count `{v}` in grid `{s}`"));
    let parts: Vec<&str> = s.split(':').collect();
    match parts.as_slice() {
        ["log", lo, hi, n] => Ok(GridSpec::Log {
            lo: num(lo)?,
            hi: num(hi)?,
            count: count(n)?,
        }),
        ["rel", lo, n] => Ok(GridSpec::RelativeToNull {
            lo_ratio: num(lo)?,
            count: count(n)?,
        }),
        [list] => Ok(GridSpec::Explicit {
            values: list.split(',').map(num).collect::<Result<_, _>>()?,
        }),
        _ => Err(format!("cannot parse grid `{s}`")),
    }
}

pub fn run(cli: Cli) -> Result<Vec<PathBuf>, CliError> {
    match cli.command {
        Command::Simulate(a) => simulate(a),
        Command::Fit(a) => fit(a),
        Command::Conditions(a) => conditions(a),
        Command::Experiment(a) => experiment(a),
    }
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimulateArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Number of predictors [default: 200]
    #[arg(long)]
    pub p: Option<usize>,
    /// Number of observations [default: 200]
    #[arg(long)]
    pub n: Option<usize>,
    /// Number of active (leading) predictors [default: 5]
    #[arg(long)]
    pub q: Option<usize>,
    /// Value of every active coefficient [default: 10]
    #[arg(long)]
    pub b: Option<f64>,
    /// Noise standard deviation [default: 1]
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Within-active, cross and within-inactive correlations [default: 0.3,0.5,0.7]
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Random seed [default: 0]
    #[arg(long)]
    pub seed: Option<u64>,
    /// Stream within the seed [default: 0]
    #[arg(long)]
    pub stream: Option<u64>,
}

pub fn simulate(mut a: SimulateArgs) -> Result<Vec<PathBuf>, CliError> {
    for base in lower_layers::<SimulateArgs>(&a.common, "simulate")? {
        overlay!(a, base; p, n, q, b, sigma, alphas, seed, stream);
    }
    let (p, n, q) = (*a.p.get_or_insert(200), *a.n.get_or_insert(200), *a.q.get_or_insert(5));
    let b = *a.b.get_or_insert(10.0);
    let sigma = *a.sigma.get_or_insert(1.0);
    let alphas = three(a.alphas.get_or_insert_with(|| vec![0.3, 0.5, 0.7]), "alphas")?;
    let seed = SeedRecord::new(*a.seed.get_or_insert(0), *a.stream.get_or_insert(0));

    let spec = CovarianceSpec::new(p, q, alphas);
    spec.validate().map_err(config_err)?;
    let truth = TruthSpec::uniform(q, b);
    truth.beta_star(p).map_err(config_err)?;
    let factors = CovarianceFactors::from_spec(&spec)?;
    let d = simulate::sample_with_factors(&factors, &truth, n, sigma, seed).map_err(config_err)?;

    let out = &a.common.out;
    formats::ensure_dir(out)?;
    let sidecar = DatasetSidecar {
        n,
        p,
        q,
        b,
        noise_sigma: sigma,
        alphas,
        seed,
        beta_star: d.beta_star.clone(),
        epsilon: d.epsilon.clone(),
    };
    let paths = [out.join("data.csv"), out.join("data.json"), out.join("sigma.csv")];
    formats::write_file(&paths[0], &formats::dataset_csv(&d))?;
    formats::write_json(&paths[1], &sidecar)?;
    formats::write_file(&paths[2], &formats::matrix_csv(factors.sigma.as_matrix()))?;
    finish_run(out, "simulate", &a, paths.to_vec())
}

fn read_sigma(path: &Path, p: usize) -> Result<SymMatrix, CliError> {
    let m = formats::read_matrix_csv(path)?;
    if m.rows() != p || m.cols() != p {
        return Err(CliError::Data(format!(
            "{}: covariance is {}x{}, data has {p} predictors",
            path.display(),
            m.rows(),
            m.cols()
        )));
    }
    SymMatrix::new(m).map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FitArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// lasso, en or gen
    #[arg(long, value_parser = parse_method)]
    pub method: Option<Method>,
    /// l1 penalty weight
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Quadratic penalty weight, ignored by lasso [default: 0]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Dataset CSV with columns x1..xp, y and optionally beta
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Headerless p x p CSV with the design covariance (gen only)
    #[arg(long, value_name = "FILE")]
    pub sigma_file: Option<PathBuf>,
    /// Sweep limit of the coordinate descent [default: 100000]
    #[arg(long)]
    pub max_sweeps: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub method: Method,
    pub lambda: f64,
    pub eta: f64,
    pub beta_hat: Vec<f64>,
    pub beta_tilde_hat: Vec<f64>,
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    pub kkt_residual: f64,
}

pub fn fit(mut a: FitArgs) -> Result<Vec<PathBuf>, CliError> {
    for base in lower_layers::<FitArgs>(&a.common, "fit")? {
        overlay!(a, base; method, lambda, eta, data, sigma_file, max_sweeps);
    }
    let method = required(a.method, "method")?;
    let lambda = required(a.lambda, "lambda")?;
    let eta = if method == Method::Lasso { 0.0 } else { *a.eta.get_or_insert(0.0) };
    let penalty = PenaltyConfig::new(lambda, eta).map_err(config_err)?;
    let opts = SolverOptions {
        max_sweeps: *a.max_sweeps.get_or_insert(SolverOptions::default().max_sweeps),
        ..SolverOptions::default()
    };
    let data = formats::read_dataset_csv(&required(a.data.clone(), "data")?)?;
    let factors = match (method, &a.sigma_file) {
        (Method::Gen, None) => return Err(CliError::Usage("--sigma-file is required for gen".into())),
        (Method::Gen, Some(path)) => Some(
            CovarianceFactors::new(read_sigma(path, data.x.cols())?)
                .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))?,
        ),
        _ => None,
    };
    let problem = RegressionProblem::new(&data.x, &data.y, method, factors.as_ref())?;
    let f = problem.fit(penalty, None, &opts)?;

    let out = &a.common.out;
    formats::ensure_dir(out)?;
    let path = out.join("fit.json");
    formats::write_json(
        &path,
        &FitOutput {
            method,
            lambda,
            eta: f.penalty.eta,
            beta_hat: f.beta_hat,
            beta_tilde_hat: f.beta_tilde_hat,
            iterations: f.iterations,
            converged: f.converged,
            objective: f.objective,
            kkt_residual: f.kkt_residual,
        },
    )?;
    finish_run(out, "fit", &a, vec![path])
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ConditionsArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// Dataset CSV with columns x1..xp, y and beta
    #[arg(long, value_name = "FILE")]
    pub data: Option<PathBuf>,
    /// Headerless p x p CSV with the design covariance
    #[arg(long, value_name = "FILE")]
    pub sigma_file: Option<PathBuf>,
    /// JSON written by `simulate` next to the data; supplies the noise for the
    /// event diagnostics [default: the data path with a .json extension, if present]
    #[arg(long, value_name = "FILE")]
    pub sidecar: Option<PathBuf>,
    /// Number of active predictors [default: leading non-zeros of beta]
    #[arg(long)]
    pub q: Option<usize>,
    /// Lambda grid for EIC/GIC: log:LO:HI:COUNT or a comma list [default: log:0.01:10000:20]
    #[arg(long, value_parser = parse_grid)]
    pub lambda_grid: Option<GridSpec>,
    /// Eta grid for EIC/GIC [default: log:0.01:10000:20]
    #[arg(long, value_parser = parse_grid)]
    pub eta_grid: Option<GridSpec>,
    /// Lambda for the eigenvalue bounds and event diagnostics (skipped when absent)
    #[arg(long)]
    pub lambda: Option<f64>,
    /// Eta for the eigenvalue bounds and event diagnostics [default: 0]
    #[arg(long)]
    pub eta: Option<f64>,
    /// Noise standard deviation [default: from the sidecar, else 1]
    #[arg(long)]
    pub noise_sigma: Option<f64>,
    /// Margin in the noise bounds [default: 0.1]
    #[arg(long)]
    pub alpha: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionsOutput {
    pub q: usize,
    pub report: ConditionReport,
    pub theorem: Option<TheoremQuantities>,
    pub events: Option<LemmaEventReport>,
}

pub fn conditions(mut a: ConditionsArgs) -> Result<Vec<PathBuf>, CliError> {
    for base in lower_layers::<ConditionsArgs>(&a.common, "conditions")? {
        overlay!(a, base; data, sigma_file, sidecar, q, lambda_grid, eta_grid, lambda, eta, noise_sigma, alpha);
    }
    let data_path = required(a.data.clone(), "data")?;
    let DataFile { x, y, beta } = formats::read_dataset_csv(&data_path)?;
    let sigma = read_sigma(&required(a.sigma_file.clone(), "sigma-file")?, x.cols())?;
    if a.sidecar.is_none() {
        let guess = data_path.with_extension("json");
        a.sidecar = guess.exists().then_some(guess);
    }
    let sidecar: Option<DatasetSidecar> = match &a.sidecar {
        Some(path) => Some(formats::read_json(path).map_err(|e| CliError::Data(e.to_string()))?),
        None => None,
    };
    let beta = beta
        .or_else(|| sidecar.as_ref().map(|s| s.beta_star.clone()))
        .ok_or_else(|| CliError::Data(format!("{}: no beta column", data_path.display())))?;
    let q = *a.q.get_or_insert(beta.iter().take_while(|&&b| b != 0.0).count());
    let lambda_grid = a.lambda_grid.get_or_insert(GridSpec::log(1e-2, 1e4, 20)).resolve(None).map_err(config_err)?;
    let eta_grid = a.eta_grid.get_or_insert(GridSpec::log(1e-2, 1e4, 20)).resolve(None).map_err(config_err)?;
    let noise_sigma = *a.noise_sigma.get_or_insert(sidecar.as_ref().map_or(1.0, |s| s.noise_sigma));
    let alpha = *a.alpha.get_or_insert(0.1);

    let report = conditions::condition_report(&x, &sigma, &beta, q, &lambda_grid, &eta_grid)
        .map_err(|e| match e {
            gen_en_core::Error::InvalidParameter { .. } | gen_en_core::Error::DimensionMismatch { .. } => {
                config_err(e)
            }
            e => e.into(),
        })?;
    let (mut theorem, mut events) = (None, None);
    if let Some(lambda) = a.lambda {
        let penalty = PenaltyConfig::new(lambda, *a.eta.get_or_insert(0.0)).map_err(config_err)?;
        theorem = Some(conditions::theorem_quantities(&x, &sigma, &beta, penalty, noise_sigma, None, alpha)?);
        if let Some(s) = &sidecar {
            if s.epsilon.len() != y.len() {
                return Err(CliError::Data("sidecar noise length does not match the data".into()));
            }
            let d = Dataset {
                x: x.clone(),
                y: y.clone(),
                beta_star: beta.clone(),
                epsilon: s.epsilon.clone(),
                sigma: noise_sigma,
                seed: s.seed,
            };
            events = Some(conditions::lemma_events(&d, &sigma, penalty)?);
        }
    }

    let out = &a.common.out;
    formats::ensure_dir(out)?;
    let path = out.join("conditions.json");
    formats::write_json(&path, &ConditionsOutput { q, report, theorem, events })?;
    finish_run(out, "conditions", &a, vec![path])
}

#[derive(Debug, Clone, Default, Args, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentArgs {
    #[command(flatten)]
    #[serde(skip)]
    pub common: Common,
    /// criteria_box, condition_curves or tprfpr
    #[arg(long, value_parser = parse_kind)]
    pub kind: Option<ExperimentKind>,
    /// Starting plan: desk, paper-p200, paper-p400 or paper-p600 [default: desk]
    #[arg(long)]
    pub preset: Option<String>,
    /// Predictor counts
    #[arg(long, value_delimiter = ',')]
    pub p: Option<Vec<usize>>,
    /// Sample sizes
    #[arg(long, value_delimiter = ',')]
    pub n: Option<Vec<usize>>,
    /// Active set sizes
    #[arg(long, value_delimiter = ',')]
    pub q: Option<Vec<usize>>,
    /// Active coefficient values
    #[arg(long, value_delimiter = ',')]
    pub b: Option<Vec<f64>>,
    /// Noise standard deviation
    #[arg(long)]
    pub sigma: Option<f64>,
    /// Within-active, cross and within-inactive correlations
    #[arg(long, value_delimiter = ',')]
    pub alphas: Option<Vec<f64>>,
    /// Lambda grid: log:LO:HI:COUNT, rel:LO_RATIO:COUNT (tprfpr) or a comma list
    #[arg(long, value_parser = parse_grid)]
    pub lambda_grid: Option<GridSpec>,
    /// Eta grid: log:LO:HI:COUNT or a comma list
    #[arg(long, value_parser = parse_grid)]
    pub eta_grid: Option<GridSpec>,
    /// Methods compared by tprfpr
    #[arg(long, value_delimiter = ',', value_parser = parse_method)]
    pub methods: Option<Vec<Method>>,
    /// Replications per cell
    #[arg(long = "reps")]
    #[serde(alias = "reps")]
    pub replications: Option<usize>,
    /// Master seed
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(skip)]
    pub solver: Option<SolverOptions>,
    /// Worker threads; falls back to GEN_EN_WORKERS, then the number of CPUs
    #[arg(long)]
    pub workers: Option<usize>,
}

impl ExperimentArgs {
    /// Applies the layers and returns the plan and worker count.
    pub fn resolve(&mut self) -> Result<(ExperimentPlan, usize), CliError> {
        for base in lower_layers::<ExperimentArgs>(&self.common, "experiment")? {
            overlay!(self, base; kind, preset, p, n, q, b, sigma, alphas, lambda_grid, eta_grid, methods, replications, seed, solver, workers);
        }
        let kind = required(self.kind, "kind")?;
        let preset = self.preset.get_or_insert_with(|| "desk".into()).clone();
        let mut plan = ExperimentPlan::preset(kind, &preset).map_err(config_err)?;
        if let Some(v) = &self.p {
            plan.p = v.clone();
        }
        if let Some(v) = &self.n {
            plan.n = v.clone();
        }
        if let Some(v) = &self.q {
            plan.q = v.clone();
        }
        if let Some(v) = &self.b {
            plan.b = v.clone();
        }
        if let Some(v) = self.sigma {
            plan.sigma = v;
        }
        if let Some(v) = &self.alphas {
            plan.alphas = three(v, "alphas")?;
        }
        if let Some(v) = &self.lambda_grid {
            plan.lambda_grid = v.clone();
        }
        if let Some(v) = &self.eta_grid {
            plan.eta_grid = v.clone();
        }
        if let Some(v) = &self.methods {
            plan.methods = v.clone();
        }
        if let Some(v) = self.replications {
            plan.replications = v;
        }
        if let Some(v) = self.seed {
            plan.seed = v;
        }
        if let Some(v) = self.solver {
            plan.solver = v;
        }
        plan.validate().map_err(config_err)?;
        let workers = self.workers.or_else(runner::workers_from_env).unwrap_or_else(runner::default_workers);
        if workers == 0 {
            return Err(CliError::Config("--workers must be at least 1".into()));
        }

        // record everything that was resolved
        self.p = Some(plan.p.clone());
        self.n = Some(plan.n.clone());
        self.q = Some(plan.q.clone());
        self.b = Some(plan.b.clone());
        self.sigma = Some(plan.sigma);
        self.alphas = Some(plan.alphas.to_vec());
        self.lambda_grid = Some(plan.lambda_grid.clone());
        self.eta_grid = Some(plan.eta_grid.clone());
        self.methods = Some(plan.methods.clone());
        self.replications = Some(plan.replications);
        self.seed = Some(plan.seed);
        self.solver = Some(plan.solver);
        self.workers = Some(workers);
        Ok((plan, workers))
    }
}

pub fn experiment(mut a: ExperimentArgs) -> Result<Vec<PathBuf>, CliError> {
    let (plan, workers) = a.resolve()?;
    let out = a.common.out.clone();
    formats::ensure_dir(&out)?;
    let output = runner::run_parallel(&plan, workers)?;
    let written = formats::write_experiment(&out, &output)?;
    finish_run(&out, "experiment", &a, written)
}
