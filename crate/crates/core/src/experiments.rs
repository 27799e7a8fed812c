//! Replicated simulation experiments.
//!
//! A plan expands into independent jobs, one per `(cell, replication)`. Each
//! job owns its random stream, so jobs can run in any order or in parallel;
//! [`assemble`] puts results back in job order.

use alloc::format;
use alloc::string::{String, ToString};
use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::conditions::{self, Criterion};
use crate::error::{Error, Result};
use crate::metrics::{self, PathPoint};
use crate::simulate::{self, CovarianceFactors, CovarianceSpec, Dataset, SeedRecord, TruthSpec};
use crate::solvers::{sign, Method, RegressionProblem, SolverOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    CriteriaBox,
    ConditionCurves,
    Tprfpr,
}

impl ExperimentKind {
    pub fn name(self) -> &'static str {
        match self {
            ExperimentKind::CriteriaBox => "criteria_box",
            ExperimentKind::ConditionCurves => "condition_curves",
            ExperimentKind::Tprfpr => "tprfpr",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "criteria_box" | "criteria" => Some(ExperimentKind::CriteriaBox),
            "condition_curves" | "curves" => Some(ExperimentKind::ConditionCurves),
            "tprfpr" => Some(ExperimentKind::Tprfpr),
            _ => None,
        }
    }

    pub fn default_replications(self) -> usize {
        match self {
            ExperimentKind::CriteriaBox => 20,
            ExperimentKind::ConditionCurves => 10,
            ExperimentKind::Tprfpr => 20,
        }
    }
}

/// A one-dimensional parameter grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum GridSpec {
    /// `count` log-spaced points from `lo` to `hi`, both included.
    Log { lo: f64, hi: f64, count: usize },
    Explicit { values: Vec<f64> },
    /// `count` log-spaced points over `[lo_ratio, 1] * lambda_null`, where
    /// `lambda_null = 2 ||X'y||_inf` of the replication's data.
    RelativeToNull { lo_ratio: f64, count: usize },
}

impl GridSpec {
    pub fn log(lo: f64, hi: f64, count: usize) -> Self {
        GridSpec::Log { lo, hi, count }
    }

    /// Resolves the grid; `lambda_null` is needed for the relative form.
    pub fn resolve(&self, lambda_null: Option<f64>) -> Result<Vec<f64>> {
        let values = match *self {
            GridSpec::Log { lo, hi, count } => log_space(lo, hi, count)?,
            GridSpec::Explicit { ref values } => values.clone(),
            GridSpec::RelativeToNull { lo_ratio, count } => {
                let null = lambda_null.ok_or_else(|| {
                    Error::invalid("grid", "relative_to_null grids are only valid for the tprfpr lambda grid")
                })?;
                if !(lo_ratio > 0.0 && lo_ratio <= 1.0) {
                    return Err(Error::invalid("grid", "lo_ratio must be in (0, 1]"));
                }
                let mut values = log_space(lo_ratio, 1.0, count)?;
                for v in &mut values {
                    *v *= null;
                }
                values
            }
        };
        if values.is_empty() {
            return Err(Error::invalid("grid", "grid is empty"));
        }
        if values.iter().any(|v| !(v.is_finite() && *v >= 0.0)) {
            return Err(Error::invalid("grid", "values must be finite and >= 0"));
        }
        Ok(values)
    }

    fn is_relative(&self) -> bool {
        matches!(self, GridSpec::RelativeToNull { .. })
    }
}

/// `count` points log-spaced from `lo` to `hi` inclusive.
pub fn log_space(lo: f64, hi: f64, count: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0 && hi >= lo && hi.is_finite()) || count == 0 {
        return Err(Error::invalid("grid", "log grid needs 0 < lo <= hi and count >= 1"));
    }
    if count == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (libm::log10(lo), libm::log10(hi));
    let step = (b - a) / (count - 1) as f64;
    Ok((0..count)
        .map(|i| match i {
            0 => lo,
            i if i == count - 1 => hi,
            i => libm::pow(10.0, a + step * i as f64),
        })
        .collect())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentPlan {
    pub kind: ExperimentKind,
    pub p: Vec<usize>,
    pub n: Vec<usize>,
    pub q: Vec<usize>,
    /// Magnitude of the active coefficients. Condition curves do not depend
    /// on it beyond its sign and use the first entry only.
    pub b: Vec<f64>,
    /// Noise standard deviation.
    pub sigma: f64,
    pub alphas: [f64; 3],
    pub lambda_grid: GridSpec,
    pub eta_grid: GridSpec,
    /// Methods compared by the tprfpr experiment.
    #[serde(default = "default_methods")]
    pub methods: Vec<Method>,
    pub replications: usize,
    pub seed: u64,
    #[serde(default)]
    pub solver: SolverOptions,
}

fn default_methods() -> Vec<Method> {
    vec![Method::Gen, Method::En]
}

/// Named plan presets.
pub const PRESETS: [&str; 4] = ["desk", "paper-p200", "paper-p400", "paper-p600"];

impl ExperimentPlan {
    /// Desk-scale plan: one cell `p = n = 200`, `q = 5`, `b = 10`.
    pub fn desk(kind: ExperimentKind) -> Self {
        let (q, lambda_grid, eta_grid) = match kind {
            ExperimentKind::CriteriaBox => (vec![5], GridSpec::log(1e-2, 1e4, 20), GridSpec::log(1e-2, 1e4, 20)),
            ExperimentKind::ConditionCurves => {
                (vec![5, 10], GridSpec::log(1e-2, 1e4, 20), GridSpec::log(1e-2, 1e4, 41))
            }
            ExperimentKind::Tprfpr => (
                vec![5],
                GridSpec::RelativeToNull {
                    lo_ratio: 1e-3,
                    count: 30,
                },
                GridSpec::Explicit {
                    values: vec![0.01, 0.1, 1.0, 10.0, 100.0],
                },
            ),
        };
        ExperimentPlan {
            kind,
            p: vec![200],
            n: vec![200],
            q,
            b: vec![10.0],
            sigma: 1.0,
            alphas: [0.3, 0.5, 0.7],
            lambda_grid,
            eta_grid,
            methods: default_methods(),
            replications: kind.default_replications(),
            seed: 0,
            solver: SolverOptions::default(),
        }
    }

    /// `desk` or `paper-p{200,400,600}`. The `paper-p*` presets sweep
    /// `n in {100, 200, 400}` and `b in {1, 10}` for their `p`.
    pub fn preset(kind: ExperimentKind, name: &str) -> Result<Self> {
        let mut plan = Self::desk(kind);
        let p = match name {
            "desk" => return Ok(plan),
            "paper-p200" => 200,
            "paper-p400" => 400,
            "paper-p600" => 600,
            _ => return Err(Error::invalid("preset", format!("unknown preset `{name}`"))),
        };
        plan.p = vec![p];
        plan.n = vec![100, 200, 400];
        plan.b = vec![1.0, 10.0];
        plan.replications = match kind {
            ExperimentKind::CriteriaBox => 100,
            ExperimentKind::ConditionCurves => 10,
            ExperimentKind::Tprfpr => 100,
        };
        Ok(plan)
    }

    pub fn validate(&self) -> Result<()> {
        if self.p.is_empty() || self.n.is_empty() || self.q.is_empty() || self.b.is_empty() {
            return Err(Error::invalid("plan", "p, n, q and b lists must be non-empty"));
        }
        if self.replications == 0 {
            return Err(Error::invalid("replications", "need at least one replication"));
        }
        if !(self.sigma.is_finite() && self.sigma >= 0.0) {
            return Err(Error::invalid("sigma", "noise level must be finite and >= 0"));
        }
        if self.b.iter().any(|b| !(b.is_finite() && *b != 0.0)) {
            return Err(Error::invalid("b", "coefficient magnitudes must be finite and non-zero"));
        }
        if self.n.contains(&0) {
            return Err(Error::invalid("n", "need at least one observation"));
        }
        for &p in &self.p {
            for &q in &self.q {
                CovarianceSpec::new(p, q, self.alphas).validate()?;
                if q == 0 || q >= p {
                    return Err(Error::invalid("q", format!("need 1 <= q < p, got q = {q}, p = {p}")));
                }
            }
        }
        match self.kind {
            ExperimentKind::Tprfpr => {
                if self.methods.is_empty() {
                    return Err(Error::invalid("methods", "need at least one method"));
                }
                if !self.lambda_grid.is_relative() {
                    self.lambda_grid.resolve(None)?;
                }
            }
            _ => {
                self.lambda_grid.resolve(None)?;
            }
        }
        self.eta_grid.resolve(None)?;
        if self.kind == ExperimentKind::CriteriaBox && self.lambda_grid.resolve(None)?.contains(&0.0) {
            return Err(Error::invalid("lambda_grid", "criteria need lambda > 0"));
        }
        Ok(())
    }

    /// Jobs in output order: p, n, q, b, then replication.
    pub fn jobs(&self) -> Vec<Job> {
        let bs: &[f64] = match self.kind {
            ExperimentKind::ConditionCurves => &self.b[..1],
            _ => &self.b,
        };
        let mut jobs = Vec::new();
        for &p in &self.p {
            for &n in &self.n {
                for &q in &self.q {
                    for &b in bs {
                        let key = simulate::derive_key(self.seed, &[p as u64, n as u64, q as u64, b.to_bits()]);
                        for rep in 0..self.replications {
                            jobs.push(Job {
                                cell: Cell { p, n, q, b },
                                rep,
                                seed: SeedRecord::new(key, rep as u64),
                            });
                        }
                    }
                }
            }
        }
        jobs
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cell {
    pub p: usize,
    pub n: usize,
    pub q: usize,
    pub b: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Job {
    pub cell: Cell,
    pub rep: usize,
    pub seed: SeedRecord,
}

/// Covariance factors shared by all jobs of a plan.
#[derive(Debug, Clone)]
pub struct ExperimentContext {
    plan: ExperimentPlan,
    factors: Vec<((usize, usize), CovarianceFactors)>,
}

impl ExperimentContext {
    pub fn new(plan: &ExperimentPlan) -> Result<Self> {
        plan.validate()?;
        let mut factors = Vec::new();
        for &p in &plan.p {
            for &q in &plan.q {
                if !factors.iter().any(|(k, _)| *k == (p, q)) {
                    let f = CovarianceFactors::from_spec(&CovarianceSpec::new(p, q, plan.alphas))?;
                    factors.push(((p, q), f));
                }
            }
        }
        Ok(ExperimentContext {
            plan: plan.clone(),
            factors,
        })
    }

    pub fn plan(&self) -> &ExperimentPlan {
        &self.plan
    }

    fn factors(&self, cell: &Cell) -> &CovarianceFactors {
        &self
            .factors
            .iter()
            .find(|(k, _)| *k == (cell.p, cell.q))
            .expect("factors prepared for every cell")
            .1
    }

    fn dataset(&self, job: &Job) -> Result<Dataset> {
        simulate::sample_with_factors(
            self.factors(&job.cell),
            &TruthSpec::uniform(job.cell.q, job.cell.b),
            job.cell.n,
            self.plan.sigma,
            job.seed,
        )
    }

    /// Runs one replication. Failures are returned, not raised.
    pub fn run_job(&self, job: &Job) -> JobResult {
        let outcome = match self.plan.kind {
            ExperimentKind::CriteriaBox => self.criteria_job(job).map(JobOutput::Criteria),
            ExperimentKind::ConditionCurves => self.curves_job(job).map(JobOutput::Curves),
            ExperimentKind::Tprfpr => self.tprfpr_job(job).map(JobOutput::Tprfpr),
        };
        JobResult {
            job: *job,
            outcome: outcome.map_err(|e| e.to_string()),
        }
    }

    fn criteria_job(&self, job: &Job) -> Result<CriteriaRow> {
        let d = self.dataset(job)?;
        let lambdas = self.plan.lambda_grid.resolve(None)?;
        let etas = self.plan.eta_grid.resolve(None)?;
        let q = job.cell.q;
        let f = self.factors(&job.cell);
        let pm = conditions::partition_moments(&d.x, &f.sigma, q, 0.0)?;
        let beta1 = &d.beta_star[..q];
        let signs: Vec<f64> = beta1.iter().map(|&b| sign(b)).collect();
        let ic = conditions::ic_value(&pm, &signs)?;
        let eic = conditions::grid_minimum(&conditions::criterion_cells(&pm, Criterion::Eic, beta1, &lambdas, &etas)?);
        let gic = conditions::grid_minimum(&conditions::criterion_cells(&pm, Criterion::Gic, beta1, &lambdas, &etas)?);
        Ok(CriteriaRow {
            cell: job.cell,
            rep: job.rep,
            seed: job.seed,
            ic,
            eic: eic.value,
            gic: gic.value,
            eic_lambda: eic.lambda,
            eic_eta: eic.eta,
            gic_lambda: gic.lambda,
            gic_eta: gic.eta,
        })
    }

    fn curves_job(&self, job: &Job) -> Result<Vec<CurvePoint>> {
        let d = self.dataset(job)?;
        let etas = self.plan.eta_grid.resolve(None)?;
        let q = job.cell.q;
        let f = self.factors(&job.cell);
        let pm = conditions::partition_moments(&d.x, &f.sigma, q, 0.0)?;
        let rhs = conditions::eta_bound_rhs(job.cell.n, crate::linalg::lambda_max(&pm.s11)?, &d.beta_star[..q]);
        etas.iter()
            .map(|&eta| {
                let e = conditions::eigen_quantities(&pm.with_eta(eta))?;
                Ok(CurvePoint {
                    eta,
                    lmax_ha: e.lmax_ha,
                    lmax_c11inv: e.lmax_c11inv,
                    lmax_hb: e.lmax_hb,
                    eq18_rhs: rhs,
                })
            })
            .collect()
    }

    fn tprfpr_job(&self, job: &Job) -> Result<Vec<SelectionRow>> {
        let d = self.dataset(job)?;
        let f = self.factors(&job.cell);
        let mut rows = Vec::with_capacity(self.plan.methods.len());
        for &method in &self.plan.methods {
            let problem = RegressionProblem::new(&d.x, &d.y, method, Some(f))?;
            let lambdas = self.plan.lambda_grid.resolve(Some(problem.lambda_null()))?;
            let etas = match method {
                Method::Lasso => vec![0.0],
                _ => self.plan.eta_grid.resolve(None)?,
            };
            let fits = problem.solve_path(&lambdas, &etas, &self.plan.solver)?;
            let mut points = Vec::with_capacity(fits.len());
            let mut nonconverged = 0;
            for fit in &fits {
                nonconverged += usize::from(!fit.converged);
                points.push(PathPoint {
                    method,
                    lambda: fit.penalty.lambda,
                    eta: fit.penalty.eta,
                    metrics: metrics::selection_metrics(&fit.beta_hat, &d.beta_star)?,
                });
            }
            let best = metrics::best_tpr_minus_fpr(&points)
                .ok_or_else(|| Error::invalid("metrics", "TPR - FPR undefined for this support"))?;
            let (tpr, fpr) = (best.metrics.tpr.unwrap_or(0.0), best.metrics.fpr.unwrap_or(0.0));
            rows.push(SelectionRow {
                cell: job.cell,
                method,
                rep: job.rep,
                seed: job.seed,
                best_lambda: best.lambda,
                best_eta: best.eta,
                tpr,
                fpr,
                diff: tpr - fpr,
                sign_exact: best.metrics.sign_exact,
                nonconverged,
            });
        }
        Ok(rows)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct JobResult {
    pub job: Job,
    pub outcome: core::result::Result<JobOutput, String>,
}

#[derive(Debug, Clone, PartialEq)]
pub enum JobOutput {
    Criteria(CriteriaRow),
    Curves(Vec<CurvePoint>),
    Tprfpr(Vec<SelectionRow>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriteriaRow {
    pub cell: Cell,
    pub rep: usize,
    pub seed: SeedRecord,
    /// `+inf` when `C11` is singular.
    pub ic: f64,
    pub eic: f64,
    pub gic: f64,
    pub eic_lambda: f64,
    pub eic_eta: f64,
    pub gic_lambda: f64,
    pub gic_eta: f64,
}

/// Eigen quantities of one replication at one `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurvePoint {
    pub eta: f64,
    pub lmax_ha: f64,
    pub lmax_c11inv: f64,
    pub lmax_hb: f64,
    pub eq18_rhs: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SelectionRow {
    pub cell: Cell,
    pub method: Method,
    pub rep: usize,
    pub seed: SeedRecord,
    pub best_lambda: f64,
    pub best_eta: f64,
    pub tpr: f64,
    pub fpr: f64,
    pub diff: f64,
    pub sign_exact: bool,
    /// Path fits that hit the sweep limit.
    pub nonconverged: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub cell: Cell,
    pub rep: usize,
    pub seed: SeedRecord,
    pub message: String,
}

/// Five-number summary with type-7 quantiles.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoxStats {
    pub min: f64,
    pub q1: f64,
    pub median: f64,
    pub q3: f64,
    pub max: f64,
}

impl BoxStats {
    /// `None` for an empty sample. Infinite values sort last.
    pub fn from_values(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let mut v = values.to_vec();
        v.sort_by(f64::total_cmp);
        Some(BoxStats {
            min: v[0],
            q1: quantile_sorted(&v, 0.25),
            median: quantile_sorted(&v, 0.5),
            q3: quantile_sorted(&v, 0.75),
            max: v[v.len() - 1],
        })
    }
}

/// Linear-interpolation quantile of sorted data.
pub fn quantile_sorted(sorted: &[f64], prob: f64) -> f64 {
    let h = (sorted.len() - 1) as f64 * prob;
    let lo = libm::floor(h) as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let (a, b, frac) = (sorted[lo], sorted[hi], h - lo as f64);
    if frac == 0.0 || a == b {
        a
    } else {
        a + frac * (b - a)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriteriaSummary {
    pub cell: Cell,
    pub criterion: String,
    pub count: usize,
    pub stats: BoxStats,
    /// Fraction of replications with value below one.
    pub frac_below_one: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CriteriaResults {
    pub rows: Vec<CriteriaRow>,
    pub summary: Vec<CriteriaSummary>,
    pub failures: Vec<Failure>,
}

impl CriteriaResults {
    pub fn summary_for(&self, cell: &Cell, criterion: &str) -> Option<&CriteriaSummary> {
        self.summary
            .iter()
            .find(|s| s.cell == *cell && s.criterion == criterion)
    }
}

/// Replication averages at one `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CurveRow {
    pub p: usize,
    pub n: usize,
    pub q: usize,
    pub eta: f64,
    pub lmax_ha: f64,
    pub lmax_c11inv: f64,
    pub lmax_hb: f64,
    /// `eta` times the averaged `lambda_max(C11(eta)^{-1})`.
    pub eq18_lhs: f64,
    pub eq18_rhs: f64,
    pub count: usize,
}

impl CurveRow {
    pub fn eq18_holds(&self) -> bool {
        self.eq18_lhs < self.eq18_rhs
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CurvesResults {
    pub rows: Vec<CurveRow>,
    pub failures: Vec<Failure>,
}

impl CurvesResults {
    /// Etas where the averaged rewritten eta bound holds for `(p, n, q)`.
    pub fn feasible_etas(&self, p: usize, n: usize, q: usize) -> Vec<f64> {
        self.rows
            .iter()
            .filter(|r| (r.p, r.n, r.q) == (p, n, q) && r.eq18_holds())
            .map(|r| r.eta)
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SelectionSummary {
    pub cell: Cell,
    pub method: Method,
    pub count: usize,
    pub mean_tpr: f64,
    pub mean_fpr: f64,
    pub mean_diff: f64,
    pub frac_sign_exact: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TprFprResults {
    pub rows: Vec<SelectionRow>,
    pub summary: Vec<SelectionSummary>,
    pub failures: Vec<Failure>,
}

impl TprFprResults {
    pub fn summary_for(&self, cell: &Cell, method: Method) -> Option<&SelectionSummary> {
        self.summary.iter().find(|s| s.cell == *cell && s.method == method)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ExperimentOutput {
    Criteria(CriteriaResults),
    Curves(CurvesResults),
    Tprfpr(TprFprResults),
}

/// Collects job results (in any order) into tables ordered by job.
pub fn assemble(plan: &ExperimentPlan, mut results: Vec<JobResult>) -> ExperimentOutput {
    let jobs = plan.jobs();
    let position = |job: &Job| jobs.iter().position(|j| j == job).unwrap_or(usize::MAX);
    results.sort_by_key(|r| position(&r.job));

    let mut failures = Vec::new();
    let mut outputs = Vec::new();
    for r in results {
        match r.outcome {
            Ok(out) => outputs.push((r.job, out)),
            Err(message) => failures.push(Failure {
                cell: r.job.cell,
                rep: r.job.rep,
                seed: r.job.seed,
                message,
            }),
        }
    }
    let cells = distinct_cells(&jobs);

    match plan.kind {
        ExperimentKind::CriteriaBox => {
            let rows: Vec<CriteriaRow> = outputs
                .into_iter()
                .filter_map(|(_, o)| match o {
                    JobOutput::Criteria(r) => Some(r),
                    _ => None,
                })
                .collect();
            let mut summary = Vec::new();
            for cell in &cells {
                let in_cell: Vec<&CriteriaRow> = rows.iter().filter(|r| r.cell == *cell).collect();
                for (name, get) in [
                    ("ic", (|r: &CriteriaRow| r.ic) as fn(&CriteriaRow) -> f64),
                    ("eic", |r| r.eic),
                    ("gic", |r| r.gic),
                ] {
                    let values: Vec<f64> = in_cell.iter().map(|r| get(r)).collect();
                    if let Some(stats) = BoxStats::from_values(&values) {
                        summary.push(CriteriaSummary {
                            cell: *cell,
                            criterion: name.to_string(),
                            count: values.len(),
                            stats,
                            frac_below_one: values.iter().filter(|&&v| v < 1.0).count() as f64 / values.len() as f64,
                        });
                    }
                }
            }
            ExperimentOutput::Criteria(CriteriaResults { rows, summary, failures })
        }
        ExperimentKind::ConditionCurves => {
            let mut rows = Vec::new();
            for cell in &cells {
                let reps: Vec<&Vec<CurvePoint>> = outputs
                    .iter()
                    .filter(|(j, _)| j.cell == *cell)
                    .filter_map(|(_, o)| match o {
                        JobOutput::Curves(c) => Some(c),
                        _ => None,
                    })
                    .collect();
                let Some(first) = reps.first() else {
                    continue;
                };
                let count = reps.len() as f64;
                for (k, pt) in first.iter().enumerate() {
                    let mean = |f: fn(&CurvePoint) -> f64| reps.iter().map(|r| f(&r[k])).sum::<f64>() / count;
                    let lmax_c11inv = mean(|c| c.lmax_c11inv);
                    rows.push(CurveRow {
                        p: cell.p,
                        n: cell.n,
                        q: cell.q,
                        eta: pt.eta,
                        lmax_ha: mean(|c| c.lmax_ha),
                        lmax_c11inv,
                        lmax_hb: mean(|c| c.lmax_hb),
                        eq18_lhs: pt.eta * lmax_c11inv,
                        eq18_rhs: mean(|c| c.eq18_rhs),
                        count: reps.len(),
                    });
                }
            }
            ExperimentOutput::Curves(CurvesResults { rows, failures })
        }
        ExperimentKind::Tprfpr => {
            let rows: Vec<SelectionRow> = outputs
                .into_iter()
                .flat_map(|(_, o)| match o {
                    JobOutput::Tprfpr(r) => r,
                    _ => Vec::new(),
                })
                .collect();
            let mut summary = Vec::new();
            for cell in &cells {
                for &method in &plan.methods {
                    let sel: Vec<&SelectionRow> =
                        rows.iter().filter(|r| r.cell == *cell && r.method == method).collect();
                    if sel.is_empty() {
                        continue;
                    }
                    let count = sel.len() as f64;
                    let mean = |f: fn(&SelectionRow) -> f64| sel.iter().map(|r| f(r)).sum::<f64>() / count;
                    summary.push(SelectionSummary {
                        cell: *cell,
                        method,
                        count: sel.len(),
                        mean_tpr: mean(|r| r.tpr),
                        mean_fpr: mean(|r| r.fpr),
                        mean_diff: mean(|r| r.diff),
                        frac_sign_exact: mean(|r| f64::from(u8::from(r.sign_exact))),
                    });
                }
            }
            ExperimentOutput::Tprfpr(TprFprResults { rows, summary, failures })
        }
    }
}

fn distinct_cells(jobs: &[Job]) -> Vec<Cell> {
    let mut cells: Vec<Cell> = Vec::new();
    for j in jobs {
        if !cells.contains(&j.cell) {
            cells.push(j.cell);
        }
    }
    cells
}

/// Runs every job in order on the current thread.
pub fn run_experiment(plan: &ExperimentPlan) -> Result<ExperimentOutput> {
    let ctx = ExperimentContext::new(plan)?;
    let results = plan.jobs().iter().map(|j| ctx.run_job(j)).collect();
    Ok(assemble(plan, results))
}

fn expect_kind(plan: &ExperimentPlan, kind: ExperimentKind) -> Result<()> {
    if plan.kind != kind {
        return Err(Error::invalid(
            "kind",
            format!("plan is `{}`, expected `{}`", plan.kind.name(), kind.name()),
        ));
    }
    Ok(())
}

pub fn run_criteria_experiment(plan: &ExperimentPlan) -> Result<CriteriaResults> {
    expect_kind(plan, ExperimentKind::CriteriaBox)?;
    match run_experiment(plan)? {
        ExperimentOutput::Criteria(r) => Ok(r),
        _ => unreachable!("kind checked"),
    }
}

pub fn run_condition_curves(plan: &ExperimentPlan) -> Result<CurvesResults> {
    expect_kind(plan, ExperimentKind::ConditionCurves)?;
    match run_experiment(plan)? {
        ExperimentOutput::Curves(r) => Ok(r),
        _ => unreachable!("kind checked"),
    }
}

pub fn run_tprfpr_experiment(plan: &ExperimentPlan) -> Result<TprFprResults> {
    expect_kind(plan, ExperimentKind::Tprfpr)?;
    match run_experiment(plan)? {
        ExperimentOutput::Tprfpr(r) => Ok(r),
        _ => unreachable!("kind checked"),
    }
}
