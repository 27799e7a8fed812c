//! Lasso, Elastic Net and generalized Elastic Net fits.
//!
//! All three criteria reduce to an l1-penalized quadratic in the original
//! coordinates,
//!
//! ```text
//! f(beta) = ||y - X beta||^2 + eta * beta' Q beta + lambda * ||beta||_1
//! ```
//!
//! with `Q = 0` (Lasso), `Q = I` (Elastic Net) or `Q = Sigma` (gEN). For gEN
//! this is the whitened criterion `||y - X~ b~||^2 + lambda ||Sigma^{-1/2} b~||_1
//! + eta ||b~||^2` after the change of variables `b~ = Sigma^{1/2} beta`: the
//! ridge term becomes a stacked block `sqrt(eta) I` under `X~`, and in
//! original coordinates the stacked design is `[X; sqrt(eta) Sigma^{1/2}]`
//! against the response `[y; 0]`.
//!
//! The minimizer is found by cyclic coordinate descent with soft-thresholding on
//! the Gram form of the stacked design, with active-set sweeps and a step
//! towards the fixed-sign solution whenever the support settles.

use alloc::vec;
use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, Matrix, SymMatrix};
use crate::simulate::CovarianceFactors;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Lasso,
    En,
    Gen,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Lasso => "lasso",
            Method::En => "en",
            Method::Gen => "gen",
        }
    }

    pub fn parse(s: &str) -> Option<Method> {
        match s {
            "lasso" => Some(Method::Lasso),
            "en" => Some(Method::En),
            "gen" => Some(Method::Gen),
            _ => None,
        }
    }
}

impl core::fmt::Display for Method {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        f.write_str(self.name())
    }
}

/// `lambda` weighs the l1 term, `eta` the quadratic one.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltyConfig {
    pub lambda: f64,
    pub eta: f64,
}

impl PenaltyConfig {
    pub fn new(lambda: f64, eta: f64) -> Result<Self> {
        let p = PenaltyConfig { lambda, eta };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.lambda.is_finite() && self.lambda >= 0.0) {
            return Err(Error::invalid("lambda", "must be finite and >= 0"));
        }
        if !(self.eta.is_finite() && self.eta >= 0.0) {
            return Err(Error::invalid("eta", "must be finite and >= 0"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverOptions {
    pub max_sweeps: usize,
    /// Relative bound on the largest coordinate change in a full sweep.
    pub update_tol: f64,
    /// Bound on [`GenEnFit::kkt_residual`].
    pub kkt_tol: f64,
    /// Exact solve on a stable support and sign pattern.
    pub active_set_refinement: bool,
    pub record_trace: bool,
}

impl Default for SolverOptions {
    fn default() -> Self {
        SolverOptions {
            max_sweeps: 100_000,
            update_tol: 1e-8,
            kkt_tol: 1e-6,
            active_set_refinement: true,
            record_trace: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GenEnFit {
    pub method: Method,
    /// Estimate in the original coordinates.
    pub beta_hat: Vec<f64>,
    /// Estimate in whitened coordinates, `Sigma^{1/2} beta_hat` (equal to
    /// `beta_hat` for Lasso and Elastic Net).
    pub beta_tilde_hat: Vec<f64>,
    pub penalty: PenaltyConfig,
    /// Coordinate-descent sweeps performed.
    pub iterations: usize,
    pub converged: bool,
    pub objective: f64,
    /// Largest KKT violation, in subgradient units when `lambda > 0` and in
    /// raw gradient units when `lambda == 0`.
    pub kkt_residual: f64,
    /// Objective after every sweep, only with `record_trace`.
    pub trace: Vec<f64>,
}

/// Subgradient certificate `z = (2 / lambda) (X'y - (X'X + eta Q) beta_hat)`.
#[derive(Debug, Clone, PartialEq)]
pub struct KktReport {
    pub z: Vec<f64>,
    /// `max |z_j - sign(beta_j)|` over non-zero coordinates (0 when there are none).
    pub active_gap: f64,
    /// `max(0, |z_j| - 1)` over zero coordinates.
    pub inactive_gap: f64,
}

impl KktReport {
    pub fn max_gap(&self) -> f64 {
        self.active_gap.max(self.inactive_gap)
    }
}

#[inline]
pub fn soft_threshold(z: f64, gamma: f64) -> f64 {
    if z > gamma {
        z - gamma
    } else if z < -gamma {
        z + gamma
    } else {
        0.0
    }
}

/// `sign(0) = 0`.
#[inline]
pub fn sign(x: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else if x < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// A design and response with the cross products every fit reuses.
#[derive(Debug, Clone)]
pub struct RegressionProblem<'a> {
    x: &'a Matrix,
    y: &'a [f64],
    method: Method,
    factors: Option<&'a CovarianceFactors>,
    xtx: SymMatrix,
    xty: Vec<f64>,
    yty: f64,
}

impl<'a> RegressionProblem<'a> {
    /// `factors` is required for [`Method::Gen`] and ignored otherwise.
    pub fn new(
        x: &'a Matrix,
        y: &'a [f64],
        method: Method,
        factors: Option<&'a CovarianceFactors>,
    ) -> Result<Self> {
        if x.rows() != y.len() {
            return Err(Error::mismatch("response length", x.rows(), y.len()));
        }
        if x.cols() == 0 {
            return Err(Error::invalid("X", "design has no columns"));
        }
        let factors = match method {
            Method::Gen => {
                let f = factors
                    .ok_or_else(|| Error::invalid("Sigma", "gEN needs the design covariance"))?;
                if f.dim() != x.cols() {
                    return Err(Error::mismatch("Sigma dimension", x.cols(), f.dim()));
                }
                Some(f)
            }
            _ => None,
        };
        Ok(RegressionProblem {
            x,
            y,
            method,
            factors,
            xtx: x.gram(),
            xty: x.t_matvec(y)?,
            yty: linalg::dot(y, y),
        })
    }

    pub fn method(&self) -> Method {
        self.method
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }

    pub fn xty(&self) -> &[f64] {
        &self.xty
    }

    /// `2 ||X'y||_inf`: the smallest lambda with an all-zero solution.
    pub fn lambda_null(&self) -> f64 {
        2.0 * linalg::norm_inf(&self.xty)
    }

    /// Gram matrix of the stacked design for this `eta`. For gEN the block
    /// `sqrt(eta) Sigma^{1/2}` contributes `eta Sigma^{1/2} Sigma^{1/2} = eta Sigma`.
    pub fn gram(&self, eta: f64) -> SymMatrix {
        match self.method {
            Method::Lasso => self.xtx.clone(),
            Method::En => self.xtx.add_diagonal(eta),
            Method::Gen => {
                let sigma = &self.factors.expect("checked in new").sigma;
                self.xtx.axpy(eta, sigma).expect("dimensions checked in new")
            }
        }
    }

    fn effective_eta(&self, eta: f64) -> f64 {
        match self.method {
            Method::Lasso => 0.0,
            _ => eta,
        }
    }

    /// The criterion evaluated directly from `X`, `y` and the penalty.
    pub fn objective(&self, beta: &[f64], penalty: &PenaltyConfig) -> f64 {
        let fitted = self.x.matvec(beta).expect("beta has length p");
        let rss: f64 = self.y.iter().zip(&fitted).map(|(y, f)| (y - f) * (y - f)).sum();
        let eta = self.effective_eta(penalty.eta);
        let ridge = match self.method {
            Method::Lasso => 0.0,
            Method::En => linalg::dot(beta, beta),
            Method::Gen => self.factors.expect("checked in new").sigma.quad_form(beta),
        };
        rss + eta * ridge + penalty.lambda * linalg::norm1(beta)
    }

    pub fn fit(&self, penalty: PenaltyConfig, warm_start: Option<&[f64]>, opts: &SolverOptions) -> Result<GenEnFit> {
        penalty.validate()?;
        let gram = self.gram(self.effective_eta(penalty.eta));
        self.fit_with_gram(&gram, penalty, warm_start, opts)
    }

    fn fit_with_gram(
        &self,
        gram: &SymMatrix,
        penalty: PenaltyConfig,
        warm_start: Option<&[f64]>,
        opts: &SolverOptions,
    ) -> Result<GenEnFit> {
        let p = self.p();
        let start = match warm_start {
            Some(w) if w.len() != p => return Err(Error::mismatch("warm start", p, w.len())),
            Some(w) => w.to_vec(),
            None => vec![0.0; p],
        };
        let outcome = coordinate_descent(gram, &self.xty, self.yty, penalty.lambda, start, opts);
        let penalty = PenaltyConfig {
            lambda: penalty.lambda,
            eta: self.effective_eta(penalty.eta),
        };
        let beta_tilde_hat = match self.method {
            Method::Gen => self
                .factors
                .expect("checked in new")
                .sqrt
                .matvec(&outcome.beta)?,
            _ => outcome.beta.clone(),
        };
        Ok(GenEnFit {
            method: self.method,
            objective: self.objective(&outcome.beta, &penalty),
            beta_hat: outcome.beta,
            beta_tilde_hat,
            penalty,
            iterations: outcome.sweeps,
            converged: outcome.converged,
            kkt_residual: outcome.kkt_residual,
            trace: outcome.trace,
        })
    }

    /// KKT certificate of `beta` under `penalty` for this problem.
    pub fn kkt(&self, beta: &[f64], penalty: &PenaltyConfig) -> Result<KktReport> {
        if beta.len() != self.p() {
            return Err(Error::mismatch("kkt beta", self.p(), beta.len()));
        }
        let gram = self.gram(self.effective_eta(penalty.eta));
        let gradient = residual_gradient(&gram, &self.xty, beta);
        Ok(kkt_from_gradient(&gradient, beta, penalty.lambda))
    }

    /// One fit per `(eta, lambda)` cell, eta-major in grid order. Within an
    /// eta row the lambdas are solved from largest to smallest with warm starts.
    /// For Lasso every eta row repeats the same fits with `eta` recorded as 0.
    pub fn solve_path(&self, lambda_grid: &[f64], eta_grid: &[f64], opts: &SolverOptions) -> Result<Vec<GenEnFit>> {
        if lambda_grid.is_empty() || eta_grid.is_empty() {
            return Err(Error::invalid("grid", "lambda and eta grids must be non-empty"));
        }
        let mut order: Vec<usize> = (0..lambda_grid.len()).collect();
        order.sort_by(|&a, &b| {
            lambda_grid[b]
                .partial_cmp(&lambda_grid[a])
                .unwrap_or(core::cmp::Ordering::Equal)
        });

        let mut fits = Vec::with_capacity(lambda_grid.len() * eta_grid.len());
        let mut lasso_row: Option<Vec<GenEnFit>> = None;
        for &eta in eta_grid {
            if self.method == Method::Lasso {
                if let Some(row) = &lasso_row {
                    fits.extend(row.iter().cloned());
                    continue;
                }
            }
            PenaltyConfig::new(lambda_grid[0], eta)?;
            let gram = self.gram(self.effective_eta(eta));
            let mut row: Vec<Option<GenEnFit>> = vec![None; lambda_grid.len()];
            let mut warm: Option<Vec<f64>> = None;
            for &k in &order {
                let penalty = PenaltyConfig::new(lambda_grid[k], eta)?;
                let fit = self.fit_with_gram(&gram, penalty, warm.as_deref(), opts)?;
                warm = Some(fit.beta_hat.clone());
                row[k] = Some(fit);
            }
            let row: Vec<GenEnFit> = row.into_iter().map(|f| f.expect("every cell solved")).collect();
            if self.method == Method::Lasso {
                lasso_row = Some(row.clone());
            }
            fits.extend(row);
        }
        Ok(fits)
    }
}

pub fn fit_lasso(x: &Matrix, y: &[f64], lambda: f64) -> Result<GenEnFit> {
    RegressionProblem::new(x, y, Method::Lasso, None)?.fit(
        PenaltyConfig::new(lambda, 0.0)?,
        None,
        &SolverOptions::default(),
    )
}

pub fn fit_elastic_net(x: &Matrix, y: &[f64], penalty: PenaltyConfig) -> Result<GenEnFit> {
    RegressionProblem::new(x, y, Method::En, None)?.fit(penalty, None, &SolverOptions::default())
}

pub fn fit_gen_elastic_net(x: &Matrix, y: &[f64], sigma: &SymMatrix, penalty: PenaltyConfig) -> Result<GenEnFit> {
    let factors = CovarianceFactors::new(sigma.clone())?;
    RegressionProblem::new(x, y, Method::Gen, Some(&factors))?.fit(penalty, None, &SolverOptions::default())
}

/// Stationarity check `X'y - (X'X + eta Q) beta_hat = (lambda / 2) z` for a
/// fit on `(x, y)`. `sigma` is `Q` for gEN; Lasso and Elastic Net ignore it.
///
/// With `lambda == 0` the report carries the raw gradient in `z`, the active
/// gap is its largest entry on the support and the inactive gap its largest
/// entry overall.
pub fn kkt_check(fit: &GenEnFit, x: &Matrix, y: &[f64], sigma: Option<&SymMatrix>) -> Result<KktReport> {
    let p = x.cols();
    if fit.beta_hat.len() != p {
        return Err(Error::mismatch("kkt beta", p, fit.beta_hat.len()));
    }
    let xtx = x.gram();
    let gram = match fit.method {
        Method::Lasso => xtx,
        Method::En => xtx.add_diagonal(fit.penalty.eta),
        Method::Gen => {
            let s = sigma.ok_or_else(|| Error::invalid("Sigma", "gEN KKT check needs Sigma"))?;
            if s.dim() != p {
                return Err(Error::mismatch("Sigma dimension", p, s.dim()));
            }
            xtx.axpy(fit.penalty.eta, s)?
        }
    };
    let xty = x.t_matvec(y)?;
    let gradient = residual_gradient(&gram, &xty, &fit.beta_hat);
    Ok(kkt_from_gradient(&gradient, &fit.beta_hat, fit.penalty.lambda))
}

/// `c - G beta`.
fn residual_gradient(gram: &SymMatrix, xty: &[f64], beta: &[f64]) -> Vec<f64> {
    (0..xty.len())
        .map(|j| xty[j] - linalg::dot(gram.row(j), beta))
        .collect()
}

fn kkt_from_gradient(gradient: &[f64], beta: &[f64], lambda: f64) -> KktReport {
    let mut active_gap: f64 = 0.0;
    let mut inactive_gap: f64 = 0.0;
    if lambda > 0.0 {
        let z: Vec<f64> = gradient.iter().map(|g| 2.0 * g / lambda).collect();
        for (zj, bj) in z.iter().zip(beta) {
            if *bj != 0.0 {
                active_gap = active_gap.max((zj - sign(*bj)).abs());
            } else {
                inactive_gap = inactive_gap.max(zj.abs() - 1.0);
            }
        }
        KktReport {
            z,
            active_gap,
            inactive_gap,
        }
    } else {
        for (g, bj) in gradient.iter().zip(beta) {
            if *bj != 0.0 {
                active_gap = active_gap.max(g.abs());
            }
            inactive_gap = inactive_gap.max(g.abs());
        }
        KktReport {
            z: gradient.to_vec(),
            active_gap,
            inactive_gap,
        }
    }
}

struct CdOutcome {
    beta: Vec<f64>,
    sweeps: usize,
    converged: bool,
    kkt_residual: f64,
    trace: Vec<f64>,
}

/// State of one coordinate-descent run on `beta' G beta - 2 c' beta + lambda |beta|_1`.
struct Descent<'g> {
    gram: &'g SymMatrix,
    c: &'g [f64],
    yty: f64,
    half_lambda: f64,
    lambda: f64,
    beta: Vec<f64>,
    /// `c - G beta`, updated incrementally.
    gradient: Vec<f64>,
}

impl Descent<'_> {
    fn objective(&self) -> f64 {
        // y'y - 2c'b + b'Gb with b'Gb = c'b - g'b
        self.yty - linalg::dot(self.c, &self.beta) - linalg::dot(&self.gradient, &self.beta)
            + self.lambda * linalg::norm1(&self.beta)
    }

    fn update(&mut self, j: usize) -> f64 {
        let gjj = self.gram[(j, j)];
        let old = self.beta[j];
        let new = if gjj > 0.0 {
            soft_threshold(self.gradient[j] + gjj * old, self.half_lambda) / gjj
        } else {
            0.0
        };
        let delta = new - old;
        if delta != 0.0 {
            self.beta[j] = new;
            for (g, gk) in self.gradient.iter_mut().zip(self.gram.row(j)) {
                *g -= delta * gk;
            }
        }
        delta.abs()
    }

    fn sweep(&mut self, coords: &[usize]) -> f64 {
        coords.iter().fold(0.0, |m, &j| f64::max(m, self.update(j)))
    }

    fn refresh_gradient(&mut self) {
        self.gradient = residual_gradient(self.gram, self.c, &self.beta);
    }

    fn kkt_residual(&self) -> f64 {
        kkt_from_gradient(&self.gradient, &self.beta, self.lambda).max_gap()
    }

    fn support(&self) -> Vec<usize> {
        (0..self.beta.len()).filter(|&j| self.beta[j] != 0.0).collect()
    }

    fn signs_of(&self, support: &[usize]) -> Vec<f64> {
        support.iter().map(|&j| sign(self.beta[j])).collect()
    }

    /// Moves towards the minimiser of the quadratic on the current support
    /// with signs held fixed, stopping where the first coordinate reaches zero.
    /// The move is kept only if the objective does not increase.
    fn refine(&mut self, support: &[usize]) -> bool {
        if support.is_empty() {
            return false;
        }
        let signs = self.signs_of(support);
        let k = support.len();
        let sub = Matrix::from_fn(k, k, |a, b| self.gram[(support[a], support[b])]);
        let Some(l) = linalg::cholesky(&sub) else {
            return false;
        };
        let mut target: Vec<f64> = support
            .iter()
            .zip(&signs)
            .map(|(&j, s)| self.c[j] - self.half_lambda * s)
            .collect();
        linalg::cholesky_solve(&l, &mut target);
        // largest step keeping every sign; the blocking coordinate lands on zero
        let mut step = 1.0f64;
        let mut blocking = None;
        for (a, (&j, t)) in support.iter().zip(&target).enumerate() {
            if sign(*t) != signs[a] {
                let b = self.beta[j];
                let s = b / (b - t);
                if s < step {
                    step = s;
                    blocking = Some(j);
                }
            }
        }
        if step <= 0.0 {
            return false;
        }
        let before = self.objective();
        let saved_beta = self.beta.clone();
        let saved_gradient = self.gradient.clone();
        for (&j, t) in support.iter().zip(&target) {
            let b = self.beta[j];
            self.beta[j] = b + step * (t - b);
        }
        if let Some(j) = blocking {
            self.beta[j] = 0.0;
        }
        self.refresh_gradient();
        if self.objective() <= before {
            true
        } else {
            self.beta = saved_beta;
            self.gradient = saved_gradient;
            false
        }
    }
}

fn coordinate_descent(
    gram: &SymMatrix,
    c: &[f64],
    yty: f64,
    lambda: f64,
    start: Vec<f64>,
    opts: &SolverOptions,
) -> CdOutcome {
    let p = c.len();
    let mut state = Descent {
        gram,
        c,
        yty,
        half_lambda: 0.5 * lambda,
        lambda,
        gradient: residual_gradient(gram, c, &start),
        beta: start,
    };
    let all: Vec<usize> = (0..p).collect();
    let mut trace = Vec::new();
    let mut sweeps = 0;
    let mut converged = false;
    let mut kkt_residual = f64::INFINITY;
    let tol = |beta: &[f64]| opts.update_tol * (1.0 + linalg::norm_inf(beta));

    'outer: while sweeps < opts.max_sweeps {
        let delta = state.sweep(&all);
        sweeps += 1;
        if opts.record_trace {
            trace.push(state.objective());
        }
        if delta <= tol(&state.beta) {
            state.refresh_gradient();
            kkt_residual = state.kkt_residual();
            if kkt_residual <= opts.kkt_tol {
                converged = true;
                break;
            }
            continue;
        }

        // settle the current support before the next full sweep
        let mut last_pattern: Option<(Vec<usize>, Vec<f64>)> = None;
        let mut rejected: Option<(Vec<usize>, Vec<f64>)> = None;
        while sweeps < opts.max_sweeps {
            let support = state.support();
            let delta = state.sweep(&support);
            sweeps += 1;
            if opts.record_trace {
                trace.push(state.objective());
            }
            if delta <= tol(&state.beta) {
                break;
            }
            let support = state.support();
            let pattern = (support.clone(), state.signs_of(&support));
            if opts.active_set_refinement
                && last_pattern.as_ref() == Some(&pattern)
                && rejected.as_ref() != Some(&pattern)
            {
                if state.refine(&support) {
                    if opts.record_trace {
                        trace.push(state.objective());
                    }
                    continue 'outer;
                }
                rejected = Some(pattern.clone());
            }
            last_pattern = Some(pattern);
        }
    }

    if !converged {
        state.refresh_gradient();
        kkt_residual = state.kkt_residual();
    }
    CdOutcome {
        beta: state.beta,
        sweeps,
        converged,
        kkt_residual,
        trace,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{sample_dataset, CovarianceSpec, SeedRecord, TruthSpec};

    fn small(seed: u64, n: usize, p: usize) -> crate::simulate::Dataset {
        let spec = CovarianceSpec::new(p, 2.min(p), [0.3, 0.5, 0.7]);
        sample_dataset(&spec, &TruthSpec::uniform(2.min(p), 2.0), n, 1.0, SeedRecord::new(seed, 0)).unwrap()
    }

    #[test]
    fn soft_threshold_cases() {
        assert_eq!(soft_threshold(5.0, 2.0), 3.0);
        assert_eq!(soft_threshold(-5.0, 2.0), -3.0);
        assert_eq!(soft_threshold(1.0, 2.0), 0.0);
        assert_eq!(sign(0.0), 0.0);
        assert_eq!(sign(-3.0), -1.0);
    }

    #[test]
    fn penalty_validation() {
        assert!(PenaltyConfig::new(-1.0, 0.0).is_err());
        assert!(PenaltyConfig::new(1.0, f64::NAN).is_err());
        assert!(PenaltyConfig::new(0.0, 0.0).is_ok());
    }

    #[test]
    fn null_solution_above_lambda_null() {
        let d = small(1, 30, 6);
        let problem = RegressionProblem::new(&d.x, &d.y, Method::Lasso, None).unwrap();
        let lam = problem.lambda_null();
        let fit = problem
            .fit(PenaltyConfig::new(lam, 0.0).unwrap(), None, &SolverOptions::default())
            .unwrap();
        assert!(fit.beta_hat.iter().all(|&b| b == 0.0));
        assert!(fit.converged);
        let kkt = kkt_check(&fit, &d.x, &d.y, None).unwrap();
        assert_eq!(kkt.active_gap, 0.0);
        assert!(kkt.inactive_gap <= 1e-12);
        // just below the threshold something enters
        let fit = problem
            .fit(PenaltyConfig::new(0.99 * lam, 0.0).unwrap(), None, &SolverOptions::default())
            .unwrap();
        assert!(fit.beta_hat.iter().any(|&b| b != 0.0));
    }

    #[test]
    fn lasso_ignores_eta() {
        let d = small(2, 20, 4);
        let problem = RegressionProblem::new(&d.x, &d.y, Method::Lasso, None).unwrap();
        let fit = problem
            .fit(PenaltyConfig::new(1.0, 5.0).unwrap(), None, &SolverOptions::default())
            .unwrap();
        assert_eq!(fit.penalty.eta, 0.0);
    }

    #[test]
    fn gen_requires_sigma() {
        let d = small(3, 20, 4);
        assert!(RegressionProblem::new(&d.x, &d.y, Method::Gen, None).is_err());
        let f = CovarianceFactors::new(SymMatrix::identity(3)).unwrap();
        assert!(RegressionProblem::new(&d.x, &d.y, Method::Gen, Some(&f)).is_err());
        assert!(RegressionProblem::new(&d.x, &d.y[..5], Method::En, None).is_err());
    }

    #[test]
    fn two_variable_closed_form() {
        // orthogonal design: X'X = diag(4, 9); minimizer is per-coordinate soft-thresholding
        let x = Matrix::from_rows(&[&[2.0, 0.0], &[0.0, 3.0]]).unwrap();
        let y = [4.0, -1.5];
        let lambda = 2.0;
        let fit = fit_lasso(&x, &y, lambda).unwrap();
        // c = (8, -4.5); beta_j = S(c_j, 1) / G_jj
        assert!((fit.beta_hat[0] - 7.0 / 4.0).abs() < 1e-15);
        assert!((fit.beta_hat[1] + 3.5 / 9.0).abs() < 1e-15);
        let kkt = kkt_check(&fit, &x, &y, None).unwrap();
        assert!(kkt.max_gap() <= 1e-8);
    }

    #[test]
    fn perturbation_is_detected() {
        let d = small(4, 40, 5);
        let fit = fit_elastic_net(&d.x, &d.y, PenaltyConfig::new(5.0, 1.0).unwrap()).unwrap();
        assert!(fit.converged);
        let j = fit.beta_hat.iter().position(|&b| b != 0.0).unwrap();
        let mut bad = fit.clone();
        bad.beta_hat[j] += 0.1;
        let kkt = kkt_check(&bad, &d.x, &d.y, None).unwrap();
        assert!(kkt.active_gap > 0.01, "gap {}", kkt.active_gap);
    }

    #[test]
    fn trace_is_non_increasing() {
        let d = small(5, 25, 12);
        let f = CovarianceFactors::from_spec(&CovarianceSpec::new(12, 2, [0.3, 0.5, 0.7])).unwrap();
        let problem = RegressionProblem::new(&d.x, &d.y, Method::Gen, Some(&f)).unwrap();
        let opts = SolverOptions {
            record_trace: true,
            ..SolverOptions::default()
        };
        let fit = problem.fit(PenaltyConfig::new(0.5, 0.2).unwrap(), None, &opts).unwrap();
        assert!(fit.converged);
        assert!(!fit.trace.is_empty());
        for w in fit.trace.windows(2) {
            assert!(w[1] <= w[0] + 1e-12 * (1.0 + w[0].abs()), "{} -> {}", w[0], w[1]);
        }
    }

    #[test]
    fn max_sweeps_reports_non_convergence() {
        let d = small(6, 30, 8);
        let problem = RegressionProblem::new(&d.x, &d.y, Method::En, None).unwrap();
        let opts = SolverOptions {
            max_sweeps: 1,
            active_set_refinement: false,
            ..SolverOptions::default()
        };
        let fit = problem.fit(PenaltyConfig::new(0.1, 0.1).unwrap(), None, &opts).unwrap();
        assert!(!fit.converged);
        assert_eq!(fit.iterations, 1);
    }

    #[test]
    fn path_single_cell_matches_direct_fit() {
        let d = small(7, 30, 6);
        let problem = RegressionProblem::new(&d.x, &d.y, Method::En, None).unwrap();
        let opts = SolverOptions::default();
        let path = problem.solve_path(&[3.0], &[0.5], &opts).unwrap();
        let direct = problem.fit(PenaltyConfig::new(3.0, 0.5).unwrap(), None, &opts).unwrap();
        assert_eq!(path.len(), 1);
        assert_eq!(path[0], direct);
        assert!(problem.solve_path(&[], &[1.0], &opts).is_err());
    }
}
