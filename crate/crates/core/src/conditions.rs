//! Irrepresentable-type conditions and sign-consistency diagnostics.
//!
//! Everything is computed per realization of the design. With
//! `C = n^{-1} X'X` split into active (first `q`) and non-active blocks, and
//! the curly blocks
//!
//! ```text
//! C11(eta) = C11 + (eta / n) Sigma11
//! C21(eta) = C21 + (eta / n) Sigma21
//! ```
//!
//! the three criteria are
//!
//! ```text
//! IC  = max_j | C21 C11^{-1} s |_j
//! EIC = min_{lambda, eta} max_j | C21 (C11 + eta/n I)^{-1} (s + 2 eta/lambda b1) |_j
//! GIC = min_{lambda, eta} max_j | C21(eta) C11(eta)^{-1} (s + 2 eta/lambda b1) - 2 eta/lambda Sigma21 b1 |_j
//! ```
//!
//! where `b1` are the active true coefficients and `s = sign(b1)`.

use alloc::vec::Vec;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenDecomposition, Matrix, SymMatrix};
use crate::simulate::Dataset;
use crate::solvers::{sign, PenaltyConfig};

/// Blocks of the empirical and population covariances split at `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct PartitionedMoments {
    pub n: usize,
    pub p: usize,
    pub q: usize,
    pub eta: f64,
    pub c11: SymMatrix,
    pub c12: Matrix,
    pub c21: Matrix,
    pub c22: SymMatrix,
    pub s11: SymMatrix,
    pub s12: Matrix,
    pub s21: Matrix,
    pub s22: SymMatrix,
    /// `C11 + (eta / n) Sigma11`
    pub curly11: SymMatrix,
    /// `C21 + (eta / n) Sigma21`
    pub curly21: Matrix,
}

pub fn partition_moments(x: &Matrix, sigma: &SymMatrix, q: usize, eta: f64) -> Result<PartitionedMoments> {
    let (n, p) = (x.rows(), x.cols());
    if sigma.dim() != p {
        return Err(Error::mismatch("Sigma dimension", p, sigma.dim()));
    }
    if q == 0 || q >= p {
        return Err(Error::invalid("q", "need 1 <= q < p"));
    }
    if n == 0 {
        return Err(Error::invalid("n", "design has no rows"));
    }
    if !(eta.is_finite() && eta >= 0.0) {
        return Err(Error::invalid("eta", "must be finite and >= 0"));
    }
    let c = x.gram().scale(1.0 / n as f64);
    let c21 = c.block(q..p, 0..q);
    let s21 = sigma.block(q..p, 0..q);
    let mut pm = PartitionedMoments {
        n,
        p,
        q,
        eta: 0.0,
        c11: c.principal_block(0..q),
        c12: c21.transpose(),
        c22: c.principal_block(q..p),
        s11: sigma.principal_block(0..q),
        s12: s21.transpose(),
        s22: sigma.principal_block(q..p),
        curly11: c.principal_block(0..q),
        curly21: c21.clone(),
        c21,
        s21,
    };
    pm.set_eta(eta);
    Ok(pm)
}

impl PartitionedMoments {
    fn set_eta(&mut self, eta: f64) {
        let t = eta / self.n as f64;
        self.eta = eta;
        self.curly11 = self.c11.axpy(t, &self.s11).expect("same block shape");
        self.curly21 = self.c21.axpy(t, &self.s21).expect("same block shape");
    }

    /// Same moments with the curly blocks recomputed for another `eta`.
    pub fn with_eta(&self, eta: f64) -> PartitionedMoments {
        let mut pm = self.clone();
        pm.set_eta(eta);
        pm
    }
}

/// `max_j |(C21 C11^{-1} s)_j|`; `+inf` when `C11` is below the eigenvalue floor.
pub fn ic_value(pm: &PartitionedMoments, sign_beta1: &[f64]) -> Result<f64> {
    if sign_beta1.len() != pm.q {
        return Err(Error::mismatch("sign vector", pm.q, sign_beta1.len()));
    }
    let eig = linalg::eigen_sym(&pm.c11)?;
    let Some(w) = solve_columns(&eig, &[sign_beta1])? else {
        return Ok(f64::INFINITY);
    };
    let v = pm.c21.matvec(&w[0])?;
    Ok(linalg::norm_inf(&v))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Criterion {
    Eic,
    Gic,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridValue {
    pub lambda: f64,
    pub eta: f64,
    pub value: f64,
}

/// Smallest grid value and where it is attained (first in grid order on ties).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CriterionMin {
    pub value: f64,
    pub lambda: f64,
    pub eta: f64,
}

/// Criterion value at every `(eta, lambda)` cell, eta-major. The curly blocks
/// are rebuilt per `eta` from the plain blocks of `pm`; its own `eta` is unused.
pub fn criterion_cells(
    pm: &PartitionedMoments,
    criterion: Criterion,
    beta1_star: &[f64],
    lambda_grid: &[f64],
    eta_grid: &[f64],
) -> Result<Vec<GridValue>> {
    if beta1_star.len() != pm.q {
        return Err(Error::mismatch("active coefficients", pm.q, beta1_star.len()));
    }
    if lambda_grid.is_empty() || eta_grid.is_empty() {
        return Err(Error::invalid("grid", "lambda and eta grids must be non-empty"));
    }
    if lambda_grid.iter().any(|&l| !(l.is_finite() && l > 0.0)) {
        return Err(Error::invalid("lambda_grid", "values must be finite and > 0"));
    }
    if eta_grid.iter().any(|&e| !(e.is_finite() && e >= 0.0)) {
        return Err(Error::invalid("eta_grid", "values must be finite and >= 0"));
    }
    let signs: Vec<f64> = beta1_star.iter().map(|&b| sign(b)).collect();
    let offset = match criterion {
        Criterion::Eic => None,
        Criterion::Gic => Some(pm.s21.matvec(beta1_star)?),
    };

    let mut cells = Vec::with_capacity(lambda_grid.len() * eta_grid.len());
    for &eta in eta_grid {
        let t = eta / pm.n as f64;
        let (m, left) = match criterion {
            Criterion::Eic => (pm.c11.add_diagonal(t), pm.c21.clone()),
            Criterion::Gic => (pm.c11.axpy(t, &pm.s11)?, pm.c21.axpy(t, &pm.s21)?),
        };
        let eig = linalg::eigen_sym(&m)?;
        let Some(w) = solve_columns(&eig, &[&signs, beta1_star])? else {
            cells.extend(lambda_grid.iter().map(|&lambda| GridValue {
                lambda,
                eta,
                value: f64::INFINITY,
            }));
            continue;
        };
        let a = left.matvec(&w[0])?;
        let mut b = left.matvec(&w[1])?;
        if let Some(o) = &offset {
            for (bj, oj) in b.iter_mut().zip(o) {
                *bj -= oj;
            }
        }
        for &lambda in lambda_grid {
            let k = if eta == 0.0 { 0.0 } else { 2.0 * eta / lambda };
            let value = a
                .iter()
                .zip(&b)
                .fold(0.0, |acc: f64, (aj, bj)| acc.max((aj + k * bj).abs()));
            cells.push(GridValue { lambda, eta, value });
        }
    }
    Ok(cells)
}

pub fn grid_minimum(cells: &[GridValue]) -> CriterionMin {
    let mut best = CriterionMin {
        value: f64::INFINITY,
        lambda: cells.first().map_or(f64::NAN, |c| c.lambda),
        eta: cells.first().map_or(f64::NAN, |c| c.eta),
    };
    for c in cells {
        if c.value < best.value {
            best = CriterionMin {
                value: c.value,
                lambda: c.lambda,
                eta: c.eta,
            };
        }
    }
    best
}

pub fn eic_value(pm: &PartitionedMoments, beta1_star: &[f64], lambda_grid: &[f64], eta_grid: &[f64]) -> Result<CriterionMin> {
    let cells = criterion_cells(pm, Criterion::Eic, beta1_star, lambda_grid, eta_grid)?;
    Ok(grid_minimum(&cells))
}

pub fn gic_value(pm: &PartitionedMoments, beta1_star: &[f64], lambda_grid: &[f64], eta_grid: &[f64]) -> Result<CriterionMin> {
    let cells = criterion_cells(pm, Criterion::Gic, beta1_star, lambda_grid, eta_grid)?;
    Ok(grid_minimum(&cells))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionReport {
    /// `None` when `C11` is singular (the value is then `+inf`).
    pub ic_value: Option<f64>,
    pub ic_singular: bool,
    pub eic_value: f64,
    pub eic_lambda: f64,
    pub eic_eta: f64,
    pub gic_value: f64,
    pub gic_lambda: f64,
    pub gic_eta: f64,
    pub ic_holds: bool,
    pub eic_holds: bool,
    pub gic_holds: bool,
    pub lambda_grid: Vec<f64>,
    pub eta_grid: Vec<f64>,
}

impl ConditionReport {
    pub fn ic(&self) -> f64 {
        self.ic_value.unwrap_or(f64::INFINITY)
    }
}

/// IC, EIC and GIC for one design; `q` leading coefficients of `beta_star` are active.
pub fn condition_report(
    x: &Matrix,
    sigma: &SymMatrix,
    beta_star: &[f64],
    q: usize,
    lambda_grid: &[f64],
    eta_grid: &[f64],
) -> Result<ConditionReport> {
    let pm = partition_moments(x, sigma, q, 0.0)?;
    if beta_star.len() != pm.p {
        return Err(Error::mismatch("beta_star", pm.p, beta_star.len()));
    }
    let beta1 = &beta_star[..q];
    let signs: Vec<f64> = beta1.iter().map(|&b| sign(b)).collect();
    let ic = ic_value(&pm, &signs)?;
    let eic = eic_value(&pm, beta1, lambda_grid, eta_grid)?;
    let gic = gic_value(&pm, beta1, lambda_grid, eta_grid)?;
    Ok(ConditionReport {
        ic_value: ic.is_finite().then_some(ic),
        ic_singular: !ic.is_finite(),
        eic_value: eic.value,
        eic_lambda: eic.lambda,
        eic_eta: eic.eta,
        gic_value: gic.value,
        gic_lambda: gic.lambda,
        gic_eta: gic.eta,
        ic_holds: ic < 1.0,
        eic_holds: eic.value < 1.0,
        gic_holds: gic.value < 1.0,
        lambda_grid: lambda_grid.to_vec(),
        eta_grid: eta_grid.to_vec(),
    })
}

/// The three largest-eigenvalue quantities at one `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EigenQuantities {
    /// `lambda_max(H_A H_A')`, `H_A = n^{-1/2} C11(eta)^{-1} X1'`.
    pub lmax_ha: f64,
    /// `lambda_max(C11(eta)^{-1})`.
    pub lmax_c11inv: f64,
    /// `lambda_max(H_B H_B')`, `H_B = n^{-1/2} (C21(eta) C11(eta)^{-1} X1' - X2')`.
    pub lmax_hb: f64,
}

pub fn eigen_quantities(pm: &PartitionedMoments) -> Result<EigenQuantities> {
    let eig = linalg::eigen_sym(&pm.curly11)?;
    let floor = eig.floor();
    if eig.lambda_min() <= floor {
        return Err(Error::NearSingular {
            eigenvalue: eig.lambda_min(),
            floor,
        });
    }
    let inv = eig.reconstruct_with(|d| 1.0 / d);
    // H_A H_A' = C11(eta)^{-1} C11 C11(eta)^{-1}
    let ha = SymMatrix::new(inv.matmul(&pm.c11)?.matmul(&inv)?)?;
    // H_B H_B' = K C11 K' - K C12 - C21 K' + C22 with K = C21(eta) C11(eta)^{-1}
    let k = pm.curly21.matmul(&inv)?;
    let k_c11_kt = k.matmul(&pm.c11)?.matmul(&k.transpose())?;
    let k_c12 = k.matmul(&pm.c12)?;
    let hb = k_c11_kt
        .sub(&k_c12)?
        .sub(&k_c12.transpose())?
        .add(pm.c22.as_matrix())?;
    Ok(EigenQuantities {
        lmax_ha: linalg::lambda_max(&ha)?,
        lmax_c11inv: 1.0 / eig.lambda_min(),
        lmax_hb: linalg::lambda_max(&SymMatrix::new(hb)?)?,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Inequality {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
}

impl Inequality {
    fn less(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            holds: lhs < rhs,
        }
    }

    fn at_least(lhs: f64, rhs: f64) -> Self {
        Inequality {
            lhs,
            rhs,
            holds: lhs >= rhs,
        }
    }
}

/// Bounds `M1`, `M2`, `M3` on the three eigen quantities.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MEstimates {
    pub m1: f64,
    pub m2: f64,
    pub m3: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TheoremQuantities {
    pub n: usize,
    pub q: usize,
    pub lambda: f64,
    pub eta: f64,
    pub noise_sigma: f64,
    pub alpha: f64,
    pub eigen: EigenQuantities,
    /// Constants the inequalities were checked with.
    pub m: MEstimates,
    pub beta_min: f64,
    pub beta1_norm: f64,
    pub lmax_sigma11: f64,
    /// `M1 < beta_min^2 / (9 sigma^2)`
    pub m1_bound: Inequality,
    /// `sqrt(2 + sqrt 2) sqrt(M3) sigma / alpha < beta_min / (3 M2 sqrt q)`
    pub m3_bound: Inequality,
    /// `lambda / n < 2 beta_min / (3 M2 sqrt q)`
    pub lambda_upper: Inequality,
    /// `lambda / n >= 2 sqrt(2 + sqrt 2) sqrt(M3) sigma / alpha`
    pub lambda_lower: Inequality,
    /// `eta M2 < n / (3 lambda_max(Sigma11)) * beta_min / ||beta1||_2`
    pub eta_bound: Inequality,
}

impl TheoremQuantities {
    pub fn all_hold(&self) -> bool {
        [
            self.m1_bound,
            self.m3_bound,
            self.lambda_upper,
            self.lambda_lower,
            self.eta_bound,
        ]
        .iter()
        .all(|i| i.holds)
    }
}

/// Right-hand side of the rewritten eta bound, `n / (3 lambda_max(Sigma11)) * beta_min / ||beta1||`.
pub fn eta_bound_rhs(n: usize, lmax_sigma11: f64, beta1: &[f64]) -> f64 {
    let beta_min = beta1.iter().fold(f64::INFINITY, |m, b| m.min(b.abs()));
    n as f64 / (3.0 * lmax_sigma11) * beta_min / linalg::norm2(beta1)
}

/// Eigen quantities and the five finite-sample inequality checks. `m` defaults
/// to the empirical eigen quantities themselves.
pub fn theorem_quantities(
    x: &Matrix,
    sigma: &SymMatrix,
    beta_star: &[f64],
    penalty: PenaltyConfig,
    noise_sigma: f64,
    m: Option<MEstimates>,
    alpha: f64,
) -> Result<TheoremQuantities> {
    penalty.validate()?;
    let q = leading_support(beta_star)?;
    if !(alpha > 0.0) {
        return Err(Error::invalid("alpha", "margin must be > 0"));
    }
    if !(noise_sigma >= 0.0) {
        return Err(Error::invalid("sigma", "noise level must be >= 0"));
    }
    let pm = partition_moments(x, sigma, q, penalty.eta)?;
    let eigen = eigen_quantities(&pm)?;
    let m = m.unwrap_or(MEstimates {
        m1: eigen.lmax_ha,
        m2: eigen.lmax_c11inv,
        m3: eigen.lmax_hb,
    });
    let beta1 = &beta_star[..q];
    let beta_min = beta1.iter().fold(f64::INFINITY, |acc, b| acc.min(b.abs()));
    let beta1_norm = linalg::norm2(beta1);
    let lmax_sigma11 = linalg::lambda_max(&pm.s11)?;
    let n = pm.n as f64;
    let root_q = libm::sqrt(q as f64);
    let c = libm::sqrt(2.0 + core::f64::consts::SQRT_2);
    let noise_term = c * libm::sqrt(m.m3) * noise_sigma / alpha;
    let signal_term = beta_min / (3.0 * m.m2 * root_q);

    Ok(TheoremQuantities {
        n: pm.n,
        q,
        lambda: penalty.lambda,
        eta: penalty.eta,
        noise_sigma,
        alpha,
        eigen,
        m,
        beta_min,
        beta1_norm,
        lmax_sigma11,
        m1_bound: Inequality::less(m.m1, beta_min * beta_min / (9.0 * noise_sigma * noise_sigma)),
        m3_bound: Inequality::less(noise_term, signal_term),
        lambda_upper: Inequality::less(penalty.lambda / n, 2.0 * signal_term),
        lambda_lower: Inequality::at_least(penalty.lambda / n, 2.0 * noise_term),
        eta_bound: Inequality::less(penalty.eta * m.m2, eta_bound_rhs(pm.n, lmax_sigma11, beta1)),
    })
}

/// Number of leading non-zero coefficients; the rest must be zero.
fn leading_support(beta_star: &[f64]) -> Result<usize> {
    let q = beta_star.iter().take_while(|&&b| b != 0.0).count();
    if beta_star[q..].iter().any(|&b| b != 0.0) {
        return Err(Error::invalid(
            "beta_star",
            "non-zero coefficients must occupy the leading positions",
        ));
    }
    if q == 0 {
        return Err(Error::invalid("beta_star", "need at least one active coefficient"));
    }
    Ok(q)
}

/// Finite-sample events whose joint occurrence forces `sign(beta_hat) = sign(beta*)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LemmaEventReport {
    pub an_holds: bool,
    pub bn_holds: bool,
    /// `n^{-1/2} X1' eps`
    pub wn1: Vec<f64>,
    /// `n^{-1/2} X2' eps`
    pub wn2: Vec<f64>,
    /// Right minus left side of the strict active-coordinate inequality.
    pub margin_a: Vec<f64>,
    /// Right minus left side of the non-active bound.
    pub margin_b: Vec<f64>,
}

/// Evaluates the two events on a simulated dataset (which carries its noise).
pub fn lemma_events(dataset: &Dataset, sigma: &SymMatrix, penalty: PenaltyConfig) -> Result<LemmaEventReport> {
    penalty.validate()?;
    let q = leading_support(&dataset.beta_star)?;
    let pm = partition_moments(&dataset.x, sigma, q, penalty.eta)?;
    let n = pm.n as f64;
    let root_n = libm::sqrt(n);
    let (lambda, eta) = (penalty.lambda, penalty.eta);

    let w = dataset.x.t_matvec(&dataset.epsilon)?;
    let wn: Vec<f64> = w.iter().map(|v| v / root_n).collect();
    let (wn1, wn2) = (wn[..q].to_vec(), wn[q..].to_vec());

    let beta1 = &dataset.beta_star[..q];
    let signs: Vec<f64> = beta1.iter().map(|&b| sign(b)).collect();
    let s11_beta1 = pm.s11.matvec(beta1)?;
    let s21_beta1 = pm.s21.matvec(beta1)?;

    let eig = linalg::eigen_sym(&pm.curly11)?;
    let solved = solve_columns(&eig, &[&wn1, &signs, &s11_beta1])?.ok_or(Error::NearSingular {
        eigenvalue: eig.lambda_min(),
        floor: eig.floor(),
    })?;
    let (zeta, inv_s, inv_sb) = (&solved[0], &solved[1], &solved[2]);

    let margin_a: Vec<f64> = (0..q)
        .map(|j| {
            let bound = root_n
                * (beta1[j].abs() - lambda / (2.0 * n) * inv_s[j].abs() - eta / n * inv_sb[j].abs());
            bound - zeta[j].abs()
        })
        .collect();

    let c21_zeta = pm.curly21.matvec(zeta)?;
    let c21_inv_s = pm.curly21.matvec(inv_s)?;
    let c21_inv_sb = pm.curly21.matvec(inv_sb)?;
    let half = lambda / (2.0 * root_n);
    let margin_b: Vec<f64> = (0..pm.p - q)
        .map(|j| {
            let lhs = (c21_zeta[j] - wn2[j]).abs();
            // (lambda / 2 sqrt n) |C21 C11^{-1} (s + 2 eta/lambda Sigma11 b1) - 2 eta/lambda Sigma21 b1|
            let shift = half * c21_inv_s[j] + eta / root_n * (c21_inv_sb[j] - s21_beta1[j]);
            (half - shift.abs()) - lhs
        })
        .collect();

    Ok(LemmaEventReport {
        an_holds: margin_a.iter().all(|&m| m > 0.0),
        bn_holds: margin_b.iter().all(|&m| m >= 0.0),
        wn1,
        wn2,
        margin_a,
        margin_b,
    })
}

/// Solves against each right-hand side; `None` below the eigenvalue floor.
fn solve_columns(eig: &EigenDecomposition, rhs: &[&[f64]]) -> Result<Option<Vec<Vec<f64>>>> {
    let n = eig.eigenvalues.len();
    let b = Matrix::from_fn(n, rhs.len(), |i, k| rhs[k][i]);
    match linalg::solve_with(eig, &b) {
        Ok(sol) => Ok(Some((0..rhs.len()).map(|k| sol.column(k)).collect())),
        Err(Error::NearSingular { .. }) => Ok(None),
        Err(e) => Err(e),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::simulate::{build_covariance, sample_dataset, CovarianceSpec, SeedRecord, TruthSpec};

    fn orthogonal_design(n: usize, p: usize) -> Matrix {
        // columns are scaled indicator blocks: X'X = n I
        let rows_per = n / p;
        Matrix::from_fn(n, p, |i, j| {
            if i / rows_per == j {
                libm::sqrt(p as f64)
            } else {
                0.0
            }
        })
    }

    #[test]
    fn orthogonal_blocks() {
        let x = orthogonal_design(12, 4);
        let pm = partition_moments(&x, &SymMatrix::identity(4), 2, 0.0).unwrap();
        assert!(pm.c11.relative_distance(&Matrix::identity(2)) < 1e-15);
        assert_eq!(pm.c21.max_abs(), 0.0);
        assert_eq!(pm.curly11, pm.c11);
        assert_eq!(&pm.curly21, &pm.c21);
        assert_eq!(pm.c12, pm.c21.transpose());
        assert_eq!(ic_value(&pm, &[1.0, -1.0]).unwrap(), 0.0);
        assert!(partition_moments(&x, &SymMatrix::identity(4), 4, 0.0).is_err());
        assert!(partition_moments(&x, &SymMatrix::identity(3), 1, 0.0).is_err());
    }

    #[test]
    fn scalar_ic() {
        // q = 1, p = 2, C11 = [1], C21 = [c]
        let c: f64 = 0.4;
        let a = libm::sqrt(1.0 - c * c);
        let x = Matrix::from_rows(&[&[1.0, c + a], &[1.0, c - a]]).unwrap();
        let pm = partition_moments(&x, &SymMatrix::identity(2), 1, 0.0).unwrap();
        assert!((pm.c11[(0, 0)] - 1.0).abs() < 1e-15);
        assert!((ic_value(&pm, &[1.0]).unwrap() - c).abs() < 1e-15);
    }

    #[test]
    fn singular_c11_gives_infinite_ic() {
        // two identical active columns
        let x = Matrix::from_rows(&[&[1.0, 1.0, 0.5], &[2.0, 2.0, -1.0], &[0.0, 0.0, 1.0]]).unwrap();
        let pm = partition_moments(&x, &SymMatrix::identity(3), 2, 0.0).unwrap();
        assert_eq!(ic_value(&pm, &[1.0, 1.0]).unwrap(), f64::INFINITY);
        let report = condition_report(&x, &SymMatrix::identity(3), &[1.0, 1.0, 0.0], 2, &[1.0], &[0.0, 1.0]).unwrap();
        assert!(report.ic_singular);
        assert_eq!(report.ic_value, None);
        assert!(!report.ic_holds);
        // the ridge-shifted cells stay finite
        assert!(report.eic_value.is_finite());
        assert_eq!(report.eic_eta, 1.0);
    }

    #[test]
    fn zero_cross_block_gives_zero_criteria() {
        let x = orthogonal_design(12, 4);
        let pm = partition_moments(&x, &SymMatrix::identity(4), 2, 0.0).unwrap();
        let cells = criterion_cells(&pm, Criterion::Eic, &[2.0, 1.0], &[0.1, 1.0], &[0.0, 3.0]).unwrap();
        assert!(cells.iter().all(|c| c.value == 0.0));
        let cells = criterion_cells(&pm, Criterion::Gic, &[2.0, 1.0], &[0.1, 1.0], &[0.0, 3.0]).unwrap();
        assert!(cells.iter().all(|c| c.value == 0.0));
        assert!(criterion_cells(&pm, Criterion::Gic, &[2.0, 1.0], &[0.0], &[1.0]).is_err());
        assert!(criterion_cells(&pm, Criterion::Gic, &[2.0, 1.0], &[], &[1.0]).is_err());
    }

    #[test]
    fn eic_reduces_to_ic_at_zero_eta() {
        let spec = CovarianceSpec::new(8, 3, [0.3, 0.5, 0.7]);
        let d = sample_dataset(&spec, &TruthSpec::uniform(3, 1.0), 40, 1.0, SeedRecord::new(11, 0)).unwrap();
        let sigma = build_covariance(&spec).unwrap();
        let pm = partition_moments(&d.x, &sigma, 3, 0.0).unwrap();
        let ic = ic_value(&pm, &[1.0, 1.0, 1.0]).unwrap();
        let cells = criterion_cells(&pm, Criterion::Eic, &d.beta_star[..3], &[0.5, 5.0], &[0.0, 1.0]).unwrap();
        for c in cells.iter().filter(|c| c.eta == 0.0) {
            assert!((c.value - ic).abs() <= 1e-12);
        }
    }

    #[test]
    fn grid_minimum_prefers_first() {
        let cells = [
            GridValue { lambda: 1.0, eta: 1.0, value: 0.5 },
            GridValue { lambda: 2.0, eta: 1.0, value: 0.5 },
            GridValue { lambda: 3.0, eta: 1.0, value: 0.7 },
        ];
        let m = grid_minimum(&cells);
        assert_eq!((m.value, m.lambda), (0.5, 1.0));
    }

    #[test]
    fn orthogonal_theorem_quantities() {
        let x = orthogonal_design(20, 4);
        let beta = [6.0, 0.0, 0.0, 0.0];
        let t = theorem_quantities(&x, &SymMatrix::identity(4), &beta, PenaltyConfig::new(2.0, 0.0).unwrap(), 1.0, None, 0.5).unwrap();
        assert!((t.eigen.lmax_c11inv - 1.0).abs() < 1e-12);
        assert!((t.eigen.lmax_ha - 1.0).abs() < 1e-12);
        // H_B H_B' = C22 = I
        assert!((t.eigen.lmax_hb - 1.0).abs() < 1e-12);
        assert_eq!(t.beta_min, 6.0);
        assert_eq!(t.beta1_norm, 6.0);
        // q = 1: rhs = n / (3 lambda_max(Sigma11))
        assert!((t.eta_bound.rhs - 20.0 / 3.0).abs() < 1e-12);
        assert!(t.m1_bound.holds);
        assert!(theorem_quantities(&x, &SymMatrix::identity(4), &[0.0, 1.0, 0.0, 0.0], PenaltyConfig::new(1.0, 0.0).unwrap(), 1.0, None, 0.5).is_err());
    }

    #[test]
    fn zero_noise_events_hold() {
        // Sigma = I and many rows keep C21 small, so only the noise could break the events
        let spec = CovarianceSpec::new(6, 2, [0.0, 0.0, 0.0]);
        let sigma = build_covariance(&spec).unwrap();
        let d = sample_dataset(&spec, &TruthSpec::uniform(2, 5.0), 4000, 0.0, SeedRecord::new(5, 0)).unwrap();
        let r = lemma_events(&d, &sigma, PenaltyConfig::new(1.0, 0.1).unwrap()).unwrap();
        assert!(r.wn1.iter().chain(&r.wn2).all(|&w| w == 0.0));
        assert!(r.an_holds);
        assert!(r.bn_holds);
        let huge = lemma_events(&d, &sigma, PenaltyConfig::new(1e6, 0.1).unwrap()).unwrap();
        assert!(!huge.an_holds);
        assert!(huge.margin_a.iter().any(|&m| m < 0.0));
        assert_eq!(huge.margin_b.len(), 4);
    }
}
