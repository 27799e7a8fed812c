//! Support-recovery metrics.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg;
use crate::solvers::{sign, Method};

/// Relative zero threshold applied to fitted coefficients.
pub const SUPPORT_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MetricsRecord {
    pub tp: usize,
    pub fp: usize,
    pub tn: usize,
    pub fn_: usize,
    /// `None` when the true support is empty.
    pub tpr: Option<f64>,
    /// `None` when the true support is everything.
    pub fpr: Option<f64>,
    /// Signs of the thresholded estimate equal `sign(beta*)` on every coordinate.
    pub sign_exact: bool,
}

impl MetricsRecord {
    pub fn tpr_minus_fpr(&self) -> Option<f64> {
        Some(self.tpr? - self.fpr?)
    }
}

/// Coordinates with `|b_j| <= 1e-8 (1 + ||b||_inf)` count as zero.
pub fn support_threshold(beta_hat: &[f64]) -> f64 {
    SUPPORT_TOL * (1.0 + linalg::norm_inf(beta_hat))
}

pub fn selection_metrics(beta_hat: &[f64], beta_star: &[f64]) -> Result<MetricsRecord> {
    if beta_hat.len() != beta_star.len() {
        return Err(Error::mismatch("beta_hat", beta_star.len(), beta_hat.len()));
    }
    let tol = support_threshold(beta_hat);
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    let mut sign_exact = true;
    for (&est, &truth) in beta_hat.iter().zip(beta_star) {
        let selected = est.abs() > tol;
        let active = truth != 0.0;
        match (selected, active) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
        let est_sign = if selected { sign(est) } else { 0.0 };
        sign_exact &= est_sign == sign(truth);
    }
    let ratio = |num: usize, den: usize| (den > 0).then(|| num as f64 / den as f64);
    Ok(MetricsRecord {
        tp,
        fp,
        tn,
        fn_,
        tpr: ratio(tp, tp + fn_),
        fpr: ratio(fp, fp + tn),
        sign_exact,
    })
}

/// Metrics for one fitted point of a path.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PathPoint {
    pub method: Method,
    pub lambda: f64,
    pub eta: f64,
    pub metrics: MetricsRecord,
}

/// Point maximizing `TPR - FPR`; ties go to the larger lambda, then the larger eta.
/// `None` when no point has both rates defined.
pub fn best_tpr_minus_fpr(points: &[PathPoint]) -> Option<PathPoint> {
    let mut best: Option<(f64, PathPoint)> = None;
    for pt in points {
        let Some(score) = pt.metrics.tpr_minus_fpr() else {
            continue;
        };
        let better = match &best {
            None => true,
            Some((s, b)) => {
                score > *s
                    || (score == *s && (pt.lambda > b.lambda || (pt.lambda == b.lambda && pt.eta > b.eta)))
            }
        };
        if better {
            best = Some((score, *pt));
        }
    }
    best.map(|(_, pt)| pt)
}
