//! Block-correlated Gaussian designs and sparse linear-model datasets.
//!
//! The covariance has unit diagonal and three constant off-diagonal levels:
//! `alpha1` inside the active block, `alpha3` inside the non-active block and
//! `alpha2` between them. Rows are drawn as `z * Sigma^{1/2}` with the
//! symmetric square root, the same factor that whitening inverts.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{self, EigenDecomposition, HalfPower, Matrix, SymMatrix};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CovarianceSpec {
    pub p: usize,
    pub q: usize,
    pub alpha1: f64,
    pub alpha2: f64,
    pub alpha3: f64,
}

impl CovarianceSpec {
    pub fn new(p: usize, q: usize, alphas: [f64; 3]) -> Self {
        CovarianceSpec {
            p,
            q,
            alpha1: alphas[0],
            alpha2: alphas[1],
            alpha3: alphas[2],
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.p == 0 {
            return Err(Error::invalid("p", "need at least one predictor"));
        }
        if self.q > self.p {
            return Err(Error::invalid("q", "active count exceeds p"));
        }
        for (name, a) in [
            ("alpha1", self.alpha1),
            ("alpha2", self.alpha2),
            ("alpha3", self.alpha3),
        ] {
            if !(-1.0..=1.0).contains(&a) {
                return Err(Error::invalid(name, "correlation must lie in [-1, 1]"));
            }
        }
        Ok(())
    }
}

/// Sparse truth: `q` leading coefficients of magnitude `b`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TruthSpec {
    pub q: usize,
    pub b: f64,
    /// Entries in {-1, +1}; empty means all +1.
    #[serde(default)]
    pub signs: Vec<i8>,
}

impl TruthSpec {
    pub fn uniform(q: usize, b: f64) -> Self {
        TruthSpec {
            q,
            b,
            signs: Vec::new(),
        }
    }

    pub fn beta_star(&self, p: usize) -> Result<Vec<f64>> {
        if self.q > p {
            return Err(Error::invalid("q", "active count exceeds p"));
        }
        if !self.signs.is_empty() && self.signs.len() != self.q {
            return Err(Error::mismatch("TruthSpec::signs", self.q, self.signs.len()));
        }
        if self.signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(Error::invalid("signs", "entries must be -1 or +1"));
        }
        if !(self.b.is_finite() && self.b != 0.0) {
            return Err(Error::invalid("b", "coefficient magnitude must be finite and non-zero"));
        }
        let mut beta = alloc::vec![0.0; p];
        for (j, slot) in beta.iter_mut().enumerate().take(self.q) {
            let s = self.signs.get(j).copied().unwrap_or(1);
            *slot = f64::from(s) * self.b;
        }
        Ok(beta)
    }
}

/// Identifies one random stream: a key and a stream index under it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SeedRecord {
    pub key: u64,
    pub stream: u64,
}

impl SeedRecord {
    pub fn new(key: u64, stream: u64) -> Self {
        SeedRecord { key, stream }
    }

    pub fn rng(&self) -> ChaCha20Rng {
        let mut rng = ChaCha20Rng::seed_from_u64(self.key);
        rng.set_stream(self.stream);
        rng
    }
}

/// Mixes extra words into a seed (splitmix64 finalizer per word).
pub fn derive_key(seed: u64, words: &[u64]) -> u64 {
    let mut h = seed ^ 0x9E37_79B9_7F4A_7C15;
    for &w in words {
        h = splitmix64(h ^ w.wrapping_mul(0xD6E8_FEB8_6659_FD93));
    }
    splitmix64(h)
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub x: Matrix,
    pub y: Vec<f64>,
    pub beta_star: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub sigma: f64,
    pub seed: SeedRecord,
}

impl Dataset {
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    pub fn p(&self) -> usize {
        self.x.cols()
    }
}

pub fn build_covariance(spec: &CovarianceSpec) -> Result<SymMatrix> {
    spec.validate()?;
    let q = spec.q;
    let m = Matrix::from_fn(spec.p, spec.p, |i, j| {
        if i == j {
            1.0
        } else if i < q && j < q {
            spec.alpha1
        } else if i >= q && j >= q {
            spec.alpha3
        } else {
            spec.alpha2
        }
    });
    let sigma = SymMatrix::new(m)?;
    let smallest = linalg::lambda_min(&sigma)?;
    if !(smallest > 0.0) {
        return Err(Error::NotPositiveDefinite {
            smallest_eigenvalue: smallest,
        });
    }
    Ok(sigma)
}

/// A covariance with its spectral factors, computed once and shared by
/// sampling, whitening and the gEN solver.
#[derive(Debug, Clone)]
pub struct CovarianceFactors {
    pub sigma: SymMatrix,
    pub sqrt: SymMatrix,
    pub inv_sqrt: SymMatrix,
    pub eigen: EigenDecomposition,
}

impl CovarianceFactors {
    pub fn new(sigma: SymMatrix) -> Result<Self> {
        let eigen = linalg::eigen_sym(&sigma)?;
        let inv_sqrt = linalg::power_half_from(&eigen, HalfPower::Negative)?;
        let sqrt = linalg::power_half_from(&eigen, HalfPower::Positive)?;
        Ok(CovarianceFactors {
            sigma,
            sqrt,
            inv_sqrt,
            eigen,
        })
    }

    pub fn from_spec(spec: &CovarianceSpec) -> Result<Self> {
        CovarianceFactors::new(build_covariance(spec)?)
    }

    pub fn dim(&self) -> usize {
        self.sigma.dim()
    }
}

pub fn sample_dataset(
    spec: &CovarianceSpec,
    truth: &TruthSpec,
    n: usize,
    sigma: f64,
    seed: SeedRecord,
) -> Result<Dataset> {
    let factors = CovarianceFactors::from_spec(spec)?;
    sample_with_factors(&factors, truth, n, sigma, seed)
}

/// Same as [`sample_dataset`] with a precomputed `Sigma^{1/2}`.
pub fn sample_with_factors(
    factors: &CovarianceFactors,
    truth: &TruthSpec,
    n: usize,
    sigma: f64,
    seed: SeedRecord,
) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::invalid("n", "need at least one observation"));
    }
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::invalid("sigma", "noise level must be finite and >= 0"));
    }
    let p = factors.dim();
    let beta_star = truth.beta_star(p)?;
    let mut rng = seed.rng();

    let z = Matrix::from_fn(n, p, |_, _| rng.sample::<f64, _>(StandardNormal));
    let x = z.matmul(factors.sqrt.as_matrix())?;
    let epsilon: Vec<f64> = (0..n)
        .map(|_| sigma * rng.sample::<f64, _>(StandardNormal))
        .collect();
    let signal = x.matvec(&beta_star)?;
    let y = signal.iter().zip(&epsilon).map(|(s, e)| s + e).collect();

    Ok(Dataset {
        x,
        y,
        beta_star,
        epsilon,
        sigma,
        seed,
    })
}

/// `X Sigma^{-1/2}`.
pub fn whiten_design(x: &Matrix, sigma_inv_half: &SymMatrix) -> Result<Matrix> {
    if x.cols() != sigma_inv_half.dim() {
        return Err(Error::mismatch("whiten_design", sigma_inv_half.dim(), x.cols()));
    }
    x.matmul(sigma_inv_half.as_matrix())
}

/// `n^{-1} X'X`.
pub fn empirical_covariance(x: &Matrix) -> SymMatrix {
    x.gram().scale(1.0 / x.rows() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn covariance_structure() {
        let s = build_covariance(&CovarianceSpec::new(4, 2, [0.3, 0.5, 0.7])).unwrap();
        let expected = Matrix::from_rows(&[
            &[1.0, 0.3, 0.5, 0.5],
            &[0.3, 1.0, 0.5, 0.5],
            &[0.5, 0.5, 1.0, 0.7],
            &[0.5, 0.5, 0.7, 1.0],
        ])
        .unwrap();
        assert_eq!(s.as_matrix(), &expected);
    }

    #[test]
    fn zero_alphas_give_identity() {
        let s = build_covariance(&CovarianceSpec::new(5, 2, [0.0; 3])).unwrap();
        assert_eq!(s.as_matrix(), &Matrix::identity(5));
    }

    #[test]
    fn nearly_singular_but_positive_is_accepted() {
        let s = build_covariance(&CovarianceSpec::new(2, 1, [0.0, 0.99, 0.0])).unwrap();
        let min = linalg::lambda_min(&s).unwrap();
        assert!((min - 0.01).abs() < 1e-12);
    }

    #[test]
    fn rejects_indefinite_and_bad_specs() {
        // three variables pairwise correlated at -0.9 are not jointly realizable
        let err = build_covariance(&CovarianceSpec::new(3, 3, [-0.9, 0.0, 0.0])).unwrap_err();
        assert!(matches!(err, Error::NotPositiveDefinite { .. }));
        assert!(build_covariance(&CovarianceSpec::new(3, 4, [0.0; 3])).is_err());
        assert!(build_covariance(&CovarianceSpec::new(3, 1, [1.5, 0.0, 0.0])).is_err());
        assert!(build_covariance(&CovarianceSpec::new(0, 0, [0.0; 3])).is_err());
    }

    #[test]
    fn truth_with_signs() {
        let t = TruthSpec {
            q: 3,
            b: 2.0,
            signs: alloc::vec![1, -1, 1],
        };
        assert_eq!(t.beta_star(5).unwrap(), alloc::vec![2.0, -2.0, 2.0, 0.0, 0.0]);
        assert_eq!(TruthSpec::uniform(1, 1.0).beta_star(2).unwrap(), alloc::vec![1.0, 0.0]);
        let bad = TruthSpec {
            q: 2,
            b: 1.0,
            signs: alloc::vec![1, 0],
        };
        assert!(bad.beta_star(3).is_err());
    }

    #[test]
    fn noiseless_response() {
        let spec = CovarianceSpec::new(6, 2, [0.3, 0.5, 0.7]);
        let d = sample_dataset(&spec, &TruthSpec::uniform(2, 1.0), 15, 0.0, SeedRecord::new(3, 0))
            .unwrap();
        assert_eq!(d.y, d.x.matvec(&d.beta_star).unwrap());
        assert!(d.epsilon.iter().all(|&e| e == 0.0));
    }

    #[test]
    fn streams_are_reproducible_and_distinct() {
        let spec = CovarianceSpec::new(5, 2, [0.3, 0.5, 0.7]);
        let t = TruthSpec::uniform(2, 1.0);
        let a = sample_dataset(&spec, &t, 10, 1.0, SeedRecord::new(9, 4)).unwrap();
        let b = sample_dataset(&spec, &t, 10, 1.0, SeedRecord::new(9, 4)).unwrap();
        let c = sample_dataset(&spec, &t, 10, 1.0, SeedRecord::new(9, 5)).unwrap();
        assert_eq!(a, b);
        assert_ne!(a.x, c.x);
    }

    #[test]
    fn identity_whitening_is_noop() {
        let spec = CovarianceSpec::new(4, 1, [0.0; 3]);
        let d = sample_dataset(&spec, &TruthSpec::uniform(1, 1.0), 8, 1.0, SeedRecord::new(1, 0))
            .unwrap();
        let w = whiten_design(&d.x, &SymMatrix::identity(4)).unwrap();
        assert_eq!(w, d.x);
        assert!(whiten_design(&d.x, &SymMatrix::identity(3)).is_err());
    }

    #[test]
    fn whitening_the_root_gives_identity() {
        let f = CovarianceFactors::from_spec(&CovarianceSpec::new(4, 2, [0.3, 0.5, 0.7])).unwrap();
        let w = whiten_design(f.sqrt.as_matrix(), &f.inv_sqrt).unwrap();
        assert!(w.relative_distance(&Matrix::identity(4)) < 1e-8);
    }

    #[test]
    fn derived_keys_differ() {
        assert_ne!(derive_key(1, &[200, 200]), derive_key(1, &[200, 400]));
        assert_ne!(derive_key(1, &[5]), derive_key(2, &[5]));
        assert_eq!(derive_key(7, &[1, 2, 3]), derive_key(7, &[1, 2, 3]));
    }
}
