//! Reference computations that share no code with the library: dense
//! nested-`Vec` matrices, Gaussian elimination, power iteration, polynomial
//! root finding and exhaustive enumeration.
#![allow(dead_code)]

pub type Dense = Vec<Vec<f64>>;

pub fn dense(rows: usize, cols: usize, f: impl Fn(usize, usize) -> f64) -> Dense {
    (0..rows).map(|i| (0..cols).map(|j| f(i, j)).collect()).collect()
}

pub fn transpose(a: &Dense) -> Dense {
    dense(a[0].len(), a.len(), |i, j| a[j][i])
}

pub fn mul(a: &Dense, b: &Dense) -> Dense {
    dense(a.len(), b[0].len(), |i, j| (0..b.len()).map(|k| a[i][k] * b[k][j]).sum())
}

pub fn mul_vec(a: &Dense, v: &[f64]) -> Vec<f64> {
    a.iter().map(|row| row.iter().zip(v).map(|(x, y)| x * y).sum()).collect()
}

pub fn sub_matrix(a: &Dense, rows: &[usize], cols: &[usize]) -> Dense {
    rows.iter().map(|&i| cols.iter().map(|&j| a[i][j]).collect()).collect()
}

/// Gaussian elimination with partial pivoting; `None` if a pivot vanishes.
pub fn solve(a: &Dense, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.len();
    let mut m: Dense = a.iter().zip(b).map(|(r, &bi)| {
        let mut r = r.clone();
        r.push(bi);
        r
    }).collect();
    let scale = a.iter().flatten().fold(0.0f64, |s, v| s.max(v.abs())).max(1e-300);
    for col in 0..n {
        let piv = (col..n).max_by(|&i, &j| m[i][col].abs().total_cmp(&m[j][col].abs()))?;
        if m[piv][col].abs() <= 1e-13 * scale {
            return None;
        }
        m.swap(col, piv);
        for r in 0..n {
            if r != col {
                let f = m[r][col] / m[col][col];
                for c in col..=n {
                    m[r][c] -= f * m[col][c];
                }
            }
        }
    }
    Some((0..n).map(|i| m[i][n] / m[i][i]).collect())
}

pub fn inverse(a: &Dense) -> Option<Dense> {
    let n = a.len();
    let cols: Option<Vec<Vec<f64>>> = (0..n)
        .map(|k| solve(a, &(0..n).map(|i| f64::from(u8::from(i == k))).collect::<Vec<_>>()))
        .collect();
    Some(transpose(&cols?))
}

/// Largest eigenvalue of a symmetric positive semi-definite matrix.
pub fn power_iteration(a: &Dense) -> f64 {
    let n = a.len();
    let mut v: Vec<f64> = (0..n).map(|i| 1.0 + 0.01 * i as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..100_000 {
        let w = mul_vec(a, &v);
        let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
        if norm == 0.0 {
            return 0.0;
        }
        let next: f64 = v.iter().zip(&w).map(|(x, y)| x * y).sum::<f64>() / v.iter().map(|x| x * x).sum::<f64>();
        v = w.iter().map(|x| x / norm).collect();
        if (next - lambda).abs() <= 1e-15 * next.abs() {
            return next;
        }
        lambda = next;
    }
    lambda
}

/// Coefficients `c[0] + c[1] t + ... + t^n` of `det(t I - A)` by Faddeev-LeVerrier.
pub fn char_poly(a: &Dense) -> Vec<f64> {
    let n = a.len();
    let mut coeffs = vec![0.0; n + 1];
    coeffs[n] = 1.0;
    let mut m = dense(n, n, |_, _| 0.0);
    for k in 1..=n {
        // M_k = A M_{k-1} + c_{n-k+1} I
        let mut next = mul(a, &m);
        for i in 0..n {
            next[i][i] += coeffs[n - k + 1];
        }
        m = next;
        let am = mul(a, &m);
        let trace: f64 = (0..n).map(|i| am[i][i]).sum();
        coeffs[n - k] = -trace / k as f64;
    }
    coeffs
}

pub fn poly_eval(c: &[f64], t: f64) -> f64 {
    c.iter().rev().fold(0.0, |acc, &ci| acc * t + ci)
}

/// Real roots of a polynomial in `[lo, hi]` by scanning for sign changes and bisecting.
pub fn real_roots(c: &[f64], lo: f64, hi: f64, steps: usize) -> Vec<f64> {
    let mut roots = Vec::new();
    let h = (hi - lo) / steps as f64;
    for k in 0..steps {
        let (mut a, mut b) = (lo + h * k as f64, lo + h * (k + 1) as f64);
        let (fa, fb) = (poly_eval(c, a), poly_eval(c, b));
        if fa == 0.0 {
            roots.push(a);
            continue;
        }
        if fa * fb > 0.0 {
            continue;
        }
        let mut fa = fa;
        for _ in 0..200 {
            let mid = 0.5 * (a + b);
            let fm = poly_eval(c, mid);
            if fa * fm <= 0.0 {
                b = mid;
            } else {
                a = mid;
                fa = fm;
            }
        }
        roots.push(0.5 * (a + b));
    }
    roots
}

/// `||y - X b||^2 + eta b'Q b + lambda ||b||_1` evaluated from scratch.
pub fn objective(x: &Dense, y: &[f64], q: Option<&Dense>, lambda: f64, eta: f64, b: &[f64]) -> f64 {
    let fitted = mul_vec(x, b);
    let rss: f64 = y.iter().zip(&fitted).map(|(yi, fi)| (yi - fi) * (yi - fi)).sum();
    let quad = match q {
        Some(q) => b.iter().zip(mul_vec(q, b)).map(|(bi, qi)| bi * qi).sum::<f64>(),
        None => 0.0,
    };
    rss + eta * quad + lambda * b.iter().map(|v| v.abs()).sum::<f64>()
}

/// Global minimum by enumerating every sign pattern in `{-1, 0, 1}^p`: on each
/// pattern the criterion is a quadratic whose stationary point is solved
/// exactly. Every candidate is a feasible point, and the pattern of the true
/// minimizer reproduces it, so the smallest candidate value is the minimum.
pub fn enumerate_minimum(x: &Dense, y: &[f64], q: Option<&Dense>, lambda: f64, eta: f64) -> (f64, Vec<f64>) {
    let p = x[0].len();
    let xt = transpose(x);
    let mut gram = mul(&xt, x);
    if let Some(q) = q {
        for i in 0..p {
            for j in 0..p {
                gram[i][j] += eta * q[i][j];
            }
        }
    }
    let xty = mul_vec(&xt, y);
    let mut best = (objective(x, y, q, lambda, eta, &vec![0.0; p]), vec![0.0; p]);
    for code in 0..3usize.pow(p as u32) {
        let signs: Vec<f64> = (0..p).map(|j| (code / 3usize.pow(j as u32) % 3) as f64 - 1.0).collect();
        let active: Vec<usize> = (0..p).filter(|&j| signs[j] != 0.0).collect();
        if active.is_empty() {
            continue;
        }
        let g = sub_matrix(&gram, &active, &active);
        let rhs: Vec<f64> = active.iter().map(|&j| xty[j] - 0.5 * lambda * signs[j]).collect();
        let Some(sol) = solve(&g, &rhs) else { continue };
        let mut b = vec![0.0; p];
        for (k, &j) in active.iter().enumerate() {
            b[j] = sol[k];
        }
        let f = objective(x, y, q, lambda, eta, &b);
        if f < best.0 {
            best = (f, b);
        }
    }
    best
}

/// Small deterministic generator for oracle-side test data.
pub struct Lcg(pub u64);

impl Lcg {
    pub fn next_f64(&mut self) -> f64 {
        self.0 = self.0.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
        ((self.0 >> 11) as f64) / (1u64 << 53) as f64
    }

    /// Approximately standard normal (sum of twelve uniforms).
    pub fn normal(&mut self) -> f64 {
        (0..12).map(|_| self.next_f64()).sum::<f64>() - 6.0
    }
}
