mod oracle;

use gen_en_core::conditions::{
    self, condition_report, criterion_cells, eigen_quantities, ic_value, lemma_events, partition_moments,
    theorem_quantities, Criterion,
};
use gen_en_core::simulate::{build_covariance, sample_dataset, CovarianceSpec, Dataset, SeedRecord, TruthSpec};
use gen_en_core::solvers::{fit_gen_elastic_net, sign, PenaltyConfig};
use gen_en_core::{Matrix, SymMatrix};
use oracle::Dense;

fn to_dense(m: &Matrix) -> Dense {
    oracle::dense(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn instance(p: usize, n: usize, q: usize, b: f64, seed: u64) -> (Dataset, SymMatrix) {
    let spec = CovarianceSpec::new(p, q, [0.3, 0.5, 0.7]);
    let d = sample_dataset(&spec, &TruthSpec::uniform(q, b), n, 1.0, SeedRecord::new(seed, 0)).unwrap();
    (d, build_covariance(&spec).unwrap())
}

/// Empirical blocks straight from the definition.
fn blocks(x: &Matrix, q: usize) -> (Dense, Dense) {
    let n = x.rows() as f64;
    let xd = to_dense(x);
    let c = oracle::mul(&oracle::transpose(&xd), &xd);
    let c: Dense = c.iter().map(|r| r.iter().map(|v| v / n).collect()).collect();
    let act: Vec<usize> = (0..q).collect();
    let rest: Vec<usize> = (q..x.cols()).collect();
    (oracle::sub_matrix(&c, &act, &act), oracle::sub_matrix(&c, &rest, &act))
}

fn add_scaled(a: &Dense, t: f64, b: &Dense) -> Dense {
    oracle::dense(a.len(), a[0].len(), |i, j| a[i][j] + t * b[i][j])
}

fn gic_oracle(x: &Matrix, sigma: &SymMatrix, beta1: &[f64], lambda: f64, eta: f64) -> f64 {
    let q = beta1.len();
    let (c11, c21) = blocks(x, q);
    let s = to_dense(sigma);
    let act: Vec<usize> = (0..q).collect();
    let rest: Vec<usize> = (q..x.cols()).collect();
    let (s11, s21) = (oracle::sub_matrix(&s, &act, &act), oracle::sub_matrix(&s, &rest, &act));
    let t = eta / x.rows() as f64;
    let inv = oracle::inverse(&add_scaled(&c11, t, &s11)).unwrap();
    let left = oracle::mul(&add_scaled(&c21, t, &s21), &inv);
    let k = 2.0 * eta / lambda;
    let v: Vec<f64> = beta1.iter().map(|&b| sign(b) + k * b).collect();
    let a = oracle::mul_vec(&left, &v);
    let off = oracle::mul_vec(&s21, beta1);
    a.iter().zip(&off).map(|(ai, oi)| (ai - k * oi).abs()).fold(0.0, f64::max)
}

fn eic_oracle(x: &Matrix, beta1: &[f64], lambda: f64, eta: f64) -> f64 {
    let q = beta1.len();
    let (c11, c21) = blocks(x, q);
    let id = oracle::dense(q, q, |i, j| f64::from(u8::from(i == j)));
    let inv = oracle::inverse(&add_scaled(&c11, eta / x.rows() as f64, &id)).unwrap();
    let k = 2.0 * eta / lambda;
    let v: Vec<f64> = beta1.iter().map(|&b| sign(b) + k * b).collect();
    let w = oracle::mul_vec(&oracle::mul(&c21, &inv), &v);
    w.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

#[test]
fn blocks_match_definition() {
    let (d, sigma) = instance(6, 50, 2, 1.0, 1);
    let pm = partition_moments(&d.x, &sigma, 2, 0.0).unwrap();
    let (c11, c21) = blocks(&d.x, 2);
    for i in 0..2 {
        for j in 0..2 {
            assert!((pm.c11[(i, j)] - c11[i][j]).abs() < 1e-12);
        }
    }
    for i in 0..4 {
        for j in 0..2 {
            assert!((pm.c21[(i, j)] - c21[i][j]).abs() < 1e-12);
            assert_eq!(pm.c12[(j, i)], pm.c21[(i, j)]);
        }
    }
    assert_eq!((pm.c22.dim(), pm.s22.dim()), (4, 4));
    assert_eq!(pm.curly11, pm.c11);
    let shifted = pm.with_eta(5.0);
    assert!((shifted.curly11[(0, 1)] - (pm.c11[(0, 1)] + 0.1 * 0.3)).abs() < 1e-14);
}

#[test]
fn ic_matches_explicit_inverse() {
    let (d, sigma) = instance(20, 100, 5, 1.0, 2);
    let pm = partition_moments(&d.x, &sigma, 5, 0.0).unwrap();
    let (c11, c21) = blocks(&d.x, 5);
    let w = oracle::mul_vec(&oracle::mul(&c21, &oracle::inverse(&c11).unwrap()), &[1.0; 5]);
    let expected = w.iter().fold(0.0f64, |m, x| m.max(x.abs()));
    assert!((ic_value(&pm, &[1.0; 5]).unwrap() - expected).abs() < 1e-10);
}

#[test]
fn criterion_cells_match_explicit_inverse() {
    let (d, sigma) = instance(20, 100, 5, 2.0, 3);
    let pm = partition_moments(&d.x, &sigma, 5, 0.0).unwrap();
    let beta1 = &d.beta_star[..5];
    let lambdas = [0.05, 1.0, 30.0];
    let etas = [0.0, 0.7, 40.0];
    let eic = criterion_cells(&pm, Criterion::Eic, beta1, &lambdas, &etas).unwrap();
    let gic = criterion_cells(&pm, Criterion::Gic, beta1, &lambdas, &etas).unwrap();
    for (e, g) in eic.iter().zip(&gic) {
        let oe = eic_oracle(&d.x, beta1, e.lambda, e.eta);
        let og = gic_oracle(&d.x, &sigma, beta1, g.lambda, g.eta);
        assert!((e.value - oe).abs() < 1e-10 * (1.0 + oe), "eic {e:?} vs {oe}");
        assert!((g.value - og).abs() < 1e-10 * (1.0 + og), "gic {g:?} vs {og}");
    }
}

#[test]
fn gic_coincides_with_eic_for_identity_covariance() {
    let spec = CovarianceSpec::new(15, 4, [0.0, 0.0, 0.0]);
    let d = sample_dataset(&spec, &TruthSpec::uniform(4, 3.0), 40, 1.0, SeedRecord::new(4, 0)).unwrap();
    let pm = partition_moments(&d.x, &SymMatrix::identity(15), 4, 0.0).unwrap();
    let grid = [0.01, 1.0, 100.0];
    let eic = criterion_cells(&pm, Criterion::Eic, &d.beta_star[..4], &grid, &grid).unwrap();
    let gic = criterion_cells(&pm, Criterion::Gic, &d.beta_star[..4], &grid, &grid).unwrap();
    for (e, g) in eic.iter().zip(&gic) {
        assert!((e.value - g.value).abs() <= 1e-12);
    }
}

#[test]
fn criteria_ignore_inactive_labels() {
    let (d, sigma) = instance(10, 60, 3, 5.0, 5);
    let grid = [0.1, 10.0, 1000.0];
    let base = condition_report(&d.x, &sigma, &d.beta_star, 3, &grid, &grid).unwrap();
    // reverse the inactive columns of X and Sigma
    let perm: Vec<usize> = (0..3).chain((3..10).rev()).collect();
    let x = Matrix::from_fn(60, 10, |i, j| d.x[(i, perm[j])]);
    let s = SymMatrix::new(Matrix::from_fn(10, 10, |i, j| sigma[(perm[i], perm[j])])).unwrap();
    let permuted = condition_report(&x, &s, &d.beta_star, 3, &grid, &grid).unwrap();
    assert!((base.ic() - permuted.ic()).abs() < 1e-12);
    assert!((base.eic_value - permuted.eic_value).abs() < 1e-12);
    assert!((base.gic_value - permuted.gic_value).abs() < 1e-12);
    assert_eq!(base.ic_holds, base.ic() < 1.0);
    assert_eq!(base.gic_holds, base.gic_value < 1.0);
}

#[test]
fn eigen_quantities_match_direct_construction() {
    let (d, sigma) = instance(12, 30, 5, 1.0, 6);
    let eta = 2.5;
    let pm = partition_moments(&d.x, &sigma, 5, eta).unwrap();
    let e = eigen_quantities(&pm).unwrap();

    let n = 30.0f64;
    let xd = to_dense(&d.x);
    let act: Vec<usize> = (0..5).collect();
    let rest: Vec<usize> = (5..12).collect();
    let rows: Vec<usize> = (0..30).collect();
    let x1t = oracle::transpose(&oracle::sub_matrix(&xd, &rows, &act));
    let x2t = oracle::transpose(&oracle::sub_matrix(&xd, &rows, &rest));
    let curly_inv = oracle::inverse(&to_dense(&pm.curly11)).unwrap();
    // H_A = n^{-1/2} C11(eta)^{-1} X1'
    let ha: Dense = oracle::mul(&curly_inv, &x1t).iter().map(|r| r.iter().map(|v| v / n.sqrt()).collect()).collect();
    let ha_hat = oracle::mul(&ha, &oracle::transpose(&ha));
    assert!((e.lmax_ha - oracle::power_iteration(&ha_hat)).abs() < 1e-8 * e.lmax_ha);
    // H_B = n^{-1/2} (C21(eta) C11(eta)^{-1} X1' - X2')
    let k = oracle::mul(&to_dense(&pm.curly21), &curly_inv);
    let kx = oracle::mul(&k, &x1t);
    let hb = oracle::dense(7, 30, |i, j| (kx[i][j] - x2t[i][j]) / n.sqrt());
    let hb_hat = oracle::mul(&hb, &oracle::transpose(&hb));
    assert!((e.lmax_hb - oracle::power_iteration(&hb_hat)).abs() < 1e-8 * e.lmax_hb);
    assert!((e.lmax_c11inv - oracle::power_iteration(&curly_inv)).abs() < 1e-8 * e.lmax_c11inv);
}

#[test]
fn single_active_variable_bounds() {
    let (d, sigma) = instance(8, 40, 1, 4.0, 7);
    let t = theorem_quantities(&d.x, &sigma, &d.beta_star, PenaltyConfig::new(10.0, 1.0).unwrap(), 1.0, None, 0.1).unwrap();
    assert_eq!(t.beta_min, 4.0);
    assert_eq!(t.beta1_norm, 4.0);
    assert_eq!(t.lmax_sigma11, 1.0);
    assert!((t.eta_bound.rhs - 40.0 / 3.0).abs() < 1e-12);
    assert!((t.eta_bound.lhs - t.eigen.lmax_c11inv).abs() < 1e-15);
    assert!(t.eigen.lmax_ha >= 0.0 && t.eigen.lmax_hb >= 0.0);
}

#[test]
fn lambda_lower_bound_is_monotone() {
    let (d, sigma) = instance(10, 50, 3, 2.0, 8);
    let mut held = false;
    for k in 0..40 {
        let lambda = 0.5 * 1.5f64.powi(k);
        let t = theorem_quantities(&d.x, &sigma, &d.beta_star, PenaltyConfig::new(lambda, 1.0).unwrap(), 1.0, None, 0.1).unwrap();
        assert!(!(held && !t.lambda_lower.holds));
        held |= t.lambda_lower.holds;
    }
    assert!(held);
}

#[test]
fn joint_events_imply_sign_recovery() {
    let mut both = 0;
    for seed in 0..40u64 {
        let (p, n, q) = [(10, 60, 2), (20, 100, 3), (30, 200, 4)][seed as usize % 3];
        let (d, sigma) = instance(p, n, q, 3.0, 100 + seed);
        let lambda = 2.0 * (n as f64).sqrt() * 2.0;
        let penalty = PenaltyConfig::new(lambda, 0.5).unwrap();
        let ev = lemma_events(&d, &sigma, penalty).unwrap();
        if ev.an_holds && ev.bn_holds {
            both += 1;
            let fit = fit_gen_elastic_net(&d.x, &d.y, &sigma, penalty).unwrap();
            let signs: Vec<f64> = fit.beta_hat.iter().map(|&b| sign(b)).collect();
            let truth: Vec<f64> = d.beta_star.iter().map(|&b| sign(b)).collect();
            assert_eq!(signs, truth, "seed {seed}");
        }
    }
    assert!(both > 0, "events never held jointly");
}

#[test]
fn event_vectors_have_block_sizes() {
    let (d, sigma) = instance(9, 40, 3, 1.0, 9);
    let ev = lemma_events(&d, &sigma, PenaltyConfig::new(5.0, 1.0).unwrap()).unwrap();
    assert_eq!((ev.wn1.len(), ev.wn2.len(), ev.margin_a.len(), ev.margin_b.len()), (3, 6, 3, 6));
    let w = d.x.t_matvec(&d.epsilon).unwrap();
    assert!((ev.wn1[0] - w[0] / 40f64.sqrt()).abs() < 1e-12);
    assert!(conditions::eta_bound_rhs(40, 1.0, &[2.0, 2.0]) > 0.0);
}
