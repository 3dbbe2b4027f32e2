//! Comparisons against dense linear algebra in nalgebra.

use std::sync::Arc;

use balpa_core::generators::{gen_eq_qp, gen_lasso_eq};
use balpa_core::kkt::kkt_oracle;
use balpa_core::linalg::Cholesky;
use balpa_core::smooth::{LeastSquares, SampleLoss, SampleLossKind, SmoothFunction, SumConvention};
use balpa_core::solvers::{build_dual_metric, build_iterative};
use balpa_core::{lift_problem, CompositeProblem, CsrMatrix, LinearOperator, Matrix, ProxTerm};
use nalgebra::{DMatrix, DVector};
use proptest::prelude::*;

fn na(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_fn(m.rows(), m.cols(), |i, j| m[(i, j)])
}

fn rel(a: &[f64], b: &[f64]) -> f64 {
    let d: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt();
    let s: f64 = b.iter().map(|y| y * y).sum::<f64>().sqrt();
    d / s.max(1.0)
}

fn matrix(rows: usize, cols: usize) -> impl Strategy<Value = Matrix> {
    prop::collection::vec(-2.0..2.0f64, rows * cols).prop_map(move |v| Matrix::from_vec(rows, cols, v).unwrap())
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 200, failure_persistence: None, ..ProptestConfig::default() })]

    #[test]
    fn op_norm_matches_eigendecomposition(m in (1..=50usize, 1..=50usize).prop_flat_map(|(r, c)| matrix(r, c))) {
        let est = LinearOperator::dense(m.clone()).op_norm_sq(1e-12, 100_000);
        let a = na(&m);
        let eig = (a.transpose() * &a).symmetric_eigen().eigenvalues.max();
        prop_assert!((est.value - eig).abs() <= 1e-6 * eig.max(1e-300), "{} vs {}", est.value, eig);
    }

    #[test]
    fn cholesky_matches_nalgebra(g in (1..=30usize).prop_flat_map(|n| matrix(n, n)), b in prop::collection::vec(-5.0..5.0f64, 30)) {
        let n = g.rows();
        let mut a = g.gram_inner();
        a.add_diag(0.1);
        let x = Cholesky::factor(&a).unwrap().solve(&b[..n]).unwrap();
        let want = na(&a).cholesky().unwrap().solve(&DVector::from_column_slice(&b[..n]));
        prop_assert!(rel(&x, want.as_slice()) <= 1e-9);
    }
}

#[test]
fn kkt_oracle_matches_lu() {
    for seed in 0..10 {
        let (h, c, d, dv) = gen_eq_qp(12 + seed as usize, 1 + seed as usize % 6, seed);
        let sol = kkt_oracle(&h, &c, &d, &dv).unwrap();
        let (n, p) = (h.rows(), d.rows());
        let mut k = DMatrix::zeros(n + p, n + p);
        k.view_mut((0, 0), (n, n)).copy_from(&na(&h));
        k.view_mut((0, n), (n, p)).copy_from(&na(&d).transpose());
        k.view_mut((n, 0), (p, n)).copy_from(&na(&d));
        let rhs = DVector::from_iterator(n + p, c.iter().map(|v| -v).chain(dv.iter().copied()));
        let want = k.lu().solve(&rhs).unwrap();
        assert!(rel(&sol.x, &want.as_slice()[..n]) <= 1e-10, "seed {seed}");
        assert!(rel(&sol.lambda, &want.as_slice()[n..]) <= 1e-9, "seed {seed}");
    }
}

#[test]
fn dual_metric_solves_q_system() {
    let inst = gen_lasso_eq(15, 2, 6, 4, 50.0, 3).unwrap();
    let lp = lift_problem(&inst.problem(0.0).unwrap()).unwrap();
    let (alpha, gamma) = (0.01, 0.7);
    let dd = na(&lp.operator().to_dense());
    let q = DMatrix::identity(dd.nrows(), dd.nrows()) / gamma + (&dd * dd.transpose()) * alpha;
    let r: Vec<f64> = (0..dd.nrows()).map(|i| (i as f64 * 0.37).sin()).collect();
    let want = q.lu().solve(&DVector::from_column_slice(&r)).unwrap();
    for metric in [build_dual_metric(lp.operator(), alpha, gamma).unwrap(), build_iterative(lp.operator(), alpha, gamma).unwrap()] {
        let (x, _) = metric.solve(&r).unwrap();
        assert!(rel(&x, want.as_slice()) <= 1e-10);
    }
}

#[test]
fn least_squares_gradient_termwise() {
    let inst = gen_lasso_eq(8, 4, 2, 2, 10.0, 9).unwrap();
    let f = inst.smooth(0.3).unwrap();
    let x: Vec<f64> = (0..8).map(|i| 0.2 * i as f64 - 0.5).collect();
    let xv = DVector::from_column_slice(&x);
    let mut want = DVector::zeros(8);
    for (a, rhs) in inst.a.iter().zip(&inst.a_rhs) {
        let a = na(a);
        want += a.transpose() * (&a * &xv - DVector::from_column_slice(rhs));
    }
    want = want / 4.0 + &xv * 0.3;
    assert!(rel(&f.gradient(&x), want.as_slice()) <= 1e-12);
    // L = (1/m) sum ||A_i^T A_i|| + ridge
    let lip: f64 = inst.a.iter().map(|a| (na(a).transpose() * na(a)).symmetric_eigen().eigenvalues.max()).sum::<f64>() / 4.0 + 0.3;
    assert!((f.lipschitz() - lip).abs() <= 1e-6 * lip);
}

#[test]
fn sample_losses_against_formulas() {
    let rows = vec![vec![(0, 1.0), (2, -0.5)], vec![(1, 2.0)], vec![(0, 0.3), (1, 0.3), (2, 0.3)]];
    let a = CsrMatrix::from_rows(3, &rows).unwrap();
    let b = vec![1.0, -1.0, 1.0];
    let x = [0.4, -0.2, 0.9];
    let ad = na(&a.to_dense());
    let xv = DVector::from_column_slice(&x);

    let lin = SampleLoss::new(a.clone(), b.clone(), SampleLossKind::Squared, 1.0).unwrap();
    let want = ad.transpose() * (&ad * &xv - DVector::from_column_slice(&b)) / 3.0 + &xv;
    assert!(rel(&lin.gradient(&x), want.as_slice()) <= 1e-12);

    let logi = SampleLoss::new(a, b.clone(), SampleLossKind::Logistic, 1.0).unwrap();
    let z = &ad * &xv;
    let mut want = xv.clone();
    for i in 0..3 {
        let s = -b[i] / (1.0 + (b[i] * z[i]).exp());
        want += ad.row(i).transpose() * (s / 3.0);
    }
    assert!(rel(&logi.gradient(&x), want.as_slice()) <= 1e-12);

    // one sample at the origin: -b a / 2
    let one = SampleLoss::new(CsrMatrix::from_rows(2, &[vec![(0, 0.5), (1, 2.0)]]).unwrap(), vec![1.0], SampleLossKind::Logistic, 1.0).unwrap();
    assert_eq!(one.gradient(&[0.0, 0.0]), vec![-0.25, -1.0]);
}

#[test]
fn lifting_preserves_values() {
    let inst = gen_lasso_eq(6, 2, 3, 2, 10.0, 4).unwrap();
    let p = inst.problem(0.0).unwrap();
    let lp = lift_problem(&p).unwrap();
    let x: Vec<f64> = (0..6).map(|i| (i as f64).cos()).collect();
    let y: Vec<f64> = vec![0.5, -2.0, 1.25];
    let mut big = x.clone();
    big.extend(&y);
    assert_eq!(lp.smooth_value(&big), p.f.value(&x));
    assert_eq!(lp.prox_value(&big), p.r.value(&y));
    assert_eq!(lp.objective(&lp.lift_point(&x)), p.objective(&x));

    // the lifted operator is [D 0; B -I]
    let want_top = na(&inst.d) * DVector::from_column_slice(&x);
    let want_bot = na(&inst.b) * DVector::from_column_slice(&x) - DVector::from_column_slice(&y);
    let got = lp.operator().apply(&big).unwrap();
    assert!(rel(&got[..2], want_top.as_slice()) <= 1e-14);
    assert!(rel(&got[2..], want_bot.as_slice()) <= 1e-14);
}

#[test]
fn l2_norm_term_in_lifted_problem() {
    let f: Arc<dyn SmoothFunction> = Arc::new(LeastSquares::new(vec![(Matrix::identity(2), vec![1.0, 2.0])], SumConvention::Sum).unwrap());
    let b = LinearOperator::dense(Matrix::from_rows(&[&[1.0, 1.0]]).unwrap());
    let p = CompositeProblem::new(f, ProxTerm::L2Norm { weight: 0.5 }, b, LinearOperator::zero(0, 2), vec![]).unwrap();
    let lp = lift_problem(&p).unwrap();
    assert_eq!(lp.objective(&lp.lift_point(&[1.0, -3.0])), p.objective(&[1.0, -3.0]));
    assert_eq!(p.objective(&[1.0, -3.0]), 0.5 * (0.0 + 25.0) + 0.5 * 2.0);
}
