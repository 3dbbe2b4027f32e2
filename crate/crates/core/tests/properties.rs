//! Property suites, 1000 seeded cases each.

use balpa_core::distributed::{metropolis_mixing, Topology};
use balpa_core::prox::{Block, ProxTerm};
use balpa_core::smooth::{LeastSquares, SmoothFunction, SumConvention};
use balpa_core::solvers::{build_dual_metric, dual_update_with_residual};
use balpa_core::stochastic::{estimator_variance_probe, schedule_step, EstimatorKind, GradientEstimator, StepsizeSchedule};
use balpa_core::{CsrMatrix, LinearOperator, Matrix};
use proptest::prelude::*;

fn config() -> ProptestConfig {
    ProptestConfig { cases: 1000, failure_persistence: None, ..ProptestConfig::default() }
}

fn pair(n: usize) -> impl Strategy<Value = (Vec<f64>, Vec<f64>)> {
    (prop::collection::vec(-10.0..10.0f64, n), prop::collection::vec(-10.0..10.0f64, n))
}

fn simple_term() -> impl Strategy<Value = ProxTerm> {
    prop_oneof![
        Just(ProxTerm::Zero),
        (0.0..5.0f64).prop_map(|weight| ProxTerm::L1 { weight }),
        (0.0..5.0f64).prop_map(|weight| ProxTerm::L2Norm { weight }),
        (0.0..5.0f64).prop_map(|weight| ProxTerm::SquaredL2 { weight }),
    ]
}

/// A catalog term on vectors of length 6.
fn term() -> impl Strategy<Value = ProxTerm> {
    prop_oneof![
        simple_term(),
        (simple_term(), simple_term(), 1..6usize)
            .prop_map(|(a, b, cut)| ProxTerm::separable(vec![(Block::new(0, cut), a), (Block::new(cut, 6 - cut), b)], 6).unwrap()),
        (simple_term(), prop_oneof![-3.0..-0.2f64, 0.2..3.0f64], prop::collection::vec(-2.0..2.0f64, 6))
            .prop_map(|(t, scale, shift)| ProxTerm::ScaledTranslated { inner: Box::new(t), scale, shift }),
    ]
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

proptest! {
    #![proptest_config(config())]

    #[test]
    fn prox_is_firmly_nonexpansive(t in term(), (x, y) in pair(6), alpha in 0.01..5.0f64) {
        let dp = sub(&t.prox(&x, alpha).unwrap(), &t.prox(&y, alpha).unwrap());
        let lhs = dot(&dp, &dp);
        let rhs = dot(&dp, &sub(&x, &y));
        prop_assert!(lhs <= rhs + 1e-10 * (1.0 + rhs.abs()), "{lhs} > {rhs}");
    }

    #[test]
    fn l1_moreau_identity(y in prop::collection::vec(-10.0..10.0f64, 1..10), w in 0.0..5.0f64, alpha in 0.01..5.0f64) {
        let p = ProxTerm::L1 { weight: w }.prox(&y, alpha).unwrap();
        let t = alpha * w;
        for (pi, yi) in p.iter().zip(&y) {
            // exact up to the rounding of |y| - t
            prop_assert!((pi + yi.clamp(-t, t) - yi).abs() <= f64::EPSILON * yi.abs());
        }
    }

    #[test]
    fn prox_minimizes_its_objective(t in term(), y in prop::collection::vec(-10.0..10.0f64, 6), alpha in 0.01..5.0f64, seed in any::<u64>()) {
        let p = t.prox(&y, alpha).unwrap();
        let obj = |v: &[f64]| t.value(v) + dot(&sub(v, &y), &sub(v, &y)) / (2.0 * alpha);
        let best = obj(&p);
        let mut s = seed;
        for k in 0..100 {
            let scale = 10f64.powi(-(k % 6));
            let v: Vec<f64> = p.iter().map(|pi| {
                s = s.wrapping_mul(6364136223846793005).wrapping_add(1442695040888963407);
                pi + scale * (((s >> 11) as f64 / (1u64 << 53) as f64) - 0.5)
            }).collect();
            prop_assert!(best <= obj(&v) + 1e-12 * (1.0 + best.abs()), "perturbation {k}: {best} > {}", obj(&v));
        }
    }

    #[test]
    fn adjoint_consistency(
        (r, c, data, v, w, mask) in (1..8usize, 1..8usize).prop_flat_map(|(r, c)| (
            Just(r), Just(c),
            prop::collection::vec(-3.0..3.0f64, r * c),
            prop::collection::vec(-3.0..3.0f64, c + r),
            prop::collection::vec(-3.0..3.0f64, 2 * r + c),
            any::<u64>(),
        ))
    ) {
        let m = Matrix::from_vec(r, c, data).unwrap();
        let rows: Vec<Vec<(usize, f64)>> =
            (0..r).map(|i| (0..c).filter(|j| mask >> ((i * c + j) % 64) & 1 == 1).map(|j| (j, m[(i, j)])).collect()).collect();
        let sparse = LinearOperator::sparse(CsrMatrix::from_rows(c, &rows).unwrap());
        let ops = [
            LinearOperator::dense(m.clone()),
            sparse.clone(),
            LinearOperator::zero(r, c),
            LinearOperator::scaled_identity(c, 1.7),
            LinearOperator::lifted(LinearOperator::dense(m.clone()), sparse.clone()).unwrap(),
            LinearOperator::block_diagonal(vec![LinearOperator::dense(m.clone()), LinearOperator::identity(r)]),
            LinearOperator::stacked(vec![sparse, LinearOperator::dense(m.clone())]).unwrap(),
        ];
        for op in &ops {
            let (vv, ww) = (&v[..op.cols()], &w[..op.rows()]);
            let lhs = dot(&op.apply(vv).unwrap(), ww);
            let rhs = dot(vv, &op.adjoint(ww).unwrap());
            prop_assert!((lhs - rhs).abs() <= 1e-10 * (1.0 + lhs.abs().max(rhs.abs())), "{lhs} vs {rhs}");
        }
    }

    #[test]
    fn estimators_are_unbiased(m in 2..6usize, n in 1..4usize, seed in any::<u64>(), which in 0..4usize, steps in 0..10usize) {
        let blocks = (0..m).map(|i| {
            let a = Matrix::from_fn(2, n, |r, c| ((seed >> ((i * 7 + r * 3 + c) % 61)) & 7) as f64 * 0.25 - 0.9);
            (a, vec![i as f64 * 0.5 - 1.0, 0.25])
        }).collect();
        let f = LeastSquares::new(blocks, SumConvention::Mean).unwrap();
        let kind = [
            EstimatorKind::Full,
            EstimatorKind::Minibatch { batch: 1 },
            EstimatorKind::Saga,
            EstimatorKind::Lsvrg { p: None },
        ][which];
        let mut est = GradientEstimator::new(kind, &f, seed).unwrap();
        let mut x = vec![0.3; n];
        est.initialize(&f, &x).unwrap();
        let mut g = vec![0.0; n];
        for k in 0..steps {
            est.estimate(&f, &x, &mut g).unwrap();
            for (xi, gi) in x.iter_mut().zip(&g) {
                *xi -= 0.05 * gi + 0.01 * k as f64;
            }
        }
        let probe = estimator_variance_probe(&est, &f, &x, 64).unwrap();
        prop_assert!(probe.exhaustive || kind == EstimatorKind::Full);
        let full = f.gradient(&x);
        for (a, b) in probe.mean.iter().zip(&full) {
            prop_assert!((a - b).abs() <= 1e-14 * (1.0 + b.abs()), "{a} vs {b}");
        }
    }

    #[test]
    fn saga_table_tracks_shadow(m in 2..6usize, seed in any::<u64>(), steps in 1..30usize) {
        let blocks = (0..m).map(|i| (Matrix::from_fn(2, 2, |r, c| ((i + r + 2 * c) % 5) as f64 - 2.0), vec![1.0, i as f64])).collect();
        let f = LeastSquares::new(blocks, SumConvention::Mean).unwrap();
        let mut est = GradientEstimator::new(EstimatorKind::Saga, &f, seed).unwrap();
        let mut x = vec![0.5, -0.5];
        est.initialize(&f, &x).unwrap();
        let mut visited = vec![x.clone()];
        let mut g = vec![0.0; 2];
        let mut gi = vec![0.0; 2];
        for _ in 0..steps {
            est.estimate(&f, &x, &mut g).unwrap();
            visited.push(x.clone());
            // every entry is a component gradient at some visited point
            let mut mean = [0.0; 2];
            for i in 0..m {
                let entry = est.table_entry(i).unwrap();
                let hit = visited.iter().any(|p| {
                    f.component_gradient_into(i, p, &mut gi);
                    sub(entry, &gi).iter().all(|d| d.abs() <= 1e-12)
                });
                prop_assert!(hit, "entry {i} matches no visited point");
                mean[0] += entry[0] / m as f64;
                mean[1] += entry[1] / m as f64;
            }
            let tm = est.table_mean().unwrap();
            prop_assert!((tm[0] - mean[0]).abs() <= 1e-12 && (tm[1] - mean[1]).abs() <= 1e-12);
            x[0] -= 0.1 * g[0];
            x[1] -= 0.1 * g[1];
        }
        // one pass to fill the table plus one component per step
        prop_assert_eq!(est.component_evals(), (m + steps) as u64);
        prop_assert!((est.epochs() - est.component_evals() as f64 / m as f64).abs() <= 1e-15);
    }

    #[test]
    fn schedules_decrease_under_cap(c in 1.0..1e3f64, mu in 0.01..10.0f64, horizon in 1..1_000_000usize, k in 0..999_999usize, which in 0..4usize) {
        let s = [
            StepsizeSchedule::constant(1.0 / c),
            StepsizeSchedule::diminishing(c),
            StepsizeSchedule::horizon(c, horizon),
            StepsizeSchedule::strongly_convex(c, mu),
        ][which];
        let (a0, _) = schedule_step(&s, k).unwrap();
        let (a1, _) = schedule_step(&s, k + 1).unwrap();
        prop_assert!(a1 <= a0 && a0 <= s.alpha_bar && a0 > 0.0);
    }

    #[test]
    fn metropolis_invariants(n in 2..12usize, extra in prop::collection::vec((0..12usize, 0..12usize), 0..30), tree in any::<bool>()) {
        // a spanning path or star keeps the graph connected
        let mut edges: Vec<(usize, usize)> = (1..n).map(|i| if tree { (0, i) } else { (i - 1, i) }).collect();
        edges.extend(extra.into_iter().map(|(a, b)| (a % n, b % n)).filter(|(a, b)| a != b));
        let t = Topology::from_edges(n, &edges).unwrap();
        let u = metropolis_mixing(&t);
        for i in 0..n {
            let row: f64 = (0..n).map(|j| u[(i, j)]).sum();
            prop_assert!((row - 1.0).abs() <= 1e-12);
            for j in 0..n {
                prop_assert!(u[(i, j)] >= 0.0);
                prop_assert_eq!(u[(i, j)], u[(j, i)]);
                if i != j {
                    prop_assert_eq!(u[(i, j)] > 0.0, t.neighbors(i).contains(&j));
                }
            }
        }
        // (I - U) 1 = 0 and x^T (I - U) x > 0 for x orthogonal to 1
        let x: Vec<f64> = (0..n).map(|i| (i as f64 * 1.3).sin()).collect();
        let mean = x.iter().sum::<f64>() / n as f64;
        let x: Vec<f64> = x.iter().map(|v| v - mean).collect();
        let ux = u.mul_vec(&x).unwrap();
        let form = dot(&x, &sub(&x, &ux));
        prop_assert!(form > 1e-12 * dot(&x, &x));
        let one = u.mul_vec(&vec![1.0; n]).unwrap();
        prop_assert!(one.iter().all(|v| (v - 1.0).abs() <= 1e-12));
    }

    #[test]
    fn dual_update_residual(rows in 1..12usize, cols in 1..12usize, seed in any::<u64>(), alpha in 1e-4..10.0f64, gamma in 0.05..5.0f64) {
        let d = Matrix::from_fn(rows, cols, |i, j| (((seed >> ((i * 5 + j) % 60)) & 15) as f64 - 7.5) * 10f64.powi((i % 3) as i32));
        let op = LinearOperator::dense(d);
        let metric = build_dual_metric(&op, alpha, gamma).unwrap();
        let xbar: Vec<f64> = (0..cols).map(|j| (j as f64 + seed as f64 * 1e-19).cos()).collect();
        let dvec: Vec<f64> = (0..rows).map(|i| i as f64 - 2.0).collect();
        let lambda = vec![0.5; rows];
        let (next, res) = dual_update_with_residual(&metric, &lambda, &op, &xbar, &dvec).unwrap();
        let r = sub(&op.apply(&xbar).unwrap(), &dvec);
        let mut q = vec![0.0; rows];
        metric.apply_q(&sub(&next, &lambda), &mut q);
        let check = sub(&q, &r).iter().map(|v| v * v).sum::<f64>().sqrt();
        let scale = 1.0 + dot(&r, &r).sqrt();
        prop_assert!(res <= 1e-10 * scale && check <= 1e-10 * scale, "{res} {check}");
    }
}
