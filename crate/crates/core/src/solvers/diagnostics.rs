//! Convergence measures: distances in the `H` and `M` metrics, ergodic
//! averages, optimality gaps and the Bregman gap.
//!
//! With `W = (X, Lambda)`:
//!
//! ```text
//! H:  (X, Lambda) -> ((1/a) X, Q Lambda)
//! M:  (X, Lambda) -> ((1/a - L/2) X, (Q - a D D^T) Lambda)
//! ```

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::problem::LiftedProblem;

use super::metric::DualMetric;
use super::state::SaddleState;

/// `max(1 + ||Lambda*||, 2 ||Lambda*||)`
pub fn rho(lambda_star: &[f64]) -> f64 {
    let n = linalg::norm(lambda_star);
    (1.0 + n).max(2.0 * n)
}

/// `(1/alpha) ||dx||^2 + ||dl||_Q^2`
pub fn h_norm_sq(metric: &DualMetric, alpha: f64, dx: &[f64], dl: &[f64]) -> f64 {
    linalg::norm_sq(dx) / alpha + metric.q_norm_sq(dl)
}

/// `(tau - L/2) ||dx||^2 + ||dl||_J^2` with `J = Q - alpha D D^T`; `tau` is
/// `1/alpha` for exact gradients.
pub fn m_norm_sq(
    metric: &DualMetric,
    lp: &LiftedProblem,
    alpha: f64,
    tau: f64,
    dx: &[f64],
    dl: &[f64],
) -> Result<f64> {
    let coef = tau - lp.lipschitz() / 2.0;
    if !(coef > 0.0) {
        return Err(Error::MetricNotPositive("1/alpha - L/2 > 0"));
    }
    metric.check_j_positive(lp.operator(), alpha)?;
    Ok(coef * linalg::norm_sq(dx) + metric.j_norm_sq(lp.operator(), alpha, dl))
}

#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    /// `||W^k - W*||_H^2`
    pub h_dist_sq_before: Option<f64>,
    /// `||W^{k+1} - W*||_H^2`
    pub h_dist_sq_after: Option<f64>,
    /// `||V^{k+1} - W^k||_M^2` with `V^{k+1} = (Xbar^k, Lambda^{k+1})`
    pub m_residual_sq: f64,
    /// `Phi(Xbar^k) - Phi(X*)`
    pub objective_gap: Option<f64>,
    /// `||D Xbar^k - d||`
    pub violation: f64,
    pub rho: Option<f64>,
}

/// Measures for the step `prev -> next`, where `next.xbar` is `Xbar^k` and
/// `next.lambda` is `Lambda^{k+1}`. `wstar = (X*, Lambda*)` enables the
/// distance and gap entries.
pub fn diagnostics(
    prev: &SaddleState,
    next: &SaddleState,
    metric: &DualMetric,
    lp: &LiftedProblem,
    alpha: f64,
    wstar: Option<(&[f64], &[f64])>,
) -> Result<Diagnostics> {
    check_dim("diagnostics: X", lp.primal_dim(), prev.x.len())?;
    check_dim("diagnostics: Lambda", lp.dual_dim(), prev.lambda.len())?;
    let dx = linalg::sub(&next.xbar, &prev.x);
    let dl = linalg::sub(&next.lambda, &prev.lambda);
    let m_residual_sq = m_norm_sq(metric, lp, alpha, 1.0 / alpha, &dx, &dl)?;
    let violation = lp.constraint_violation(&next.xbar);
    let mut out = Diagnostics {
        h_dist_sq_before: None,
        h_dist_sq_after: None,
        m_residual_sq,
        objective_gap: None,
        violation,
        rho: None,
    };
    if let Some((xs, ls)) = wstar {
        check_dim("diagnostics: X*", lp.primal_dim(), xs.len())?;
        check_dim("diagnostics: Lambda*", lp.dual_dim(), ls.len())?;
        let h = |s: &SaddleState| h_norm_sq(metric, alpha, &linalg::sub(&s.x, xs), &linalg::sub(&s.lambda, ls));
        out.h_dist_sq_before = Some(h(prev));
        out.h_dist_sq_after = Some(h(next));
        out.objective_gap = Some(lp.objective(&next.xbar) - lp.objective(xs));
        out.rho = Some(rho(ls));
    }
    Ok(out)
}

/// Running means `Xbar_K = mean(Xbar^k)`, `Lambda_K = mean(Lambda^{k+1})`
/// and `X_K = mean(X^{k+1})` over `k = 0..K-1`.
#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicAverage {
    xbar: Vec<f64>,
    lambda: Vec<f64>,
    x: Vec<f64>,
    count: usize,
}

impl ErgodicAverage {
    pub fn new(primal_dim: usize, dual_dim: usize) -> Self {
        ErgodicAverage { xbar: vec![0.0; primal_dim], lambda: vec![0.0; dual_dim], x: vec![0.0; primal_dim], count: 0 }
    }

    /// Adds the state produced by one step.
    pub fn push(&mut self, next: &SaddleState) {
        self.count += 1;
        let w = 1.0 / self.count as f64;
        for (m, v) in self.xbar.iter_mut().zip(&next.xbar) {
            *m += (v - *m) * w;
        }
        for (m, v) in self.lambda.iter_mut().zip(&next.lambda) {
            *m += (v - *m) * w;
        }
        for (m, v) in self.x.iter_mut().zip(&next.x) {
            *m += (v - *m) * w;
        }
    }

    pub fn count(&self) -> usize {
        self.count
    }

    pub fn xbar(&self) -> &[f64] {
        &self.xbar
    }

    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    pub fn x(&self) -> &[f64] {
        &self.x
    }
}

/// `(Xbar_K, Lambda_K)` from the states after each of `K` steps.
pub fn ergodic_average(states: &[SaddleState]) -> Result<(Vec<f64>, Vec<f64>)> {
    let first = states.first().ok_or(Error::Empty("state trace"))?;
    let mut avg = ErgodicAverage::new(first.xbar.len(), first.lambda.len());
    for s in states {
        avg.push(s);
    }
    Ok((avg.xbar, avg.lambda))
}

/// `Phi(X) - Phi* + rho ||D X - d||`; nonnegative for any `X` when `rho`
/// exceeds `||Lambda*||`.
pub fn merit(lp: &LiftedProblem, x: &[f64], phi_star: f64, rho: f64) -> f64 {
    lp.objective(x) - phi_star + rho * lp.constraint_violation(x)
}

const GAUSS3: [(f64, f64); 3] = [
    (0.112_701_665_379_258_3, 5.0 / 18.0),
    (0.5, 8.0 / 18.0),
    (0.887_298_334_620_741_7, 5.0 / 18.0),
];

/// `D_F(X, X*) = F(X) - F(X*) - <grad F(X*), X - X*>`, evaluated as
/// `int_0^1 <grad F(X* + t e) - grad F(X*), e> dt` with `e = X - X*` by
/// three-point Gauss-Legendre quadrature (exact for quadratic `F`).
pub fn bregman_smooth(lp: &LiftedProblem, x: &[f64], x_star: &[f64]) -> f64 {
    let e = linalg::sub(x, x_star);
    let g_star = lp.gradient(x_star);
    let mut pt = vec![0.0; x.len()];
    let mut g = vec![0.0; x.len()];
    GAUSS3
        .iter()
        .map(|&(t, w)| {
            for i in 0..pt.len() {
                pt[i] = x_star[i] + t * e[i];
            }
            lp.gradient_into(&pt, &mut g);
            w * (linalg::dot(&g, &e) - linalg::dot(&g_star, &e))
        })
        .sum()
}

/// `D_R(X, X*) = R(X) - R(X*) - <s*, X - X*>` with the subgradient
/// `s* = -grad F(X*) - D^T Lambda*` selected by the saddle point.
pub fn bregman_prox(lp: &LiftedProblem, x: &[f64], x_star: &[f64], lambda_star: &[f64]) -> f64 {
    let mut s = lp.gradient(x_star);
    let mut t = vec![0.0; x.len()];
    lp.operator().adjoint_into(lambda_star, &mut t);
    for (si, ti) in s.iter_mut().zip(&t) {
        *si = -(*si + ti);
    }
    lp.prox_value(x) - lp.prox_value(x_star) - linalg::dot(&s, &linalg::sub(x, x_star))
}

/// `D_F(X_K, X*) + D_R(Xtilde_K, X*)`.
pub fn bregman_gap(lp: &LiftedProblem, x_k: &[f64], x_tilde: &[f64], x_star: &[f64], lambda_star: &[f64]) -> f64 {
    bregman_smooth(lp, x_k, x_star) + bregman_prox(lp, x_tilde, x_star, lambda_star)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::operator::LinearOperator;
    use crate::problem::{lift_problem, CompositeProblem};
    use crate::smooth::Quadratic;
    use crate::solvers::metric::build_dual_metric;
    use alloc::sync::Arc;

    fn qp() -> LiftedProblem {
        let f = Arc::new(Quadratic::new(Matrix::from_diag(&[1.0, 3.0]), vec![0.5, -1.0]).unwrap());
        let d = LinearOperator::dense(Matrix::from_rows(&[&[1.0, 1.0]]).unwrap());
        lift_problem(&CompositeProblem::equality_constrained(f, d, vec![2.0]).unwrap()).unwrap()
    }

    #[test]
    fn rho_formula() {
        assert_eq!(rho(&[3.0, 0.0]), 6.0);
        assert_eq!(rho(&[0.5]), 1.5);
    }

    #[test]
    fn h_norm_primal_only() {
        let lp = qp();
        let m = build_dual_metric(lp.operator(), 0.5, 1.0).unwrap();
        assert_eq!(h_norm_sq(&m, 0.5, &[1.0, 2.0], &[0.0]), 10.0);
    }

    #[test]
    fn zero_distance_at_saddle() {
        let lp = qp();
        let m = build_dual_metric(lp.operator(), 0.2, 1.0).unwrap();
        let xs = [1.0, 2.0];
        let ls = [0.3];
        let s = SaddleState::at(&lp, xs.to_vec(), ls.to_vec()).unwrap();
        let d = diagnostics(&s, &s, &m, &lp, 0.2, Some((&xs, &ls))).unwrap();
        assert_eq!(d.h_dist_sq_before, Some(0.0));
        assert_eq!(d.h_dist_sq_after, Some(0.0));
        assert_eq!(d.m_residual_sq, 0.0);
        assert_eq!(d.objective_gap, Some(0.0));
    }

    #[test]
    fn m_norm_needs_small_alpha() {
        let lp = qp();
        // L = 3, so 1/alpha - L/2 <= 0 at alpha = 1
        let m = build_dual_metric(lp.operator(), 1.0, 1.0).unwrap();
        assert_eq!(
            m_norm_sq(&m, &lp, 1.0, 1.0, &[1.0, 0.0], &[0.0]),
            Err(Error::MetricNotPositive("1/alpha - L/2 > 0"))
        );
    }

    #[test]
    fn ergodic_means() {
        let mk = |v: f64| SaddleState { x: vec![v], xbar: vec![2.0 * v], lambda: vec![-v], iter: 0, grad: None };
        let states = [mk(1.0), mk(2.0), mk(6.0)];
        let (xb, l) = ergodic_average(&states).unwrap();
        assert_eq!(xb, vec![6.0]);
        assert_eq!(l, vec![-3.0]);
        assert_eq!(ergodic_average(&states[..1]).unwrap(), (vec![2.0], vec![-1.0]));
        assert!(ergodic_average(&[]).is_err());
    }

    #[test]
    fn bregman_quadrature_matches_closed_form() {
        let lp = qp();
        let (x, xs) = ([0.3, -1.0], [1.0, 2.0]);
        // D_F = 1/2 (x - x*)^T H (x - x*)
        let expect = 0.5 * (0.49 * 1.0 + 9.0 * 3.0);
        assert!((bregman_smooth(&lp, &x, &xs) - expect).abs() < 1e-13);
    }
}
