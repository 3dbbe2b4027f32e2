//! Single iterations of BALPA and of the reference primal-dual methods.
//!
//! All methods share the primal step `Xbar = prox_R^a(X - a (D^T Lambda + grad))`
//! and differ in how the dual variable and the next primal point are formed.

use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use crate::error::{check_dim, Error, Result};
use crate::linalg;
use crate::operator::LinearOperator;
use crate::problem::LiftedProblem;

use super::metric::DualMetric;
use super::state::SaddleState;

/// Dual-solve residual allowed per unit of `1 + ||D Xbar - d||`.
pub const DUAL_RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SolverKind {
    Balpa,
    CondatVu,
    TriPd,
    Pd3o,
    Pdfp,
    Afba,
}

impl SolverKind {
    pub const ALL: [SolverKind; 6] =
        [SolverKind::Balpa, SolverKind::CondatVu, SolverKind::TriPd, SolverKind::Pd3o, SolverKind::Pdfp, SolverKind::Afba];

    pub fn name(self) -> &'static str {
        match self {
            SolverKind::Balpa => "balpa",
            SolverKind::CondatVu => "condat_vu",
            SolverKind::TriPd => "tripd",
            SolverKind::Pd3o => "pd3o",
            SolverKind::Pdfp => "pdfp",
            SolverKind::Afba => "afba",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        SolverKind::ALL.into_iter().find(|k| k.name() == s)
    }

    /// Gradient evaluations charged per iteration.
    pub fn gradients_per_iter(self) -> u32 {
        match self {
            SolverKind::Pd3o | SolverKind::Pdfp => 2,
            _ => 1,
        }
    }

    /// Prox evaluations per iteration.
    pub fn proxes_per_iter(self) -> u32 {
        match self {
            SolverKind::Pdfp => 2,
            _ => 1,
        }
    }
}

impl fmt::Display for SolverKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Quantities measured during one step, used by the driver for traces and
/// stopping tests.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct StepStats {
    /// `||Q (Lambda+ - Lambda) - (D Xbar - d)||` (zero for explicit dual steps).
    pub dual_residual: f64,
    /// `||D Xbar - d||`
    pub xbar_violation: f64,
    /// `||Xbar - X||^2`
    pub primal_move_sq: f64,
    /// `||Lambda+ - Lambda||^2`
    pub dual_move_sq: f64,
    /// `||Lambda+ - Lambda||_Q^2` (BALPA only)
    pub dual_move_q_sq: f64,
    /// `||D^T (Lambda+ - Lambda)||^2`
    pub dual_move_dt_sq: f64,
    pub gradient_evals: u32,
}

fn constraint_residual(op: &LinearOperator, x: &[f64], dvec: &[f64]) -> Vec<f64> {
    let mut r = vec![0.0; op.rows()];
    op.apply_into(x, &mut r);
    for (ri, di) in r.iter_mut().zip(dvec) {
        *ri -= di;
    }
    r
}

/// `Xbar = prox_R^alpha(X - alpha (D^T Lambda + g))`.
fn primal_step(lp: &LiftedProblem, x: &[f64], lambda: &[f64], g: &[f64], alpha: f64) -> Vec<f64> {
    let mut t = vec![0.0; lp.primal_dim()];
    lp.operator().adjoint_into(lambda, &mut t);
    let mut xbar: Vec<f64> = x.iter().zip(&t).zip(g).map(|((xi, ti), gi)| xi - alpha * (ti + gi)).collect();
    lp.prox_in_place(&mut xbar, alpha);
    xbar
}

/// Dual step `Lambda+ = Lambda + Q^{-1}(D Xbar - d)`, i.e. the minimizer of
/// `1/2 ||L - Lambda||_Q^2 + <L, d - D Xbar>`. Returns the new dual and the
/// residual of the linear solve.
pub fn dual_update_with_residual(
    metric: &DualMetric,
    lambda: &[f64],
    op: &LinearOperator,
    xbar: &[f64],
    dvec: &[f64],
) -> Result<(Vec<f64>, f64)> {
    check_dim("dual update: metric", op.rows(), metric.dim())?;
    check_dim("dual update: Lambda", op.rows(), lambda.len())?;
    check_dim("dual update: Xbar", op.cols(), xbar.len())?;
    check_dim("dual update: d", op.rows(), dvec.len())?;
    let r = constraint_residual(op, xbar, dvec);
    let (dl, res) = metric.solve(&r)?;
    if !(res <= DUAL_RESIDUAL_TOL * (1.0 + linalg::norm(&r))) {
        return Err(Error::LinearSolveFailed { iterations: 0, residual: res });
    }
    Ok((linalg::add(lambda, &dl), res))
}

pub fn dual_update(
    metric: &DualMetric,
    lambda: &[f64],
    op: &LinearOperator,
    xbar: &[f64],
    dvec: &[f64],
) -> Result<Vec<f64>> {
    dual_update_with_residual(metric, lambda, op, xbar, dvec).map(|(l, _)| l)
}

fn check_step_inputs(state: &SaddleState, lp: &LiftedProblem, g: &[f64]) -> Result<()> {
    check_dim("step: X", lp.primal_dim(), state.x.len())?;
    check_dim("step: Lambda", lp.dual_dim(), state.lambda.len())?;
    check_dim("step: gradient", lp.primal_dim(), g.len())
}

/// One BALPA iteration in place, with `g` the (possibly stochastic) lifted
/// gradient at `X^k`:
///
/// ```text
/// Xbar    = prox_R^{a_k}(X - a_k (D^T Lambda + g))
/// Lambda+ = Lambda + Q^{-1}(D Xbar - d)
/// X+      = Xbar + a_k D^T (Lambda - Lambda+)
/// ```
pub fn balpa_step_in_place(
    state: &mut SaddleState,
    lp: &LiftedProblem,
    metric: &DualMetric,
    alpha_k: f64,
    g: &[f64],
) -> Result<StepStats> {
    let alpha_bar = metric.alpha_bar();
    if !(alpha_k > 0.0 && alpha_k <= alpha_bar * (1.0 + 1e-12)) {
        return Err(Error::StepsizeOutOfRange { alpha_k, alpha_bar });
    }
    check_step_inputs(state, lp, g)?;
    check_dim("step: metric", lp.dual_dim(), metric.dim())?;
    let op = lp.operator();
    let xbar = primal_step(lp, &state.x, &state.lambda, g, alpha_k);
    let r = constraint_residual(op, &xbar, lp.dvec());
    let (dl, dual_residual) = metric.solve(&r)?;
    let r_norm = linalg::norm(&r);
    if !(dual_residual <= DUAL_RESIDUAL_TOL * (1.0 + r_norm)) {
        return Err(Error::LinearSolveFailed { iterations: 0, residual: dual_residual });
    }
    let mut u = vec![0.0; lp.primal_dim()];
    op.adjoint_into(&dl, &mut u);

    let stats = StepStats {
        dual_residual,
        xbar_violation: r_norm,
        primal_move_sq: linalg::norm_sq(&linalg::sub(&xbar, &state.x)),
        dual_move_sq: linalg::norm_sq(&dl),
        dual_move_q_sq: metric.q_norm_sq(&dl),
        dual_move_dt_sq: linalg::norm_sq(&u),
        gradient_evals: 1,
    };
    for ((xi, xb), ui) in state.x.iter_mut().zip(&xbar).zip(&u) {
        *xi = xb - alpha_k * ui;
    }
    linalg::axpy(1.0, &dl, &mut state.lambda);
    state.xbar = xbar;
    state.iter += 1;
    state.grad = Some(g.to_vec());
    Ok(stats)
}

/// Pure form of [`balpa_step_in_place`].
pub fn balpa_step(
    state: &SaddleState,
    lp: &LiftedProblem,
    metric: &DualMetric,
    alpha_k: f64,
    g: &[f64],
) -> Result<SaddleState> {
    let mut next = state.clone();
    balpa_step_in_place(&mut next, lp, metric, alpha_k, g)?;
    Ok(next)
}

/// One iteration of a reference method with exact gradients, in place.
///
/// ```text
/// C-V, TriPD: X+ = 2 Xbar - X;                                 Lambda+ = Lambda + b (D X+ - d)
/// PD3O:       X+ = 2 Xbar - X + a (grad F(X) - grad F(Xbar));  Lambda+ = Lambda + b (D X+ - d)
/// PDFP:       Lambda+ = Lambda + b (D Xbar - d);  X+ = prox_R^a(X - a (D^T Lambda+ + grad F(X)))
/// AFBA:       Lambda+ = Lambda + b (D Xbar - d);  X+ = Xbar + a D^T (Lambda - Lambda+)
/// ```
pub fn baseline_step_in_place(
    kind: SolverKind,
    state: &mut SaddleState,
    lp: &LiftedProblem,
    alpha: f64,
    beta: f64,
) -> Result<StepStats> {
    if kind == SolverKind::Balpa {
        return Err(Error::UnsupportedSolver("balpa"));
    }
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha, requirement: "alpha > 0" });
    }
    if !(beta > 0.0) {
        return Err(Error::InvalidParameter { name: "beta", value: beta, requirement: "beta > 0" });
    }
    let n = lp.primal_dim();
    check_dim("step: X", n, state.x.len())?;
    check_dim("step: Lambda", lp.dual_dim(), state.lambda.len())?;
    let op = lp.operator();
    let dvec = lp.dvec();
    let gx = lp.gradient(&state.x);
    let xbar = primal_step(lp, &state.x, &state.lambda, &gx, alpha);
    let xbar_violation = linalg::norm(&constraint_residual(op, &xbar, dvec));

    let (x_new, lambda_new) = match kind {
        SolverKind::CondatVu | SolverKind::TriPd | SolverKind::Pd3o => {
            let mut x_new: Vec<f64> = xbar.iter().zip(&state.x).map(|(b, x)| 2.0 * b - x).collect();
            if kind == SolverKind::Pd3o {
                let gbar = lp.gradient(&xbar);
                for i in 0..n {
                    x_new[i] += alpha * (gx[i] - gbar[i]);
                }
            }
            let mut lambda_new = constraint_residual(op, &x_new, dvec);
            for (l, old) in lambda_new.iter_mut().zip(&state.lambda) {
                *l = old + beta * *l;
            }
            (x_new, lambda_new)
        }
        SolverKind::Pdfp | SolverKind::Afba => {
            let mut lambda_new = constraint_residual(op, &xbar, dvec);
            for (l, old) in lambda_new.iter_mut().zip(&state.lambda) {
                *l = old + beta * *l;
            }
            let x_new = if kind == SolverKind::Pdfp {
                primal_step(lp, &state.x, &lambda_new, &gx, alpha)
            } else {
                let dl = linalg::sub(&state.lambda, &lambda_new);
                let mut u = vec![0.0; n];
                op.adjoint_into(&dl, &mut u);
                xbar.iter().zip(&u).map(|(b, ui)| b + alpha * ui).collect()
            };
            (x_new, lambda_new)
        }
        SolverKind::Balpa => unreachable!(),
    };

    let dl = linalg::sub(&lambda_new, &state.lambda);
    let mut u = vec![0.0; n];
    op.adjoint_into(&dl, &mut u);
    let stats = StepStats {
        dual_residual: 0.0,
        xbar_violation,
        primal_move_sq: linalg::norm_sq(&linalg::sub(&xbar, &state.x)),
        dual_move_sq: linalg::norm_sq(&dl),
        dual_move_q_sq: 0.0,
        dual_move_dt_sq: linalg::norm_sq(&u),
        gradient_evals: kind.gradients_per_iter(),
    };
    state.x = x_new;
    state.lambda = lambda_new;
    state.xbar = xbar;
    state.iter += 1;
    state.grad = Some(gx);
    Ok(stats)
}

/// Pure form of [`baseline_step_in_place`].
pub fn baseline_step(
    kind: SolverKind,
    state: &SaddleState,
    lp: &LiftedProblem,
    alpha: f64,
    beta: f64,
) -> Result<SaddleState> {
    let mut next = state.clone();
    baseline_step_in_place(kind, &mut next, lp, alpha, beta)?;
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::problem::{lift_problem, CompositeProblem};
    use crate::smooth::Quadratic;
    use crate::solvers::metric::build_dual_metric;
    use alloc::sync::Arc;

    /// `min 1/2 ||x||^2  s.t.  x1 + x2 = 2`
    fn sum_qp() -> LiftedProblem {
        let f = Arc::new(Quadratic::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap());
        let d = LinearOperator::dense(Matrix::from_rows(&[&[1.0, 1.0]]).unwrap());
        lift_problem(&CompositeProblem::equality_constrained(f, d, vec![2.0]).unwrap()).unwrap()
    }

    #[test]
    fn dual_update_scalar() {
        let op = LinearOperator::dense(Matrix::from_rows(&[&[1.0]]).unwrap());
        let m = build_dual_metric(&op, 1.0, 1.0).unwrap();
        // Q = 2, D Xbar - d = 2
        assert!((dual_update(&m, &[0.0], &op, &[2.0], &[0.0]).unwrap()[0] - 1.0).abs() < 1e-15);
        assert_eq!(dual_update(&m, &[0.7], &op, &[3.0], &[3.0]).unwrap(), vec![0.7]);
    }

    #[test]
    fn balpa_first_step_transcript() {
        let lp = sum_qp();
        let (alpha, gamma) = (0.5, 1.0);
        let m = build_dual_metric(lp.operator(), alpha, gamma).unwrap();
        let s0 = SaddleState::zeros(&lp);
        let s1 = balpa_step(&s0, &lp, &m, alpha, &lp.gradient(&s0.x)).unwrap();
        // Xbar = 0, Q = 1/gamma + alpha * 2 = 2, Lambda1 = (0 - 2) / 2 = -1
        assert_eq!(s1.xbar, vec![0.0, 0.0]);
        assert!((s1.lambda[0] + 1.0).abs() < 1e-15);
        // X1 = Xbar - alpha D^T (Lambda1 - 0) = (0.5, 0.5)
        assert!(s1.x.iter().all(|v| (v - 0.5).abs() < 1e-15));
    }

    #[test]
    fn correction_vanishes_when_feasible() {
        let lp = sum_qp();
        let m = build_dual_metric(lp.operator(), 0.5, 1.0).unwrap();
        // X = (1, 1), Lambda = 0, zero gradient: Xbar = X is feasible
        let s = SaddleState::at(&lp, vec![1.0, 1.0], vec![0.0]).unwrap();
        let next = balpa_step(&s, &lp, &m, 0.5, &[0.0, 0.0]).unwrap();
        assert_eq!(next.x, next.xbar);
        assert_eq!(next.lambda, vec![0.0]);
    }

    #[test]
    fn stepsize_above_cap_is_rejected() {
        let lp = sum_qp();
        let m = build_dual_metric(lp.operator(), 0.5, 1.0).unwrap();
        let s = SaddleState::zeros(&lp);
        assert!(matches!(balpa_step(&s, &lp, &m, 0.6, &[0.0, 0.0]), Err(Error::StepsizeOutOfRange { .. })));
        assert!(matches!(balpa_step(&s, &lp, &m, 0.0, &[0.0, 0.0]), Err(Error::StepsizeOutOfRange { .. })));
    }

    #[test]
    fn condat_vu_first_step_transcript() {
        let lp = sum_qp();
        let s0 = SaddleState::zeros(&lp);
        let s1 = baseline_step(SolverKind::CondatVu, &s0, &lp, 0.5, 0.25).unwrap();
        // Xbar = 0, X+ = 0, Lambda+ = 0 + 0.25 (0 - 2)
        assert_eq!(s1.x, vec![0.0, 0.0]);
        assert_eq!(s1.lambda, vec![-0.5]);
        let s2 = baseline_step(SolverKind::CondatVu, &s1, &lp, 0.5, 0.25).unwrap();
        // Xbar = -0.5 (0 + (-0.5, -0.5)) = (0.25, 0.25), X+ = (0.5, 0.5), Lambda+ = -0.5 + 0.25 (1 - 2)
        assert_eq!(s2.xbar, vec![0.25, 0.25]);
        assert_eq!(s2.x, vec![0.5, 0.5]);
        assert_eq!(s2.lambda, vec![-0.75]);
    }

    #[test]
    fn balpa_rejected_by_baseline_step() {
        let lp = sum_qp();
        let s = SaddleState::zeros(&lp);
        assert_eq!(baseline_step(SolverKind::Balpa, &s, &lp, 0.5, 0.5), Err(Error::UnsupportedSolver("balpa")));
    }

    #[test]
    fn kind_names_round_trip() {
        for k in SolverKind::ALL {
            assert_eq!(SolverKind::parse(k.name()), Some(k));
        }
        assert_eq!(SolverKind::parse("admm"), None);
    }
}
