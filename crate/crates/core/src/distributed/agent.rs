use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, pcg, Cholesky, Matrix};
use crate::prox::ProxTerm;
use crate::smooth::SmoothFunction;
use crate::solvers::{CG_TOL, DUAL_RESIDUAL_TOL};

/// Local systems up to this size are factored densely; larger ones use CG.
pub const AGENT_DENSE_LIMIT: usize = 500;

/// Data held by one agent: `f_i`, `r_i` and `B_i`.
#[derive(Debug, Clone)]
pub struct AgentProblem {
    pub f: Arc<dyn SmoothFunction>,
    pub r: ProxTerm,
    pub b: Matrix,
}

impl AgentProblem {
    pub fn new(f: Arc<dyn SmoothFunction>, r: ProxTerm, b: Matrix) -> Result<Self> {
        check_dim("B_i columns", f.dim(), b.cols())?;
        r.validate(b.rows())?;
        Ok(AgentProblem { f, r, b })
    }

    pub fn dim(&self) -> usize {
        self.f.dim()
    }

    /// Rows of `B_i`, the length of `y_i` and `nu_i`.
    pub fn local_rows(&self) -> usize {
        self.b.rows()
    }

    /// `f_i(x) + r_i(y)`
    pub fn objective(&self, x: &[f64], y: &[f64]) -> f64 {
        self.f.value(x) + self.r.value(y)
    }
}

/// `((alpha + alpha gamma)/gamma) I + (alpha/(1 - gamma)) B B^T`, the local
/// block of the preconditioner.
pub fn agent_dual_matrix(b: &Matrix, alpha: f64, gamma: f64) -> Result<Matrix> {
    check_gamma(gamma)?;
    let (c0, c1) = dual_coefficients(alpha, gamma);
    let mut s = b.gram_outer();
    s.scale_in_place(c1);
    s.add_diag(c0);
    Ok(s)
}

fn check_gamma(gamma: f64) -> Result<()> {
    if gamma > 0.0 && gamma < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidParameter { name: "gamma", value: gamma, requirement: "0 < gamma < 1" })
    }
}

fn dual_coefficients(alpha: f64, gamma: f64) -> (f64, f64) {
    ((alpha + alpha * gamma) / gamma, alpha / (1.0 - gamma))
}

/// Factorization of the local dual system.
#[derive(Debug, Clone)]
pub enum AgentDualFactor {
    Dense { s: Matrix, chol: Cholesky },
    /// Solved by CG through `B_i` when `B_i` has more than
    /// [`AGENT_DENSE_LIMIT`] rows.
    Iterative { b: Matrix, c0: f64, c1: f64, diag: Vec<f64> },
}

impl AgentDualFactor {
    pub fn dim(&self) -> usize {
        match self {
            AgentDualFactor::Dense { chol, .. } => chol.dim(),
            AgentDualFactor::Iterative { b, .. } => b.rows(),
        }
    }

    fn apply(b: &Matrix, c0: f64, c1: f64, v: &[f64], out: &mut [f64]) {
        let mut bt = vec![0.0; b.cols()];
        b.mul_t_vec_into(v, &mut bt);
        b.mul_vec_into(&bt, out);
        for (o, vi) in out.iter_mut().zip(v) {
            *o = c0 * vi + c1 * *o;
        }
    }

    /// Solves `S z = r`, failing when the residual exceeds
    /// `DUAL_RESIDUAL_TOL (1 + ||r||)`.
    pub fn solve(&self, r: &[f64]) -> Result<Vec<f64>> {
        check_dim("local dual right-hand side", self.dim(), r.len())?;
        match self {
            AgentDualFactor::Dense { s, chol } => {
                let z = chol.solve(r)?;
                let res = linalg::dist(&s.mul_vec(&z)?, r);
                if res > DUAL_RESIDUAL_TOL * (1.0 + linalg::norm(r)) {
                    return Err(Error::LinearSolveFailed { iterations: 0, residual: res });
                }
                Ok(z)
            }
            AgentDualFactor::Iterative { b, c0, c1, diag } => {
                let n = r.len();
                let out = pcg(|v, o| Self::apply(b, *c0, *c1, v, o), diag, r, CG_TOL, 10 * n + 100);
                if out.converged {
                    Ok(out.x)
                } else {
                    Err(Error::LinearSolveFailed { iterations: out.iterations, residual: out.relative_residual })
                }
            }
        }
    }
}

/// Factors the local dual system once; requires `0 < gamma < 1`.
pub fn build_agent_dual_factor(b: &Matrix, alpha: f64, gamma: f64) -> Result<AgentDualFactor> {
    check_gamma(gamma)?;
    if !(alpha > 0.0) {
        return Err(Error::InvalidParameter { name: "alpha", value: alpha, requirement: "alpha > 0" });
    }
    if b.rows() <= AGENT_DENSE_LIMIT {
        let s = agent_dual_matrix(b, alpha, gamma)?;
        let chol = Cholesky::factor(&s)?;
        Ok(AgentDualFactor::Dense { s, chol })
    } else {
        let (c0, c1) = dual_coefficients(alpha, gamma);
        let diag = (0..b.rows()).map(|i| c0 + c1 * linalg::norm_sq(b.row(i))).collect();
        Ok(AgentDualFactor::Iterative { b: b.clone(), c0, c1, diag })
    }
}

/// The payload agent `sender` broadcasts in a round.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundMessage {
    pub sender: usize,
    pub round: usize,
    pub payload: Vec<f64>,
}

/// Local iterate of one agent. Duals start at zero.
#[derive(Debug, Clone)]
pub struct AgentState {
    pub id: usize,
    pub round: usize,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub mu: Vec<f64>,
    pub nu: Vec<f64>,
    pub xbar: Vec<f64>,
    pub ybar: Vec<f64>,
    factor: AgentDualFactor,
}

impl AgentState {
    pub fn new(id: usize, problem: &AgentProblem, x0: Vec<f64>, y0: Vec<f64>, alpha: f64, gamma: f64) -> Result<Self> {
        check_dim("x_i^0", problem.dim(), x0.len())?;
        check_dim("y_i^0", problem.local_rows(), y0.len())?;
        let factor = build_agent_dual_factor(&problem.b, alpha, gamma)?;
        let (l, p) = (x0.len(), y0.len());
        Ok(AgentState {
            id,
            round: 0,
            xbar: x0.clone(),
            ybar: y0.clone(),
            x: x0,
            y: y0,
            mu: vec![0.0; l],
            nu: vec![0.0; p],
            factor,
        })
    }

    pub fn factor(&self) -> &AgentDualFactor {
        &self.factor
    }
}

/// `xbar_i = x_i - alpha_k (mu_i + B_i^T nu_i + g_i)` and
/// `ybar_i = prox_{alpha_k r_i}(y_i + alpha_k nu_i)`. Returns the message
/// carrying `xbar_i`.
pub fn agent_local_half(agent: &mut AgentState, problem: &AgentProblem, alpha_k: f64, g: &[f64]) -> Result<RoundMessage> {
    check_dim("local gradient", agent.x.len(), g.len())?;
    let btnu = problem.b.mul_t_vec(&agent.nu)?;
    for i in 0..agent.x.len() {
        agent.xbar[i] = agent.x[i] - alpha_k * (agent.mu[i] + btnu[i] + g[i]);
    }
    for i in 0..agent.y.len() {
        agent.ybar[i] = agent.y[i] + alpha_k * agent.nu[i];
    }
    problem.r.prox_in_place(&mut agent.ybar, alpha_k);
    Ok(RoundMessage { sender: agent.id, round: agent.round, payload: agent.xbar.clone() })
}

/// Dual updates and corrections of one agent, given the messages of all its
/// neighbors. `weights` lists `(j, U_ij)` for every neighbor `j`; `u_ii` is
/// the self weight. `alpha` is the constant of the preconditioner.
#[allow(clippy::too_many_arguments)]
pub fn agent_dual_and_correct(
    agent: &mut AgentState,
    problem: &AgentProblem,
    inbox: &[RoundMessage],
    weights: &[(usize, f64)],
    u_ii: f64,
    alpha: f64,
    gamma: f64,
    alpha_k: f64,
) -> Result<()> {
    let l = agent.x.len();
    let mut mixed: Vec<f64> = agent.xbar.iter().map(|v| u_ii * v).collect();
    for &(j, w) in weights {
        let msg = inbox
            .iter()
            .find(|m| m.sender == j && m.round == agent.round)
            .ok_or(Error::MissingMessage { receiver: agent.id, sender: j })?;
        check_dim("neighbor payload", l, msg.payload.len())?;
        linalg::axpy(w, &msg.payload, &mut mixed);
    }
    let c = gamma / (2.0 * alpha);
    let dmu: Vec<f64> = agent.xbar.iter().zip(&mixed).map(|(xb, m)| c * (xb - m)).collect();

    let mut rhs = problem.b.mul_vec(&agent.xbar)?;
    for (r, yb) in rhs.iter_mut().zip(&agent.ybar) {
        *r -= yb;
    }
    let dnu = agent.factor.solve(&rhs)?;

    let btdnu = problem.b.mul_t_vec(&dnu)?;
    for i in 0..l {
        agent.mu[i] += dmu[i];
        agent.x[i] = agent.xbar[i] - alpha_k * (dmu[i] + btdnu[i]);
    }
    for i in 0..agent.y.len() {
        agent.nu[i] += dnu[i];
        agent.y[i] = agent.ybar[i] + alpha_k * dnu[i];
    }
    agent.round += 1;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::smooth::Quadratic;

    fn scalar_agent(b: f64) -> AgentProblem {
        let f = Arc::new(Quadratic::new(Matrix::identity(1), vec![0.0]).unwrap());
        AgentProblem::new(f, ProxTerm::Zero, Matrix::from_rows(&[&[b]]).unwrap()).unwrap()
    }

    #[test]
    fn dual_factor_values() {
        let s = agent_dual_matrix(&Matrix::from_rows(&[&[1.0]]).unwrap(), 1.0, 0.5).unwrap();
        assert!((s[(0, 0)] - 5.0).abs() < 1e-15);
        let s = agent_dual_matrix(&Matrix::zeros(2, 3), 1.0, 0.5).unwrap();
        assert_eq!(s, Matrix::from_diag(&[3.0, 3.0]));
        assert!(build_agent_dual_factor(&Matrix::zeros(1, 1), 1.0, 1.0).is_err());
        assert!(build_agent_dual_factor(&Matrix::zeros(1, 1), 1.0, 0.0).is_err());
    }

    #[test]
    fn iterative_factor_matches_dense() {
        let b = Matrix::from_fn(AGENT_DENSE_LIMIT + 1, 3, |i, j| ((i * 7 + j * 3) % 5) as f64 - 2.0);
        let f = build_agent_dual_factor(&b, 0.3, 0.4).unwrap();
        assert!(matches!(f, AgentDualFactor::Iterative { .. }));
        let rhs: Vec<f64> = (0..b.rows()).map(|i| (i % 3) as f64).collect();
        let z = f.solve(&rhs).unwrap();
        let s = agent_dual_matrix(&b, 0.3, 0.4).unwrap();
        assert!(linalg::dist(&s.mul_vec(&z).unwrap(), &rhs) <= 1e-10 * linalg::norm(&rhs));
    }

    #[test]
    fn local_half_at_zero_duals() {
        let p = AgentProblem::new(
            Arc::new(Quadratic::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap()),
            ProxTerm::L1 { weight: 1.0 },
            Matrix::identity(2),
        )
        .unwrap();
        let mut a = AgentState::new(0, &p, vec![1.0, -2.0], vec![3.0, -0.5], 1.0, 0.5).unwrap();
        let msg = agent_local_half(&mut a, &p, 0.5, &[0.0, 0.0]).unwrap();
        assert_eq!(a.xbar, vec![1.0, -2.0]);
        assert_eq!(a.ybar, vec![2.5, 0.0]);
        assert_eq!(msg, RoundMessage { sender: 0, round: 0, payload: vec![1.0, -2.0] });
    }

    #[test]
    fn local_half_transcript() {
        // x = 2, mu = 0.5, nu = 1, g = 1, B = 3, alpha_k = 0.1, r = 0
        let p = scalar_agent(3.0);
        let mut a = AgentState::new(0, &p, vec![2.0], vec![1.0], 1.0, 0.5).unwrap();
        a.mu = vec![0.5];
        a.nu = vec![1.0];
        agent_local_half(&mut a, &p, 0.1, &[1.0]).unwrap();
        assert!((a.xbar[0] - (2.0 - 0.1 * (0.5 + 3.0 + 1.0))).abs() < 1e-15);
        assert!((a.ybar[0] - 1.1).abs() < 1e-15);
    }

    #[test]
    fn scalar_dual_step() {
        // S = 5, B xbar - ybar = 5 -> nu increases by 1
        let p = scalar_agent(1.0);
        let mut a = AgentState::new(0, &p, vec![0.0], vec![0.0], 1.0, 0.5).unwrap();
        a.xbar = vec![5.0];
        a.ybar = vec![0.0];
        agent_dual_and_correct(&mut a, &p, &[], &[], 1.0, 1.0, 0.5, 1.0).unwrap();
        assert!((a.nu[0] - 1.0).abs() < 1e-15);
        assert_eq!(a.mu, vec![0.0]);
        // x = xbar - alpha_k B^T (nu+ - nu) = 4, y = ybar + alpha_k (nu+ - nu) = 1
        assert!((a.x[0] - 4.0).abs() < 1e-15);
        assert!((a.y[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn stationary_duals_when_consensual_and_feasible() {
        let p = scalar_agent(2.0);
        let mut a = AgentState::new(0, &p, vec![0.0], vec![0.0], 1.0, 0.5).unwrap();
        a.mu = vec![0.3];
        a.nu = vec![-0.2];
        a.xbar = vec![1.5];
        a.ybar = vec![3.0];
        let inbox = [RoundMessage { sender: 1, round: 0, payload: vec![1.5] }];
        agent_dual_and_correct(&mut a, &p, &inbox, &[(1, 0.5)], 0.5, 1.0, 0.5, 0.7).unwrap();
        assert_eq!(a.mu, vec![0.3]);
        assert_eq!(a.nu, vec![-0.2]);
        assert_eq!(a.x, vec![1.5]);
        assert_eq!(a.y, vec![3.0]);
    }

    #[test]
    fn missing_neighbor_is_named() {
        let p = scalar_agent(1.0);
        let mut a = AgentState::new(2, &p, vec![0.0], vec![0.0], 1.0, 0.5).unwrap();
        let inbox = [RoundMessage { sender: 1, round: 0, payload: vec![0.0] }];
        let err = agent_dual_and_correct(&mut a, &p, &inbox, &[(1, 0.25), (3, 0.25)], 0.5, 1.0, 0.5, 1.0).unwrap_err();
        assert_eq!(err, Error::MissingMessage { receiver: 2, sender: 3 });
    }
}
