use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{CsrMatrix, Matrix};
use crate::operator::LinearOperator;
use crate::problem::{lift_problem, CompositeProblem, LiftedProblem};
use crate::smooth::{BlockSeparable, SmoothFunction};
use crate::solvers::{balpa_step_in_place, DualMetric, MetricBlock, SaddleState};

use super::agent::agent_dual_matrix;
use super::network::{DistConfig, NetworkProblem, StackedIterate};

/// Largest stacked primal plus dual dimension the compact form will build.
pub const COMPACT_LIMIT: usize = 5000;

/// Factor `D` with `D^T D = ((I - U)/2) kron I_l`: one block row
/// `sqrt(U_ij / 2) (e_i - e_j) kron I_l` per edge.
pub fn consensus_factor(p: &NetworkProblem) -> Result<CsrMatrix> {
    let l = p.dim();
    let n = p.num_agents();
    let mut rows = Vec::with_capacity(p.topology.num_edges() * l);
    for &(i, j) in p.topology.edges() {
        let w = libm::sqrt(p.mixing[(i, j)] / 2.0);
        for c in 0..l {
            rows.push(vec![(i * l + c, w), (j * l + c, -w)]);
        }
    }
    CsrMatrix::from_rows(n * l, &rows)
}

/// The stacked problem `min sum_i f_i(x_i) + r_i(y_i)` subject to
/// `D x = 0`, `B x = y`, with its block preconditioner
/// `diag((alpha/gamma) I, S_1, ..., S_N)`.
pub fn compact_problem(p: &NetworkProblem, config: &DistConfig) -> Result<(LiftedProblem, DualMetric)> {
    let l = p.dim();
    let n = p.num_agents();
    let nl = n * l;
    let rows_b: usize = p.agents.iter().map(|a| a.local_rows()).sum();
    let rows_d = p.topology.num_edges() * l;
    let total = (nl + rows_b) + (rows_d + rows_b);
    if total > COMPACT_LIMIT {
        return Err(Error::TooLarge { dim: total, limit: COMPACT_LIMIT });
    }

    let f: Arc<dyn SmoothFunction> = Arc::new(BlockSeparable::new(p.agents.iter().map(|a| a.f.clone()).collect()));
    let b = if rows_b == 0 {
        LinearOperator::zero(0, nl)
    } else {
        let mut bd = Matrix::zeros(rows_b, nl);
        let mut r0 = 0;
        for (i, a) in p.agents.iter().enumerate() {
            for r in 0..a.local_rows() {
                for c in 0..l {
                    bd[(r0 + r, i * l + c)] = a.b[(r, c)];
                }
            }
            r0 += a.local_rows();
        }
        LinearOperator::dense(bd)
    };
    let d = if rows_d == 0 { LinearOperator::zero(0, nl) } else { LinearOperator::sparse(consensus_factor(p)?) };
    let problem = CompositeProblem::new(f, p.stacked_regularizer()?, b, d, vec![0.0; rows_d])?;
    let lp = lift_problem(&problem)?;

    let alpha = config.alpha_bar();
    let mut blocks = vec![MetricBlock::ScaledIdentity { len: rows_d, c: alpha / config.gamma }];
    for a in &p.agents {
        if a.local_rows() > 0 {
            blocks.push(MetricBlock::Dense(agent_dual_matrix(&a.b, alpha, config.gamma)?));
        }
    }
    let metric = DualMetric::from_blocks(blocks, alpha)?;
    Ok((lp, metric))
}

/// Runs `rounds` iterations of the centralized update on the stacked problem
/// with exact gradients, from the same start as `Network::new`. Returns the
/// iterates before the first and after every round, with `mu = D^T lambda`.
pub fn compact_form_oracle(
    p: &NetworkProblem,
    config: &DistConfig,
    x0: Option<&[f64]>,
    rounds: usize,
) -> Result<Vec<StackedIterate>> {
    let l = p.dim();
    let n = p.num_agents();
    let x0 = match x0 {
        Some(x) => {
            check_dim("initial point", l, x.len())?;
            x.to_vec()
        }
        None => vec![0.0; l],
    };
    let (lp, metric) = compact_problem(p, config)?;
    let mut big_x: Vec<f64> = (0..n).flat_map(|_| x0.iter().copied()).collect();
    for a in &p.agents {
        big_x.extend(a.b.mul_vec(&x0)?);
    }
    let mut state = SaddleState::new(big_x, lp.dual_dim());
    let rows_d = p.topology.num_edges() * l;
    let d = LinearOperator::sparse(consensus_factor(p)?);
    let snapshot = |s: &SaddleState| -> StackedIterate {
        let mu = if rows_d == 0 { vec![0.0; n * l] } else { d.adjoint(&s.lambda[..rows_d]).expect("consensus factor shape") };
        StackedIterate {
            x: s.x[..n * l].to_vec(),
            y: s.x[n * l..].to_vec(),
            mu,
            nu: s.lambda[rows_d..].to_vec(),
        }
    };
    let mut out = Vec::with_capacity(rounds + 1);
    out.push(snapshot(&state));
    for k in 0..rounds {
        let alpha_k = config.step(k)?;
        let g = lp.gradient(&state.x);
        balpa_step_in_place(&mut state, &lp, &metric, alpha_k, &g)?;
        out.push(snapshot(&state));
    }
    Ok(out)
}
