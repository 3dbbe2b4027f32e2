//! The dual metric `Q` and the norms it induces.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, check_positive, Error, Result};
use crate::linalg::{self, pcg, Cholesky, Matrix};
use crate::operator::LinearOperator;

/// Dual dimensions up to this size use a dense Cholesky factor of `Q`.
pub const DENSE_LIMIT: usize = 2000;
/// Relative residual target of the conjugate-gradient path.
pub const CG_TOL: f64 = 1e-12;

/// One diagonal block of a block-diagonal metric.
#[derive(Debug, Clone, PartialEq)]
pub enum MetricBlock {
    /// `c I_len`
    ScaledIdentity { len: usize, c: f64 },
    Dense(Matrix),
}

#[derive(Debug, Clone)]
enum BlockFactor {
    Scaled { len: usize, c: f64 },
    Dense { q: Matrix, chol: Cholesky },
}

impl BlockFactor {
    fn len(&self) -> usize {
        match self {
            BlockFactor::Scaled { len, .. } => *len,
            BlockFactor::Dense { q, .. } => q.rows(),
        }
    }
}

#[derive(Debug, Clone)]
enum Repr {
    Dense { q: Matrix, chol: Cholesky },
    Blocks(Vec<BlockFactor>),
    /// `Q = (1/gamma) I + alpha D D^T` applied through `D`, solved by CG.
    Iterative { op: LinearOperator, inv_gamma: f64, alpha: f64, precond: Vec<f64> },
}

/// Symmetric positive definite `Q` with a factorization computed once.
#[derive(Debug, Clone)]
pub struct DualMetric {
    repr: Repr,
    dim: usize,
    alpha_bar: f64,
    gamma: Option<f64>,
}

/// `Q = (1/gamma) I + alpha D D^T`, dense-factored when `D` has at most
/// [`DENSE_LIMIT`] rows and handled by Jacobi-preconditioned CG otherwise.
pub fn build_dual_metric(op: &LinearOperator, alpha: f64, gamma: f64) -> Result<DualMetric> {
    if op.rows() <= DENSE_LIMIT {
        build_dense(op, alpha, gamma)
    } else {
        build_iterative(op, alpha, gamma)
    }
}

fn build_dense(op: &LinearOperator, alpha: f64, gamma: f64) -> Result<DualMetric> {
    check_positive("alpha", alpha)?;
    check_positive("gamma", gamma)?;
    let mut q = if op.is_zero() { Matrix::zeros(op.rows(), op.rows()) } else { op.gram_outer_dense() };
    q.scale_in_place(alpha);
    q.add_diag(1.0 / gamma);
    let chol = Cholesky::factor(&q)?;
    Ok(DualMetric { dim: op.rows(), repr: Repr::Dense { q, chol }, alpha_bar: alpha, gamma: Some(gamma) })
}

/// Same metric as [`build_dual_metric`] but always on the CG path.
pub fn build_iterative(op: &LinearOperator, alpha: f64, gamma: f64) -> Result<DualMetric> {
    check_positive("alpha", alpha)?;
    check_positive("gamma", gamma)?;
    let inv_gamma = 1.0 / gamma;
    let precond = op.row_norms_sq().into_iter().map(|s| inv_gamma + alpha * s).collect();
    Ok(DualMetric {
        dim: op.rows(),
        repr: Repr::Iterative { op: op.clone(), inv_gamma, alpha, precond },
        alpha_bar: alpha,
        gamma: Some(gamma),
    })
}

impl DualMetric {
    /// Block-diagonal metric; every dense block must be positive definite.
    pub fn from_blocks(blocks: Vec<MetricBlock>, alpha_bar: f64) -> Result<Self> {
        check_positive("alpha_bar", alpha_bar)?;
        let mut factors = Vec::with_capacity(blocks.len());
        let mut dim = 0;
        for b in blocks {
            let f = match b {
                MetricBlock::ScaledIdentity { len, c } => {
                    if !(c > 0.0) {
                        return Err(Error::NotPositiveDefinite { pivot: dim, value: c });
                    }
                    BlockFactor::Scaled { len, c }
                }
                MetricBlock::Dense(q) => {
                    let chol = Cholesky::factor(&q).map_err(|e| match e {
                        Error::NotPositiveDefinite { pivot, value } => {
                            Error::NotPositiveDefinite { pivot: pivot + dim, value }
                        }
                        other => other,
                    })?;
                    BlockFactor::Dense { q, chol }
                }
            };
            dim += f.len();
            factors.push(f);
        }
        Ok(DualMetric { repr: Repr::Blocks(factors), dim, alpha_bar, gamma: None })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    /// The constant stepsize the metric was built with.
    pub fn alpha_bar(&self) -> f64 {
        self.alpha_bar
    }

    /// `gamma` for metrics of the form `(1/gamma) I + alpha D D^T`.
    pub fn gamma(&self) -> Option<f64> {
        self.gamma
    }

    pub fn is_iterative(&self) -> bool {
        matches!(self.repr, Repr::Iterative { .. })
    }

    /// `out = Q v`.
    pub fn apply_q(&self, v: &[f64], out: &mut [f64]) {
        match &self.repr {
            Repr::Dense { q, .. } => q.mul_vec_into(v, out),
            Repr::Blocks(blocks) => {
                let mut off = 0;
                for b in blocks {
                    let len = b.len();
                    let (vi, oi) = (&v[off..off + len], &mut out[off..off + len]);
                    match b {
                        BlockFactor::Scaled { c, .. } => {
                            for (o, x) in oi.iter_mut().zip(vi) {
                                *o = c * x;
                            }
                        }
                        BlockFactor::Dense { q, .. } => q.mul_vec_into(vi, oi),
                    }
                    off += len;
                }
            }
            Repr::Iterative { op, inv_gamma, alpha, .. } => {
                let mut t = vec![0.0; op.cols()];
                op.adjoint_into(v, &mut t);
                op.apply_into(&t, out);
                for (o, x) in out.iter_mut().zip(v) {
                    *o = alpha * *o + inv_gamma * x;
                }
            }
        }
    }

    /// Solves `Q z = r`, returning `z` and the absolute residual `||Q z - r||`.
    pub fn solve(&self, r: &[f64]) -> Result<(Vec<f64>, f64)> {
        check_dim("dual metric solve", self.dim, r.len())?;
        let z = match &self.repr {
            Repr::Dense { chol, .. } => {
                let mut z = r.to_vec();
                chol.solve_in_place(&mut z);
                z
            }
            Repr::Blocks(blocks) => {
                let mut z = r.to_vec();
                let mut off = 0;
                for b in blocks {
                    let len = b.len();
                    let zi = &mut z[off..off + len];
                    match b {
                        BlockFactor::Scaled { c, .. } => linalg::scale(1.0 / c, zi),
                        BlockFactor::Dense { chol, .. } => chol.solve_in_place(zi),
                    }
                    off += len;
                }
                z
            }
            Repr::Iterative { precond, .. } => {
                let out = pcg(|v, o| self.apply_q(v, o), precond, r, CG_TOL, 10 * self.dim + 100);
                if !out.converged {
                    return Err(Error::LinearSolveFailed { iterations: out.iterations, residual: out.relative_residual });
                }
                out.x
            }
        };
        let mut qz = vec![0.0; self.dim];
        self.apply_q(&z, &mut qz);
        let res = linalg::dist(&qz, r);
        Ok((z, res))
    }

    /// `v^T Q v`.
    pub fn q_norm_sq(&self, v: &[f64]) -> f64 {
        let mut qv = vec![0.0; self.dim];
        self.apply_q(v, &mut qv);
        linalg::dot(v, &qv)
    }

    /// `v^T (Q - alpha D D^T) v`.
    pub fn j_norm_sq(&self, op: &LinearOperator, alpha: f64, v: &[f64]) -> f64 {
        let mut t = vec![0.0; op.cols()];
        op.adjoint_into(v, &mut t);
        self.q_norm_sq(v) - alpha * linalg::norm_sq(&t)
    }

    /// Dense copy of `Q`.
    pub fn to_dense(&self) -> Matrix {
        match &self.repr {
            Repr::Dense { q, .. } => q.clone(),
            _ => {
                let mut m = Matrix::zeros(self.dim, self.dim);
                let mut e = vec![0.0; self.dim];
                let mut col = vec![0.0; self.dim];
                for j in 0..self.dim {
                    e[j] = 1.0;
                    self.apply_q(&e, &mut col);
                    e[j] = 0.0;
                    for i in 0..self.dim {
                        m[(i, j)] = col[i];
                    }
                }
                m
            }
        }
    }

    /// Verifies `J = Q - alpha D D^T` is positive definite. Metrics of the
    /// form `(1/gamma) I + alpha_bar D D^T` pass whenever `alpha <= alpha_bar`;
    /// other metrics are checked by a dense factorization.
    pub fn check_j_positive(&self, op: &LinearOperator, alpha: f64) -> Result<()> {
        check_dim("J check: operator rows", self.dim, op.rows())?;
        if self.gamma.is_some() && alpha <= self.alpha_bar {
            return Ok(());
        }
        if self.dim > DENSE_LIMIT {
            return Err(Error::TooLarge { dim: self.dim, limit: DENSE_LIMIT });
        }
        let mut j = self.to_dense();
        j.add_scaled(-alpha, &op.gram_outer_dense())?;
        Cholesky::factor(&j).map(|_| ()).map_err(|_| Error::MetricNotPositive("J = Q - alpha D D^T"))
    }
}
