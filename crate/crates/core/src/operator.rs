//! Linear maps with explicit adjoints.
//!
//! The lifted constraint map `(x, y) -> (Dx, Bx - y)` is kept composed from
//! its parts; [`LinearOperator::to_dense`] materializes any operator when a
//! solver needs explicit entries.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;
use core::sync::atomic::{AtomicU64, Ordering};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{check_dim, Result};
use crate::linalg::{self, CsrMatrix, Matrix};

const UNSET: u64 = u64::MAX;
const POWER_SEED: u64 = 0x00b1_a9a5_eed0;

#[derive(Debug, Clone)]
pub enum Repr {
    Dense(Matrix),
    Sparse(CsrMatrix),
    Zero,
    ScaledIdentity(f64),
    /// `(x, y) -> (D x, B x - y)` with `D: p2 x n`, `B: p1 x n`.
    Lifted { d: Box<LinearOperator>, b: Box<LinearOperator> },
    BlockDiagonal(Vec<LinearOperator>),
    /// `[A_1; A_2; ...]`, all sharing a column count.
    Stacked(Vec<LinearOperator>),
}

/// Result of [`LinearOperator::op_norm_sq`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormEstimate {
    /// Estimate of the largest eigenvalue of `A^T A`.
    pub value: f64,
    /// Relative eigen-residual `||M v - value v|| / value` at exit.
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug)]
pub struct LinearOperator {
    rows: usize,
    cols: usize,
    repr: Repr,
    norm_sq: AtomicU64,
}

impl Clone for LinearOperator {
    fn clone(&self) -> Self {
        LinearOperator {
            rows: self.rows,
            cols: self.cols,
            repr: self.repr.clone(),
            norm_sq: AtomicU64::new(self.norm_sq.load(Ordering::Relaxed)),
        }
    }
}

impl LinearOperator {
    fn with_repr(rows: usize, cols: usize, repr: Repr) -> Self {
        LinearOperator { rows, cols, repr, norm_sq: AtomicU64::new(UNSET) }
    }

    pub fn dense(m: Matrix) -> Self {
        Self::with_repr(m.rows(), m.cols(), Repr::Dense(m))
    }

    pub fn sparse(m: CsrMatrix) -> Self {
        Self::with_repr(m.rows(), m.cols(), Repr::Sparse(m))
    }

    pub fn zero(rows: usize, cols: usize) -> Self {
        Self::with_repr(rows, cols, Repr::Zero)
    }

    pub fn identity(n: usize) -> Self {
        Self::scaled_identity(n, 1.0)
    }

    pub fn scaled_identity(n: usize, c: f64) -> Self {
        Self::with_repr(n, n, Repr::ScaledIdentity(c))
    }

    /// The lifted map `(x, y) -> (Dx, Bx - y)`.
    pub fn lifted(d: LinearOperator, b: LinearOperator) -> Result<Self> {
        check_dim("lifted operator: B and D column counts", d.cols, b.cols)?;
        let (p2, p1, n) = (d.rows, b.rows, d.cols);
        Ok(Self::with_repr(p2 + p1, n + p1, Repr::Lifted { d: Box::new(d), b: Box::new(b) }))
    }

    pub fn block_diagonal(blocks: Vec<LinearOperator>) -> Self {
        let rows = blocks.iter().map(|b| b.rows).sum();
        let cols = blocks.iter().map(|b| b.cols).sum();
        Self::with_repr(rows, cols, Repr::BlockDiagonal(blocks))
    }

    pub fn stacked(blocks: Vec<LinearOperator>) -> Result<Self> {
        let cols = blocks.first().map_or(0, |b| b.cols);
        for b in &blocks {
            check_dim("stacked operator columns", cols, b.cols)?;
        }
        let rows = blocks.iter().map(|b| b.rows).sum();
        Ok(Self::with_repr(rows, cols, Repr::Stacked(blocks)))
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn repr(&self) -> &Repr {
        &self.repr
    }

    pub fn is_zero(&self) -> bool {
        match &self.repr {
            Repr::Zero => true,
            Repr::ScaledIdentity(c) => *c == 0.0,
            Repr::Dense(m) => m.as_slice().iter().all(|v| *v == 0.0),
            Repr::Sparse(m) => m.nnz() == 0 || m.to_dense().as_slice().iter().all(|v| *v == 0.0),
            Repr::Lifted { d, b } => b.rows == 0 && d.is_zero(),
            Repr::BlockDiagonal(bs) | Repr::Stacked(bs) => bs.iter().all(|b| b.is_zero()),
        }
    }

    /// `out = A v` without dimension checks beyond debug assertions.
    pub fn apply_into(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        match &self.repr {
            Repr::Dense(m) => m.mul_vec_into(v, out),
            Repr::Sparse(m) => m.mul_vec_into(v, out),
            Repr::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Repr::ScaledIdentity(c) => {
                for (o, x) in out.iter_mut().zip(v) {
                    *o = c * x;
                }
            }
            Repr::Lifted { d, b } => {
                let n = d.cols;
                let (x, y) = v.split_at(n);
                let (top, bottom) = out.split_at_mut(d.rows);
                d.apply_into(x, top);
                b.apply_into(x, bottom);
                for (o, yi) in bottom.iter_mut().zip(y) {
                    *o -= yi;
                }
            }
            Repr::BlockDiagonal(bs) => {
                let (mut r0, mut c0) = (0, 0);
                for b in bs {
                    b.apply_into(&v[c0..c0 + b.cols], &mut out[r0..r0 + b.rows]);
                    r0 += b.rows;
                    c0 += b.cols;
                }
            }
            Repr::Stacked(bs) => {
                let mut r0 = 0;
                for b in bs {
                    b.apply_into(v, &mut out[r0..r0 + b.rows]);
                    r0 += b.rows;
                }
            }
        }
    }

    /// `out = A^T w`.
    pub fn adjoint_into(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        match &self.repr {
            Repr::Dense(m) => m.mul_t_vec_into(w, out),
            Repr::Sparse(m) => m.mul_t_vec_into(w, out),
            Repr::Zero => out.iter_mut().for_each(|o| *o = 0.0),
            Repr::ScaledIdentity(c) => {
                for (o, x) in out.iter_mut().zip(w) {
                    *o = c * x;
                }
            }
            Repr::Lifted { d, b } => {
                // (mu, nu) -> (D^T mu + B^T nu, -nu)
                let (mu, nu) = w.split_at(d.rows);
                let (xo, yo) = out.split_at_mut(d.cols);
                d.adjoint_into(mu, xo);
                let mut tmp = vec![0.0; b.cols];
                b.adjoint_into(nu, &mut tmp);
                for (o, t) in xo.iter_mut().zip(&tmp) {
                    *o += t;
                }
                for (o, n) in yo.iter_mut().zip(nu) {
                    *o = -n;
                }
            }
            Repr::BlockDiagonal(bs) => {
                let (mut r0, mut c0) = (0, 0);
                for b in bs {
                    b.adjoint_into(&w[r0..r0 + b.rows], &mut out[c0..c0 + b.cols]);
                    r0 += b.rows;
                    c0 += b.cols;
                }
            }
            Repr::Stacked(bs) => {
                out.iter_mut().for_each(|o| *o = 0.0);
                let mut tmp = vec![0.0; self.cols];
                let mut r0 = 0;
                for b in bs {
                    b.adjoint_into(&w[r0..r0 + b.rows], &mut tmp);
                    for (o, t) in out.iter_mut().zip(&tmp) {
                        *o += t;
                    }
                    r0 += b.rows;
                }
            }
        }
    }

    pub fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("operator apply", self.cols, v.len())?;
        let mut out = vec![0.0; self.rows];
        self.apply_into(v, &mut out);
        Ok(out)
    }

    pub fn adjoint(&self, w: &[f64]) -> Result<Vec<f64>> {
        check_dim("operator adjoint", self.rows, w.len())?;
        let mut out = vec![0.0; self.cols];
        self.adjoint_into(w, &mut out);
        Ok(out)
    }

    pub fn to_dense(&self) -> Matrix {
        match &self.repr {
            Repr::Dense(m) => m.clone(),
            Repr::Sparse(m) => m.to_dense(),
            Repr::Zero => Matrix::zeros(self.rows, self.cols),
            Repr::ScaledIdentity(c) => {
                let mut m = Matrix::zeros(self.rows, self.cols);
                m.add_diag(*c);
                m
            }
            Repr::Lifted { d, b } => {
                let (dd, bd) = (d.to_dense(), b.to_dense());
                let n = d.cols;
                let mut m = Matrix::zeros(self.rows, self.cols);
                for i in 0..d.rows {
                    for j in 0..n {
                        m[(i, j)] = dd[(i, j)];
                    }
                }
                for i in 0..b.rows {
                    for j in 0..n {
                        m[(d.rows + i, j)] = bd[(i, j)];
                    }
                    m[(d.rows + i, n + i)] = -1.0;
                }
                m
            }
            Repr::BlockDiagonal(bs) => {
                let mut m = Matrix::zeros(self.rows, self.cols);
                let (mut r0, mut c0) = (0, 0);
                for b in bs {
                    let bd = b.to_dense();
                    for i in 0..b.rows {
                        for j in 0..b.cols {
                            m[(r0 + i, c0 + j)] = bd[(i, j)];
                        }
                    }
                    r0 += b.rows;
                    c0 += b.cols;
                }
                m
            }
            Repr::Stacked(bs) => {
                let dense: Vec<Matrix> = bs.iter().map(|b| b.to_dense()).collect();
                let refs: Vec<&Matrix> = dense.iter().collect();
                let mut m = Matrix::vstack(&refs).expect("column counts checked at construction");
                if bs.is_empty() {
                    m = Matrix::zeros(0, self.cols);
                }
                m
            }
        }
    }

    /// Replaces a composed representation by its dense form when both
    /// dimensions are at most `limit`.
    pub fn materialized_if_small(self, limit: usize) -> Self {
        if self.rows <= limit && self.cols <= limit && !matches!(self.repr, Repr::Dense(_)) {
            let cached = self.norm_sq.load(Ordering::Relaxed);
            let op = LinearOperator::dense(self.to_dense());
            op.norm_sq.store(cached, Ordering::Relaxed);
            op
        } else {
            self
        }
    }

    /// `A A^T` as a dense matrix.
    pub fn gram_outer_dense(&self) -> Matrix {
        self.to_dense().gram_outer()
    }

    /// Squared row norms of `A`, i.e. the diagonal of `A A^T`.
    pub fn row_norms_sq(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.rows];
        let mut col = vec![0.0; self.cols];
        (0..self.rows)
            .map(|i| {
                e[i] = 1.0;
                self.adjoint_into(&e, &mut col);
                e[i] = 0.0;
                linalg::norm_sq(&col)
            })
            .collect()
    }

    /// Cached estimate of `||A^T A||`, if one has been computed.
    pub fn norm_sq_estimate(&self) -> Option<f64> {
        match self.norm_sq.load(Ordering::Acquire) {
            UNSET => None,
            bits => Some(f64::from_bits(bits)),
        }
    }

    /// Power iteration for the largest eigenvalue of `A^T A`, run on whichever
    /// of `A^T A` or `A A^T` is smaller. A converged estimate is cached.
    pub fn op_norm_sq(&self, tol: f64, max_iter: usize) -> NormEstimate {
        if let Some(v) = self.norm_sq_estimate() {
            return NormEstimate { value: v, residual: 0.0, iterations: 0, converged: true };
        }
        let est = self.power_iteration(tol, max_iter);
        if est.converged {
            // write-once: a concurrent writer stores an equally valid estimate
            let _ = self.norm_sq.compare_exchange(UNSET, est.value.to_bits(), Ordering::AcqRel, Ordering::Acquire);
        }
        est
    }

    fn power_iteration(&self, tol: f64, max_iter: usize) -> NormEstimate {
        let outer = self.rows < self.cols;
        let dim = if outer { self.rows } else { self.cols };
        if dim == 0 {
            return NormEstimate { value: 0.0, residual: 0.0, iterations: 0, converged: true };
        }
        let mut rng = ChaCha8Rng::seed_from_u64(POWER_SEED);
        let mut v: Vec<f64> = (0..dim).map(|_| rng.random::<f64>() - 0.5).collect();
        let nv = linalg::norm(&v);
        linalg::scale(1.0 / nv, &mut v);

        let mut mid = vec![0.0; if outer { self.cols } else { self.rows }];
        let mut w = vec![0.0; dim];
        let mut value = 0.0;
        let mut residual = f64::INFINITY;
        for it in 1..=max_iter {
            if outer {
                self.adjoint_into(&v, &mut mid);
                self.apply_into(&mid, &mut w);
            } else {
                self.apply_into(&v, &mut mid);
                self.adjoint_into(&mid, &mut w);
            }
            value = linalg::dot(&v, &w);
            let nw = linalg::norm(&w);
            if nw == 0.0 {
                return NormEstimate { value: 0.0, residual: 0.0, iterations: it, converged: true };
            }
            residual = libm::sqrt(w.iter().zip(&v).map(|(a, b)| { let e = a - value * b; e * e }).sum::<f64>()) / value;
            for (vi, wi) in v.iter_mut().zip(&w) {
                *vi = wi / nw;
            }
            if residual <= tol {
                return NormEstimate { value, residual, iterations: it, converged: true };
            }
        }
        NormEstimate { value, residual, iterations: max_iter, converged: false }
    }
}

impl From<Matrix> for LinearOperator {
    fn from(m: Matrix) -> Self {
        LinearOperator::dense(m)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn diagonal_apply_and_norm() {
        let d = LinearOperator::dense(Matrix::from_diag(&[3.0, 1.0]));
        assert_eq!(d.apply(&[1.0, 1.0]).unwrap(), vec![3.0, 1.0]);
        let est = d.op_norm_sq(1e-12, 10_000);
        assert!(est.converged);
        assert!((est.value - 9.0).abs() < 1e-9);
        assert_eq!(d.norm_sq_estimate(), Some(est.value));
        assert!(d.apply(&[1.0]).is_err());
    }

    #[test]
    fn zero_and_identity() {
        let z = LinearOperator::zero(3, 2);
        assert_eq!(z.apply(&[4.0, -1.0]).unwrap(), vec![0.0; 3]);
        assert!(z.is_zero());
        for n in [1, 4, 9] {
            let est = LinearOperator::identity(n).op_norm_sq(1e-12, 100);
            assert!((est.value - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn lifted_scalar_expansion() {
        // B = [2], D = [1]: (x, y) -> (x, 2x - y)
        let op = LinearOperator::lifted(
            LinearOperator::dense(Matrix::from_rows(&[&[1.0]]).unwrap()),
            LinearOperator::dense(Matrix::from_rows(&[&[2.0]]).unwrap()),
        )
        .unwrap();
        assert_eq!(op.apply(&[3.0, 1.0]).unwrap(), vec![3.0, 5.0]);
        assert_eq!(op.adjoint(&[1.0, 1.0]).unwrap(), vec![3.0, -1.0]);
        let dense = op.to_dense();
        assert_eq!(dense, Matrix::from_rows(&[&[1.0, 0.0], &[2.0, -1.0]]).unwrap());
    }

    #[test]
    fn non_convergence_is_flagged() {
        let a = LinearOperator::dense(Matrix::from_diag(&[1.0, 0.999_999]));
        let est = a.op_norm_sq(1e-14, 3);
        assert!(!est.converged);
        assert!(est.residual > 0.0);
        assert_eq!(a.norm_sq_estimate(), None);
    }
}
