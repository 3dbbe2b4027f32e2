//! `min f(x) + r(Bx)  s.t.  Dx = d` and its lifted form over `X = (x, y)`:
//! `min F(X) + R(X)  s.t.  D_lift X = d_lift` with `F(X) = f(x)`, `R(X) = r(y)`,
//! `D_lift (x, y) = (Dx, Bx - y)` and `d_lift = (d, 0)`.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Result};
use crate::linalg;
use crate::operator::LinearOperator;
use crate::prox::ProxTerm;
use crate::smooth::SmoothFunction;

/// Composed operators at or below this size are stored densely after lifting.
pub const MATERIALIZE_LIMIT: usize = 200;

#[derive(Debug, Clone)]
pub struct CompositeProblem {
    pub f: Arc<dyn SmoothFunction>,
    pub r: ProxTerm,
    pub b: LinearOperator,
    pub d: LinearOperator,
    pub dvec: Vec<f64>,
}

impl CompositeProblem {
    pub fn new(
        f: Arc<dyn SmoothFunction>,
        r: ProxTerm,
        b: LinearOperator,
        d: LinearOperator,
        dvec: Vec<f64>,
    ) -> Result<Self> {
        let n = f.dim();
        check_dim("B columns", n, b.cols())?;
        check_dim("D columns", n, d.cols())?;
        check_dim("d length", d.rows(), dvec.len())?;
        r.validate(b.rows())?;
        Ok(CompositeProblem { f, r, b, d, dvec })
    }

    /// Problem with `r = 0` and no `B`.
    pub fn equality_constrained(f: Arc<dyn SmoothFunction>, d: LinearOperator, dvec: Vec<f64>) -> Result<Self> {
        let n = f.dim();
        Self::new(f, ProxTerm::Zero, LinearOperator::zero(0, n), d, dvec)
    }

    pub fn n(&self) -> usize {
        self.f.dim()
    }

    pub fn p1(&self) -> usize {
        self.b.rows()
    }

    pub fn p2(&self) -> usize {
        self.d.rows()
    }

    /// `f(x) + r(Bx)`, ignoring the constraint.
    pub fn objective(&self, x: &[f64]) -> f64 {
        let bx = self.b.apply(x).expect("x has dimension n");
        self.f.value(x) + self.r.value(&bx)
    }
}

#[derive(Debug, Clone)]
pub struct LiftedProblem {
    f: Arc<dyn SmoothFunction>,
    r: ProxTerm,
    op: LinearOperator,
    dvec: Vec<f64>,
    n: usize,
    p1: usize,
}

/// Introduces `y = Bx` and returns the lifted problem.
pub fn lift_problem(p: &CompositeProblem) -> Result<LiftedProblem> {
    let (n, p1) = (p.n(), p.p1());
    let op = if p1 == 0 {
        p.d.clone()
    } else {
        LinearOperator::lifted(p.d.clone(), p.b.clone())?
    };
    let op = op.materialized_if_small(MATERIALIZE_LIMIT);
    let mut dvec = p.dvec.clone();
    dvec.resize(p.p2() + p1, 0.0);
    Ok(LiftedProblem { f: p.f.clone(), r: p.r.clone(), op, dvec, n, p1 })
}

impl LiftedProblem {
    pub fn n(&self) -> usize {
        self.n
    }

    pub fn p1(&self) -> usize {
        self.p1
    }

    /// Dimension of `X = (x, y)`.
    pub fn primal_dim(&self) -> usize {
        self.n + self.p1
    }

    /// Dimension of `Lambda = (mu, nu)`.
    pub fn dual_dim(&self) -> usize {
        self.op.rows()
    }

    pub fn operator(&self) -> &LinearOperator {
        &self.op
    }

    pub fn dvec(&self) -> &[f64] {
        &self.dvec
    }

    pub fn smooth(&self) -> &Arc<dyn SmoothFunction> {
        &self.f
    }

    pub fn regularizer(&self) -> &ProxTerm {
        &self.r
    }

    pub fn lipschitz(&self) -> f64 {
        self.f.lipschitz()
    }

    pub fn x_block<'a>(&self, big_x: &'a [f64]) -> &'a [f64] {
        &big_x[..self.n]
    }

    pub fn y_block<'a>(&self, big_x: &'a [f64]) -> &'a [f64] {
        &big_x[self.n..]
    }

    /// `F(X) = f(x)`.
    pub fn smooth_value(&self, big_x: &[f64]) -> f64 {
        self.f.value(self.x_block(big_x))
    }

    /// `R(X) = r(y)`.
    pub fn prox_value(&self, big_x: &[f64]) -> f64 {
        self.r.value(self.y_block(big_x))
    }

    /// `Phi(X) = F(X) + R(X)`.
    pub fn objective(&self, big_x: &[f64]) -> f64 {
        self.smooth_value(big_x) + self.prox_value(big_x)
    }

    /// Lifted gradient `(grad f(x), 0)`.
    pub fn gradient_into(&self, big_x: &[f64], out: &mut [f64]) {
        let (gx, gy) = out.split_at_mut(self.n);
        self.f.gradient_into(&big_x[..self.n], gx);
        gy.iter_mut().for_each(|v| *v = 0.0);
    }

    pub fn gradient(&self, big_x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.primal_dim()];
        self.gradient_into(big_x, &mut g);
        g
    }

    /// `prox_R^alpha` in place: identity on `x`, `prox_r^alpha` on `y`.
    pub fn prox_in_place(&self, big_x: &mut [f64], alpha: f64) {
        let n = self.n;
        self.r.prox_in_place(&mut big_x[n..], alpha);
    }

    /// `D_lift X - d_lift`.
    pub fn constraint_residual(&self, big_x: &[f64]) -> Vec<f64> {
        let mut r = vec![0.0; self.dual_dim()];
        self.op.apply_into(big_x, &mut r);
        for (ri, di) in r.iter_mut().zip(&self.dvec) {
            *ri -= di;
        }
        r
    }

    pub fn constraint_violation(&self, big_x: &[f64]) -> f64 {
        linalg::norm(&self.constraint_residual(big_x))
    }

    /// `(x, Bx)`: a primal point satisfying the lifting constraint.
    pub fn lift_point(&self, x: &[f64]) -> Vec<f64> {
        let mut big = x.to_vec();
        if self.p1 > 0 {
            let full = self.op.apply(&{
                let mut z = x.to_vec();
                z.resize(self.primal_dim(), 0.0);
                z
            });
            let full = full.expect("lifted dimensions");
            big.extend_from_slice(&full[self.dual_dim() - self.p1..]);
        }
        big
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;
    use crate::smooth::Quadratic;

    fn scalar_problem() -> CompositeProblem {
        let f = Arc::new(Quadratic::new(Matrix::identity(1), vec![0.0]).unwrap());
        CompositeProblem::new(
            f,
            ProxTerm::L1 { weight: 1.0 },
            LinearOperator::dense(Matrix::from_rows(&[&[2.0]]).unwrap()),
            LinearOperator::dense(Matrix::from_rows(&[&[1.0]]).unwrap()),
            vec![5.0],
        )
        .unwrap()
    }

    #[test]
    fn lift_scalar_instance() {
        let lp = lift_problem(&scalar_problem()).unwrap();
        assert_eq!(lp.operator().apply(&[3.0, 1.0]).unwrap(), vec![3.0, 5.0]);
        assert_eq!(lp.dvec(), &[5.0, 0.0]);
        assert_eq!(lp.lift_point(&[1.5]), vec![1.5, 3.0]);
        // F and R evaluate on their blocks
        assert_eq!(lp.smooth_value(&[2.0, -7.0]), 2.0);
        assert_eq!(lp.prox_value(&[2.0, -7.0]), 7.0);
        assert_eq!(lp.gradient(&[2.0, -7.0]), vec![2.0, 0.0]);
    }

    #[test]
    fn no_regularizer_degenerates_to_d() {
        let f = Arc::new(Quadratic::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap());
        let d = LinearOperator::dense(Matrix::from_rows(&[&[1.0, 1.0]]).unwrap());
        let p = CompositeProblem::equality_constrained(f, d, vec![2.0]).unwrap();
        let lp = lift_problem(&p).unwrap();
        assert_eq!(lp.primal_dim(), 2);
        assert_eq!(lp.dual_dim(), 1);
        assert_eq!(lp.dvec(), &[2.0]);
        assert_eq!(lp.operator().apply(&[1.0, 3.0]).unwrap(), vec![4.0]);
    }

    #[test]
    fn dimension_errors() {
        let f = Arc::new(Quadratic::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap());
        let d = LinearOperator::dense(Matrix::from_rows(&[&[1.0, 1.0, 1.0]]).unwrap());
        assert!(CompositeProblem::equality_constrained(f.clone(), d, vec![2.0]).is_err());
        let d = LinearOperator::dense(Matrix::from_rows(&[&[1.0, 1.0]]).unwrap());
        assert!(CompositeProblem::equality_constrained(f, d, vec![2.0, 1.0]).is_err());
    }
}
