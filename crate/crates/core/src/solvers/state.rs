use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Result};
use crate::problem::LiftedProblem;

/// One iterate `(X^k, Xbar^{k-1}, Lambda^k)` of a primal-dual method.
#[derive(Debug, Clone, PartialEq)]
pub struct SaddleState {
    pub x: Vec<f64>,
    /// Intermediate primal point of the last completed step.
    pub xbar: Vec<f64>,
    pub lambda: Vec<f64>,
    pub iter: usize,
    /// Gradient (or estimate) used by the last step.
    pub grad: Option<Vec<f64>>,
}

impl SaddleState {
    /// Starts at `X^0` with `Lambda^0 = 0`.
    pub fn new(x0: Vec<f64>, dual_dim: usize) -> Self {
        SaddleState { xbar: x0.clone(), x: x0, lambda: vec![0.0; dual_dim], iter: 0, grad: None }
    }

    pub fn zeros(lp: &LiftedProblem) -> Self {
        Self::new(vec![0.0; lp.primal_dim()], lp.dual_dim())
    }

    /// State at a given primal-dual pair, e.g. a saddle point.
    pub fn at(lp: &LiftedProblem, x: Vec<f64>, lambda: Vec<f64>) -> Result<Self> {
        check_dim("state primal", lp.primal_dim(), x.len())?;
        check_dim("state dual", lp.dual_dim(), lambda.len())?;
        Ok(SaddleState { xbar: x.clone(), x, lambda, iter: 0, grad: None })
    }

    /// `W = (X, Lambda)` concatenated.
    pub fn w(&self) -> Vec<f64> {
        let mut w = self.x.clone();
        w.extend_from_slice(&self.lambda);
        w
    }
}
