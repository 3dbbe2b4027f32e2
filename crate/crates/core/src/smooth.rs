//! Smooth convex terms `f` with closed-form gradients.
//!
//! Finite sums are written `f = w * sum_i f_i` where `w` is `1/m` under
//! [`SumConvention::Mean`] and `1` under [`SumConvention::Sum`]. The full
//! gradient of every finite-sum oracle here is assembled from the component
//! gradients in index order, so the two always agree exactly.

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt::Debug;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, CsrMatrix, Matrix};
use crate::operator::LinearOperator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SumConvention {
    /// `f = (1/m) sum_i f_i`
    Mean,
    /// `f = sum_i f_i`
    Sum,
}

impl SumConvention {
    pub fn weight(self, m: usize) -> f64 {
        match self {
            SumConvention::Mean => 1.0 / m as f64,
            SumConvention::Sum => 1.0,
        }
    }
}

pub trait SmoothFunction: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &[f64]) -> f64;

    /// Lipschitz constant of the gradient.
    fn lipschitz(&self) -> f64;

    /// Modulus of strong convexity (0 when only convex is known).
    fn strong_convexity(&self) -> f64 {
        0.0
    }

    fn num_components(&self) -> usize {
        1
    }

    fn convention(&self) -> SumConvention {
        SumConvention::Sum
    }

    /// `out = grad f_i(x)`.
    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]);

    /// Lipschitz constant of `grad f_i`.
    fn component_lipschitz(&self, _i: usize) -> f64 {
        self.lipschitz()
    }

    /// `out = grad f(x)`.
    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let m = self.num_components();
        let w = self.convention().weight(m);
        out.iter_mut().for_each(|o| *o = 0.0);
        let mut tmp = vec![0.0; out.len()];
        for i in 0..m {
            self.component_gradient_into(i, x, &mut tmp);
            for (o, t) in out.iter_mut().zip(&tmp) {
                *o += t;
            }
        }
        if w != 1.0 {
            linalg::scale(w, out);
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = vec![0.0; self.dim()];
        self.gradient_into(x, &mut g);
        g
    }

    /// Largest component Lipschitz constant.
    fn max_component_lipschitz(&self) -> f64 {
        (0..self.num_components()).map(|i| self.component_lipschitz(i)).fold(0.0, f64::max)
    }
}

/// `f(x) = 1/2 x^T H x + c^T x`, a single component.
#[derive(Debug, Clone)]
pub struct Quadratic {
    h: Matrix,
    c: Vec<f64>,
    lipschitz: f64,
    mu: f64,
}

impl Quadratic {
    /// `L` is taken as the largest eigenvalue of `H` by power iteration.
    pub fn new(h: Matrix, c: Vec<f64>) -> Result<Self> {
        check_dim("quadratic: H square", h.rows(), h.cols())?;
        check_dim("quadratic: linear term", h.rows(), c.len())?;
        let est = LinearOperator::dense(h.clone()).op_norm_sq(1e-12, 100_000);
        Ok(Quadratic { lipschitz: libm::sqrt(est.value), h, c, mu: 0.0 })
    }

    pub fn with_strong_convexity(mut self, mu: f64) -> Self {
        self.mu = mu;
        self
    }

    pub fn hessian(&self) -> &Matrix {
        &self.h
    }

    pub fn linear(&self) -> &[f64] {
        &self.c
    }
}

impl SmoothFunction for Quadratic {
    fn dim(&self) -> usize {
        self.c.len()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let hx = self.h.mul_vec(x).expect("dimension checked by caller");
        0.5 * linalg::dot(x, &hx) + linalg::dot(&self.c, x)
    }

    fn lipschitz(&self) -> f64 {
        self.lipschitz
    }

    fn strong_convexity(&self) -> f64 {
        self.mu
    }

    fn component_gradient_into(&self, _i: usize, x: &[f64], out: &mut [f64]) {
        self.h.mul_vec_into(x, out);
        for (o, c) in out.iter_mut().zip(&self.c) {
            *o += c;
        }
    }
}

/// `f(x) = w * sum_i 1/2 ||A_i x - a_i||^2 + (ridge/2) ||x||^2`.
///
/// The ridge is split evenly across components so that the finite-sum
/// structure is preserved. `L` follows the stepsize rule
/// `w * sum_i ||A_i^T A_i|| + ridge`, an upper bound on the true constant.
///
/// When the blocks have more rows in total than columns, full gradients use
/// the normal equations `w sum_i A_i^T A_i` and `w sum_i A_i^T a_i`.
#[derive(Debug, Clone)]
pub struct LeastSquares {
    blocks: Vec<(Matrix, Vec<f64>)>,
    convention: SumConvention,
    ridge: f64,
    block_norms: Vec<f64>,
    normal: Option<(Matrix, Vec<f64>)>,
}

impl LeastSquares {
    pub fn new(blocks: Vec<(Matrix, Vec<f64>)>, convention: SumConvention) -> Result<Self> {
        let n = blocks.first().map(|b| b.0.cols()).ok_or(Error::Empty("least-squares blocks"))?;
        let mut block_norms = Vec::with_capacity(blocks.len());
        for (a, b) in &blocks {
            check_dim("least-squares block columns", n, a.cols())?;
            check_dim("least-squares block rhs", a.rows(), b.len())?;
            let est = LinearOperator::dense(a.clone()).op_norm_sq(1e-10, 100_000);
            block_norms.push(est.value);
        }
        let rows: usize = blocks.iter().map(|b| b.0.rows()).sum();
        let normal = (rows > n).then(|| {
            let w = convention.weight(blocks.len());
            let mut h = Matrix::zeros(n, n);
            let mut c = vec![0.0; n];
            let mut atb = vec![0.0; n];
            for (a, b) in &blocks {
                h.add_scaled(w, &a.gram_inner()).expect("square blocks of equal size");
                a.mul_t_vec_into(b, &mut atb);
                linalg::axpy(w, &atb, &mut c);
            }
            (h, c)
        });
        Ok(LeastSquares { blocks, convention, ridge: 0.0, block_norms, normal })
    }

    pub fn with_ridge(mut self, ridge: f64) -> Self {
        self.ridge = ridge;
        self
    }

    pub fn blocks(&self) -> &[(Matrix, Vec<f64>)] {
        &self.blocks
    }

    /// `||A_i^T A_i||` for each block.
    pub fn block_norms(&self) -> &[f64] {
        &self.block_norms
    }

    fn ridge_share(&self) -> f64 {
        let m = self.blocks.len();
        self.ridge / (m as f64 * self.convention.weight(m))
    }
}

impl SmoothFunction for LeastSquares {
    fn dim(&self) -> usize {
        self.blocks[0].0.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let w = self.convention.weight(self.blocks.len());
        let mut total = 0.0;
        for (a, b) in &self.blocks {
            let mut r = a.mul_vec(x).expect("dimension checked by caller");
            for (ri, bi) in r.iter_mut().zip(b) {
                *ri -= bi;
            }
            total += 0.5 * linalg::norm_sq(&r);
        }
        w * total + 0.5 * self.ridge * linalg::norm_sq(x)
    }

    fn lipschitz(&self) -> f64 {
        let w = self.convention.weight(self.blocks.len());
        w * self.block_norms.iter().sum::<f64>() + self.ridge
    }

    fn strong_convexity(&self) -> f64 {
        self.ridge
    }

    fn num_components(&self) -> usize {
        self.blocks.len()
    }

    fn convention(&self) -> SumConvention {
        self.convention
    }

    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        let (a, b) = &self.blocks[i];
        let mut r = vec![0.0; a.rows()];
        a.mul_vec_into(x, &mut r);
        for (ri, bi) in r.iter_mut().zip(b) {
            *ri -= bi;
        }
        a.mul_t_vec_into(&r, out);
        let share = self.ridge_share();
        if share != 0.0 {
            linalg::axpy(share, x, out);
        }
    }

    fn component_lipschitz(&self, i: usize) -> f64 {
        self.block_norms[i] + self.ridge_share()
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        let Some((h, c)) = &self.normal else {
            let m = self.blocks.len();
            let w = self.convention.weight(m);
            out.iter_mut().for_each(|o| *o = 0.0);
            let mut tmp = vec![0.0; out.len()];
            for i in 0..m {
                self.component_gradient_into(i, x, &mut tmp);
                linalg::axpy(w, &tmp, out);
            }
            return;
        };
        h.mul_vec_into(x, out);
        for ((o, ci), xi) in out.iter_mut().zip(c).zip(x) {
            *o += self.ridge * xi - ci;
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SampleLossKind {
    /// `ln(1 + exp(-b a^T x))`
    Logistic,
    /// `1/2 (a^T x - b)^2`
    Squared,
}

/// Empirical risk over sparse samples with a ridge:
/// `f(x) = (1/m) sum_j loss(a_j, b_j; x) + (ridge/2) ||x||^2`.
/// Each sample is one component.
#[derive(Debug, Clone)]
pub struct SampleLoss {
    samples: CsrMatrix,
    labels: Vec<f64>,
    kind: SampleLossKind,
    ridge: f64,
    data_bound: f64,
}

impl SampleLoss {
    pub fn new(samples: CsrMatrix, labels: Vec<f64>, kind: SampleLossKind, ridge: f64) -> Result<Self> {
        check_dim("sample labels", samples.rows(), labels.len())?;
        if samples.rows() == 0 {
            return Err(Error::Empty("sample shard"));
        }
        let m = samples.rows() as f64;
        let est = LinearOperator::sparse(samples.clone()).op_norm_sq(1e-10, 100_000);
        let curvature = match kind {
            SampleLossKind::Logistic => 0.25,
            SampleLossKind::Squared => 1.0,
        };
        Ok(SampleLoss { data_bound: curvature * est.value / m, samples, labels, kind, ridge })
    }

    pub fn samples(&self) -> &CsrMatrix {
        &self.samples
    }

    pub fn labels(&self) -> &[f64] {
        &self.labels
    }

    pub fn kind(&self) -> SampleLossKind {
        self.kind
    }

    /// Curvature bound of the data term alone (without the ridge).
    pub fn data_bound(&self) -> f64 {
        self.data_bound
    }

    fn loss(&self, j: usize, x: &[f64]) -> f64 {
        let z = self.samples.row_dot(j, x);
        let b = self.labels[j];
        match self.kind {
            SampleLossKind::Logistic => softplus(-b * z),
            SampleLossKind::Squared => 0.5 * (z - b) * (z - b),
        }
    }

    /// Derivative of the loss with respect to `a^T x`.
    fn loss_slope(&self, j: usize, x: &[f64]) -> f64 {
        let z = self.samples.row_dot(j, x);
        let b = self.labels[j];
        match self.kind {
            SampleLossKind::Logistic => -b * sigmoid(-b * z),
            SampleLossKind::Squared => z - b,
        }
    }
}

impl SmoothFunction for SampleLoss {
    fn dim(&self) -> usize {
        self.samples.cols()
    }

    fn value(&self, x: &[f64]) -> f64 {
        let m = self.samples.rows();
        let total: f64 = (0..m).map(|j| self.loss(j, x)).sum();
        total / m as f64 + 0.5 * self.ridge * linalg::norm_sq(x)
    }

    fn lipschitz(&self) -> f64 {
        self.data_bound + self.ridge
    }

    fn strong_convexity(&self) -> f64 {
        self.ridge
    }

    fn num_components(&self) -> usize {
        self.samples.rows()
    }

    fn convention(&self) -> SumConvention {
        SumConvention::Mean
    }

    fn component_gradient_into(&self, j: usize, x: &[f64], out: &mut [f64]) {
        let s = self.loss_slope(j, x);
        for (o, xi) in out.iter_mut().zip(x) {
            *o = self.ridge * xi;
        }
        for (k, a) in self.samples.row(j) {
            out[k] += s * a;
        }
    }

    fn component_lipschitz(&self, j: usize) -> f64 {
        let c = match self.kind {
            SampleLossKind::Logistic => 0.25,
            SampleLossKind::Squared => 1.0,
        };
        c * self.samples.row_norm_sq(j) + self.ridge
    }
}

fn softplus(t: f64) -> f64 {
    if t > 0.0 {
        t + libm::log1p(libm::exp(-t))
    } else {
        libm::log1p(libm::exp(t))
    }
}

fn sigmoid(t: f64) -> f64 {
    if t >= 0.0 {
        1.0 / (1.0 + libm::exp(-t))
    } else {
        let e = libm::exp(t);
        e / (1.0 + e)
    }
}

/// `f(x_1, ..., x_N) = sum_i f_i(x_i)` over stacked blocks.
#[derive(Debug, Clone)]
pub struct BlockSeparable {
    parts: Vec<Arc<dyn SmoothFunction>>,
    offsets: Vec<usize>,
}

impl BlockSeparable {
    pub fn new(parts: Vec<Arc<dyn SmoothFunction>>) -> Self {
        let mut offsets = Vec::with_capacity(parts.len() + 1);
        offsets.push(0);
        for p in &parts {
            offsets.push(offsets.last().unwrap() + p.dim());
        }
        BlockSeparable { parts, offsets }
    }

    fn block(&self, i: usize) -> core::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }
}

impl SmoothFunction for BlockSeparable {
    fn dim(&self) -> usize {
        *self.offsets.last().unwrap()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().enumerate().map(|(i, p)| p.value(&x[self.block(i)])).sum()
    }

    fn lipschitz(&self) -> f64 {
        self.parts.iter().map(|p| p.lipschitz()).fold(0.0, f64::max)
    }

    fn strong_convexity(&self) -> f64 {
        self.parts.iter().map(|p| p.strong_convexity()).reduce(f64::min).unwrap_or(0.0)
    }

    fn component_gradient_into(&self, _i: usize, x: &[f64], out: &mut [f64]) {
        self.gradient_into(x, out)
    }

    fn gradient_into(&self, x: &[f64], out: &mut [f64]) {
        for (i, p) in self.parts.iter().enumerate() {
            let r = self.block(i);
            p.gradient_into(&x[r.clone()], &mut out[r]);
        }
    }
}

/// `f(x) = sum_i f_i(x)` with all terms on the same variable.
#[derive(Debug, Clone)]
pub struct SharedSum {
    parts: Vec<Arc<dyn SmoothFunction>>,
}

impl SharedSum {
    pub fn new(parts: Vec<Arc<dyn SmoothFunction>>) -> Result<Self> {
        let n = parts.first().map(|p| p.dim()).ok_or(Error::Empty("shared sum"))?;
        for p in &parts {
            check_dim("shared sum term dimension", n, p.dim())?;
        }
        Ok(SharedSum { parts })
    }
}

impl SmoothFunction for SharedSum {
    fn dim(&self) -> usize {
        self.parts[0].dim()
    }

    fn value(&self, x: &[f64]) -> f64 {
        self.parts.iter().map(|p| p.value(x)).sum()
    }

    fn lipschitz(&self) -> f64 {
        self.parts.iter().map(|p| p.lipschitz()).sum()
    }

    fn strong_convexity(&self) -> f64 {
        self.parts.iter().map(|p| p.strong_convexity()).sum()
    }

    fn num_components(&self) -> usize {
        self.parts.len()
    }

    fn component_gradient_into(&self, i: usize, x: &[f64], out: &mut [f64]) {
        self.parts[i].gradient_into(x, out)
    }

    fn component_lipschitz(&self, i: usize) -> f64 {
        self.parts[i].lipschitz()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn quadratic_identity_gradient() {
        let q = Quadratic::new(Matrix::identity(2), vec![0.0, 0.0]).unwrap();
        assert_eq!(q.gradient(&[1.0, 2.0]), vec![1.0, 2.0]);
        assert!((q.lipschitz() - 1.0).abs() < 1e-10);
        assert!((q.value(&[1.0, 2.0]) - 2.5).abs() < 1e-15);
    }

    #[test]
    fn identical_components_match_either() {
        let a = Matrix::from_rows(&[&[1.0, 2.0], &[0.0, 1.0]]).unwrap();
        let b = vec![1.0, -1.0];
        let ls = LeastSquares::new(vec![(a.clone(), b.clone()), (a, b)], SumConvention::Mean).unwrap();
        let x = [0.3, -0.7];
        let mut g0 = vec![0.0; 2];
        ls.component_gradient_into(0, &x, &mut g0);
        let g = ls.gradient(&x);
        for (u, v) in g.iter().zip(&g0) {
            assert!((u - v).abs() < 1e-15);
        }
    }

    #[test]
    fn logistic_gradient_at_origin() {
        // one sample (a, b) = ((2, -1), 1): gradient at 0 is -b a / 2
        let s = CsrMatrix::from_rows(2, &[vec![(0, 2.0), (1, -1.0)]]).unwrap();
        let f = SampleLoss::new(s, vec![1.0], SampleLossKind::Logistic, 1.0).unwrap();
        assert_eq!(f.gradient(&[0.0, 0.0]), vec![-1.0, 0.5]);
        assert!((f.value(&[0.0, 0.0]) - core::f64::consts::LN_2).abs() < 1e-15);
    }

    #[test]
    fn softplus_is_stable() {
        assert!((softplus(800.0) - 800.0).abs() < 1e-12);
        assert!(softplus(-800.0) >= 0.0 && softplus(-800.0) < 1e-300);
        assert!((sigmoid(0.0) - 0.5).abs() < 1e-16);
    }
}
