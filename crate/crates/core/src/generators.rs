//! Seeded instance generators for the benchmark problems.

use alloc::sync::Arc;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use crate::distributed::AgentProblem;
use crate::error::{Error, Result};
use crate::linalg::{self, CsrMatrix, Matrix};
use crate::operator::LinearOperator;
use crate::problem::CompositeProblem;
use crate::prox::ProxTerm;
use crate::smooth::{LeastSquares, SampleLoss, SampleLossKind, SmoothFunction, SumConvention};

fn gaussian_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
    Matrix::from_fn(rows, cols, |_, _| rng.sample(StandardNormal))
}

fn gaussian_vec(rng: &mut ChaCha8Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample(StandardNormal)).collect()
}

/// Generalized Lasso with equality constraints:
/// `(1/2m) sum_i ||A_i x - a_i||^2 + ||B x||_1` subject to `D x = d`.
#[derive(Debug, Clone, PartialEq)]
pub struct LassoEqInstance {
    /// `m` blocks of size `2n x n`.
    pub a: Vec<Matrix>,
    pub a_rhs: Vec<Vec<f64>>,
    pub b: Matrix,
    pub d: Matrix,
    pub d_rhs: Vec<f64>,
    pub seed: u64,
    pub target_norm_dd: f64,
    /// `||D^T D||` after rescaling.
    pub norm_dd: f64,
}

/// Standard normal entries throughout, then `D` and `d` are rescaled by the
/// same factor so that `||D^T D||` matches `target_norm_dd`. The feasible set
/// does not depend on the target.
pub fn gen_lasso_eq(n: usize, m: usize, p1: usize, p2: usize, target_norm_dd: f64, seed: u64) -> Result<LassoEqInstance> {
    for (name, v) in [("n", n), ("m", m), ("p2", p2)] {
        if v == 0 {
            return Err(Error::InvalidParameter { name, value: 0.0, requirement: "positive dimension" });
        }
    }
    if !(target_norm_dd > 0.0) {
        return Err(Error::InvalidParameter {
            name: "target_norm_dd",
            value: target_norm_dd,
            requirement: "target_norm_dd > 0",
        });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut a = Vec::with_capacity(m);
    let mut a_rhs = Vec::with_capacity(m);
    for _ in 0..m {
        a.push(gaussian_matrix(&mut rng, 2 * n, n));
        a_rhs.push(gaussian_vec(&mut rng, 2 * n));
    }
    let b = gaussian_matrix(&mut rng, p1, n);
    let mut d = gaussian_matrix(&mut rng, p2, n);
    let mut d_rhs = gaussian_vec(&mut rng, p2);

    let raw = LinearOperator::dense(d.clone()).op_norm_sq(1e-12, 100_000).value;
    let s = libm::sqrt(target_norm_dd / raw);
    d.scale_in_place(s);
    linalg::scale(s, &mut d_rhs);
    let norm_dd = LinearOperator::dense(d.clone()).op_norm_sq(1e-12, 100_000).value;
    Ok(LassoEqInstance { a, a_rhs, b, d, d_rhs, seed, target_norm_dd, norm_dd })
}

impl LassoEqInstance {
    pub fn n(&self) -> usize {
        self.b.cols()
    }

    /// The least-squares term with `f_i = 1/2 ||A_i x - a_i||^2` averaged
    /// over blocks, plus `(ridge/2) ||x||^2`.
    pub fn smooth(&self, ridge: f64) -> Result<LeastSquares> {
        let blocks = self.a.iter().cloned().zip(self.a_rhs.iter().cloned()).collect();
        Ok(LeastSquares::new(blocks, SumConvention::Mean)?.with_ridge(ridge))
    }

    /// `L = (1/m) sum_i ||A_i^T A_i||` (plus the ridge).
    pub fn lipschitz(&self, ridge: f64) -> Result<f64> {
        Ok(self.smooth(ridge)?.lipschitz())
    }

    pub fn problem(&self, ridge: f64) -> Result<CompositeProblem> {
        let f: Arc<dyn SmoothFunction> = Arc::new(self.smooth(ridge)?);
        CompositeProblem::new(
            f,
            ProxTerm::L1 { weight: 1.0 },
            LinearOperator::dense(self.b.clone()),
            LinearOperator::dense(self.d.clone()),
            self.d_rhs.clone(),
        )
    }
}

/// Sparse samples with labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub samples: CsrMatrix,
    pub labels: Vec<f64>,
}

impl Dataset {
    pub fn new(samples: CsrMatrix, labels: Vec<f64>) -> Result<Self> {
        crate::error::check_dim("dataset labels", samples.rows(), labels.len())?;
        Ok(Dataset { samples, labels })
    }

    pub fn n_samples(&self) -> usize {
        self.samples.rows()
    }

    pub fn n_features(&self) -> usize {
        self.samples.cols()
    }

    /// Contiguous shard boundaries: `n_samples / parts` rows each, the
    /// remainder going to the last part.
    pub fn shard_bounds(&self, parts: usize) -> Result<Vec<(usize, usize)>> {
        let total = self.n_samples();
        let per = if parts == 0 { 0 } else { total / parts };
        if per == 0 {
            return Err(Error::Empty("agent shard"));
        }
        Ok((0..parts).map(|i| (i * per, if i + 1 == parts { total } else { (i + 1) * per })).collect())
    }
}

/// Binary classification data with sparse features, labels from a planted
/// linear model with 10% label noise.
pub fn gen_binary_dataset(n_samples: usize, n_features: usize, density: f64, seed: u64) -> Result<Dataset> {
    if n_samples == 0 || n_features == 0 {
        return Err(Error::Empty("synthetic dataset"));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(Error::InvalidParameter { name: "density", value: density, requirement: "0 < density <= 1" });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let w = gaussian_vec(&mut rng, n_features);
    let mut rows = Vec::with_capacity(n_samples);
    let mut labels = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let mut row = Vec::new();
        for j in 0..n_features {
            if rng.random::<f64>() < density {
                row.push((j, 1.0));
            }
        }
        if row.is_empty() {
            row.push((rng.random_range(0..n_features), 1.0));
        }
        let z: f64 = row.iter().map(|&(j, v)| v * w[j]).sum();
        let flip = rng.random::<f64>() < 0.1;
        labels.push(if (z >= 0.0) != flip { 1.0 } else { -1.0 });
        rows.push(row);
    }
    Dataset::new(CsrMatrix::from_rows(n_features, &rows)?, labels)
}

/// Per-agent regression problems on contiguous shards:
/// `f_i(x) = (1/m_i) sum loss + 1/2 ||x||^2` and `r_i(y) = 1/2 ||y||` with a
/// Gaussian `B_i` of `p1` rows.
pub fn gen_dist_regression(
    data: &Dataset,
    agents: usize,
    p1: usize,
    kind: SampleLossKind,
    seed: u64,
) -> Result<Vec<AgentProblem>> {
    let bounds = data.shard_bounds(agents)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(agents);
    for (lo, hi) in bounds {
        let shard = data.samples.slice_rows(lo..hi);
        let f = SampleLoss::new(shard, data.labels[lo..hi].to_vec(), kind, 1.0)?;
        let b = gaussian_matrix(&mut rng, p1, data.n_features());
        let r = if p1 == 0 { ProxTerm::Zero } else { ProxTerm::L2Norm { weight: 0.5 } };
        out.push(AgentProblem::new(Arc::new(f), r, b)?);
    }
    Ok(out)
}

/// Random strongly convex quadratic with `p2` equality constraints, used by
/// tests and the acceptance harness: returns `(H, c, D, d)`.
pub fn gen_eq_qp(n: usize, p2: usize, seed: u64) -> (Matrix, Vec<f64>, Matrix, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let g = gaussian_matrix(&mut rng, n, n);
    let mut h = g.gram_inner();
    h.scale_in_place(1.0 / n as f64);
    h.add_diag(0.5);
    let c = gaussian_vec(&mut rng, n);
    let d = gaussian_matrix(&mut rng, p2, n);
    let dv = gaussian_vec(&mut rng, p2);
    (h, c, d, dv)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn lasso_norm_hits_target() {
        let inst = gen_lasso_eq(20, 3, 4, 5, 1e3, 7).unwrap();
        assert!((inst.norm_dd - 1e3).abs() <= 50.0);
        assert_eq!(inst.a[0].rows(), 40);
        assert_eq!(inst, gen_lasso_eq(20, 3, 4, 5, 1e3, 7).unwrap());
    }

    #[test]
    fn shards_put_remainder_last() {
        let data = gen_binary_dataset(23, 4, 0.5, 1).unwrap();
        assert_eq!(data.shard_bounds(5).unwrap(), vec![(0, 4), (4, 8), (8, 12), (12, 16), (16, 23)]);
        assert_eq!(data.shard_bounds(24).unwrap_err(), Error::Empty("agent shard"));
    }

    #[test]
    fn dist_regression_shapes() {
        let data = gen_binary_dataset(40, 6, 0.3, 2).unwrap();
        let agents = gen_dist_regression(&data, 4, 3, SampleLossKind::Logistic, 9).unwrap();
        assert_eq!(agents.len(), 4);
        assert!(agents.iter().all(|a| a.b.rows() == 3 && a.dim() == 6));
        assert!(agents.iter().all(|a| a.f.num_components() == 10));
    }
}
