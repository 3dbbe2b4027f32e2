//! Reference solutions of `min 1/2 x^T H x + c^T x  s.t.  Dx = d` from the
//! dense KKT system
//!
//! ```text
//! [ H  D^T ] [ x ]   [ -c ]
//! [ D   0  ] [ l ] = [  d ]
//! ```
//!
//! solved by Schur complement with two Cholesky factors and a few rounds of
//! iterative refinement.

use alloc::vec;
use alloc::vec::Vec;

use crate::error::{check_dim, Error, Result};
use crate::linalg::{self, Cholesky, Matrix};

#[derive(Debug, Clone, PartialEq)]
pub struct KktSolution {
    pub x: Vec<f64>,
    pub lambda: Vec<f64>,
    /// `||H x + c + D^T lambda||`
    pub stationarity: f64,
    /// `||D x - d||`
    pub feasibility: f64,
}

pub fn kkt_oracle(h: &Matrix, c: &[f64], d: &Matrix, dvec: &[f64]) -> Result<KktSolution> {
    let n = h.rows();
    check_dim("KKT: H square", n, h.cols())?;
    check_dim("KKT: c", n, c.len())?;
    check_dim("KKT: D columns", n, d.cols())?;
    check_dim("KKT: d", d.rows(), dvec.len())?;
    let p = d.rows();
    let rank = d.row_rank(1e-12);
    if rank < p {
        return Err(Error::RankDeficient { rows: p, deficient: p - rank });
    }

    let hf = Cholesky::factor(h)?;
    // S = D H^{-1} D^T
    let dt = d.transpose();
    let mut hinv_dt = Matrix::zeros(n, p);
    for j in 0..p {
        let col: Vec<f64> = (0..n).map(|i| dt[(i, j)]).collect();
        let sol = hf.solve(&col)?;
        for i in 0..n {
            hinv_dt[(i, j)] = sol[i];
        }
    }
    let schur = d.matmul(&hinv_dt)?;
    let sf = if p > 0 { Some(Cholesky::factor(&schur)?) } else { None };

    let solve = |rx: &[f64], rl: &[f64]| -> (Vec<f64>, Vec<f64>) {
        // H dx + D^T dl = rx ; D dx = rl
        let hinv_rx = hf.solve(rx).expect("sized");
        let lam = match &sf {
            Some(sf) => {
                let mut rhs = d.mul_vec(&hinv_rx).expect("sized");
                for (r, v) in rhs.iter_mut().zip(rl) {
                    *r -= v;
                }
                sf.solve(&rhs).expect("sized")
            }
            None => Vec::new(),
        };
        let mut x = hinv_rx;
        if p > 0 {
            let corr = hinv_dt.mul_vec(&lam).expect("sized");
            for (xi, ci) in x.iter_mut().zip(&corr) {
                *xi -= ci;
            }
        }
        (x, lam)
    };

    let neg_c: Vec<f64> = c.iter().map(|v| -v).collect();
    let (mut x, mut lambda) = solve(&neg_c, dvec);
    let mut best = residuals(h, c, d, dvec, &x, &lambda);
    for _ in 0..3 {
        if best.0 <= 1e-13 && best.1 <= 1e-13 {
            break;
        }
        let (rx, rl) = residual_vectors(h, c, d, dvec, &x, &lambda);
        let (dx, dl) = solve(&rx, &rl);
        let x2 = linalg::add(&x, &dx);
        let l2 = linalg::add(&lambda, &dl);
        let r2 = residuals(h, c, d, dvec, &x2, &l2);
        if r2.0 + r2.1 < best.0 + best.1 {
            x = x2;
            lambda = l2;
            best = r2;
        } else {
            break;
        }
    }
    Ok(KktSolution { x, lambda, stationarity: best.0, feasibility: best.1 })
}

fn residual_vectors(h: &Matrix, c: &[f64], d: &Matrix, dvec: &[f64], x: &[f64], l: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let mut rx = vec![0.0; x.len()];
    h.mul_vec_into(x, &mut rx);
    let dtl = d.mul_t_vec(l).expect("sized");
    for i in 0..rx.len() {
        rx[i] = -(rx[i] + c[i] + dtl[i]);
    }
    let dx = d.mul_vec(x).expect("sized");
    let rl: Vec<f64> = dvec.iter().zip(&dx).map(|(a, b)| a - b).collect();
    (rx, rl)
}

fn residuals(h: &Matrix, c: &[f64], d: &Matrix, dvec: &[f64], x: &[f64], l: &[f64]) -> (f64, f64) {
    let (rx, rl) = residual_vectors(h, c, d, dvec, x, l);
    (linalg::norm(&rx), linalg::norm(&rl))
}
