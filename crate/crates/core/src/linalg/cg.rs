use alloc::vec;
use alloc::vec::Vec;

#[derive(Debug, Clone, PartialEq)]
pub struct CgOutcome {
    pub x: Vec<f64>,
    pub iterations: usize,
    /// `||b - A x|| / ||b||` at exit.
    pub relative_residual: f64,
    pub converged: bool,
}

/// Jacobi-preconditioned conjugate gradients for a symmetric positive
/// definite operator given by `apply(v, out)`.
pub fn pcg(
    apply: impl Fn(&[f64], &mut [f64]),
    diag: &[f64],
    b: &[f64],
    rel_tol: f64,
    max_iter: usize,
) -> CgOutcome {
    let n = b.len();
    let b_norm = super::norm(b);
    let mut x = vec![0.0; n];
    if b_norm == 0.0 {
        return CgOutcome { x, iterations: 0, relative_residual: 0.0, converged: true };
    }
    let mut r = b.to_vec();
    let mut z: Vec<f64> = r.iter().zip(diag).map(|(ri, di)| ri / di).collect();
    let mut p = z.clone();
    let mut ap = vec![0.0; n];
    let mut rz = super::dot(&r, &z);
    let mut res = 1.0;
    for it in 0..max_iter {
        apply(&p, &mut ap);
        let step = rz / super::dot(&p, &ap);
        super::axpy(step, &p, &mut x);
        super::axpy(-step, &ap, &mut r);
        res = super::norm(&r) / b_norm;
        if res <= rel_tol {
            return CgOutcome { x, iterations: it + 1, relative_residual: res, converged: true };
        }
        for ((zi, ri), di) in z.iter_mut().zip(&r).zip(diag) {
            *zi = ri / di;
        }
        let rz_new = super::dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for (pi, zi) in p.iter_mut().zip(&z) {
            *pi = zi + beta * *pi;
        }
    }
    CgOutcome { x, iterations: max_iter, relative_residual: res, converged: false }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::Matrix;

    #[test]
    fn solves_small_spd() {
        let a = Matrix::from_rows(&[&[4.0, 1.0, 0.0], &[1.0, 3.0, 1.0], &[0.0, 1.0, 2.0]]).unwrap();
        let b = [1.0, 2.0, 3.0];
        let out = pcg(|v, o| a.mul_vec_into(v, o), &a.diag(), &b, 1e-14, 50);
        assert!(out.converged);
        let back = a.mul_vec(&out.x).unwrap();
        for (x, y) in back.iter().zip(&b) {
            assert!((x - y).abs() < 1e-12);
        }
    }
}
