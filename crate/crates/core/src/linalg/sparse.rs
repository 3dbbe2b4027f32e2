use alloc::vec::Vec;

use super::Matrix;
use crate::error::{check_dim, Error, Result};

/// Compressed sparse row matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct CsrMatrix {
    rows: usize,
    cols: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl CsrMatrix {
    /// Builds from per-row `(column, value)` lists. Columns within a row need
    /// not be sorted; duplicates are summed.
    pub fn from_rows(cols: usize, rows: &[Vec<(usize, f64)>]) -> Result<Self> {
        let mut indptr = Vec::with_capacity(rows.len() + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            let mut entries = row.clone();
            entries.sort_by_key(|e| e.0);
            let mut last: Option<usize> = None;
            for (j, v) in entries {
                if j >= cols {
                    return Err(Error::DimensionMismatch { context: "sparse column index", expected: cols, found: j });
                }
                if last == Some(j) {
                    *values.last_mut().unwrap() += v;
                } else {
                    indices.push(j);
                    values.push(v);
                    last = Some(j);
                }
            }
            indptr.push(indices.len());
        }
        Ok(CsrMatrix { rows: rows.len(), cols, indptr, indices, values })
    }

    pub fn from_dense(m: &Matrix) -> Self {
        let rows: Vec<Vec<(usize, f64)>> = (0..m.rows())
            .map(|i| m.row(i).iter().copied().enumerate().filter(|(_, v)| *v != 0.0).collect())
            .collect();
        CsrMatrix::from_rows(m.cols(), &rows).expect("dense columns are in range")
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    /// `(column, value)` pairs of row `i`.
    pub fn row(&self, i: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let r = self.indptr[i]..self.indptr[i + 1];
        self.indices[r.clone()].iter().copied().zip(self.values[r].iter().copied())
    }

    pub fn row_dot(&self, i: usize, v: &[f64]) -> f64 {
        self.row(i).map(|(j, a)| a * v[j]).sum()
    }

    pub fn row_norm_sq(&self, i: usize) -> f64 {
        self.row(i).map(|(_, a)| a * a).sum()
    }

    pub fn mul_vec_into(&self, v: &[f64], out: &mut [f64]) {
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.row_dot(i, v);
        }
    }

    pub fn mul_t_vec_into(&self, w: &[f64], out: &mut [f64]) {
        out.iter_mut().for_each(|o| *o = 0.0);
        for (i, wi) in w.iter().enumerate() {
            for (j, a) in self.row(i) {
                out[j] += a * wi;
            }
        }
    }

    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_dim("sparse matrix-vector product", self.cols, v.len())?;
        let mut out = alloc::vec![0.0; self.rows];
        self.mul_vec_into(v, &mut out);
        Ok(out)
    }

    /// Rows `range` as a new matrix with the same column count.
    pub fn slice_rows(&self, range: core::ops::Range<usize>) -> CsrMatrix {
        let start = self.indptr[range.start];
        let end = self.indptr[range.end];
        let indptr = self.indptr[range.start..=range.end].iter().map(|p| p - start).collect();
        CsrMatrix {
            rows: range.len(),
            cols: self.cols,
            indptr,
            indices: self.indices[start..end].to_vec(),
            values: self.values[start..end].to_vec(),
        }
    }

    pub fn to_dense(&self) -> Matrix {
        let mut m = Matrix::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            for (j, v) in self.row(i) {
                m[(i, j)] = v;
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::vec;

    #[test]
    fn duplicates_sum_and_slices_keep_columns() {
        let m = CsrMatrix::from_rows(4, &[vec![(3, 1.0), (0, 2.0), (3, 1.5)], vec![], vec![(1, -1.0)]]).unwrap();
        assert_eq!(m.nnz(), 3);
        assert_eq!(m.row(0).collect::<Vec<_>>(), vec![(0, 2.0), (3, 2.5)]);
        let s = m.slice_rows(1..3);
        assert_eq!(s.rows(), 2);
        assert_eq!(s.mul_vec(&[0.0, 2.0, 0.0, 0.0]).unwrap(), vec![0.0, -2.0]);
        assert!(CsrMatrix::from_rows(2, &[vec![(2, 1.0)]]).is_err());
    }
}
