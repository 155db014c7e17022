//! Symmetric sparse matrices in compressed-row form.
//!
//! Assembly routines hand in one triplet per stored entry with `row <= col`;
//! the lower triangle is mirrored internally so matrix-vector products touch
//! every coefficient. Entries for a repeated `(row, col)` position are summed.

use nalgebra::DMatrix;

use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct SparseSym {
    n: usize,
    row_ptr: Vec<usize>,
    col_idx: Vec<u32>,
    values: Vec<f64>,
}

impl SparseSym {
    /// Builds an `n x n` symmetric matrix from upper-triangle triplets.
    pub fn from_upper_triplets(n: usize, triplets: &[(u32, u32, f64)]) -> Result<Self> {
        let mut entries: Vec<(u32, u32, f64)> = Vec::with_capacity(2 * triplets.len());
        for &(i, j, v) in triplets {
            if i as usize >= n || j as usize >= n {
                return Err(Error::InvalidParameter(format!(
                    "triplet ({i}, {j}) out of range for size {n}"
                )));
            }
            if i > j {
                return Err(Error::InvalidParameter(format!(
                    "triplet ({i}, {j}) lies below the diagonal"
                )));
            }
            if !v.is_finite() {
                return Err(Error::InvalidParameter(format!(
                    "non-finite value at ({i}, {j})"
                )));
            }
            entries.push((i, j, v));
            if i != j {
                entries.push((j, i, v));
            }
        }
        entries.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));

        let mut row_ptr = vec![0usize; n + 1];
        let mut col_idx = Vec::with_capacity(entries.len());
        let mut values = Vec::with_capacity(entries.len());
        let mut last: Option<(u32, u32)> = None;
        for (i, j, v) in entries {
            if last == Some((i, j)) {
                *values.last_mut().unwrap() += v;
                continue;
            }
            // row_ptr[i + 1] counts entries in row i for now; prefix-summed below.
            row_ptr[i as usize + 1] += 1;
            col_idx.push(j);
            values.push(v);
            last = Some((i, j));
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        Ok(Self {
            n,
            row_ptr,
            col_idx,
            values,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let row = &self.col_idx[self.row_ptr[i]..self.row_ptr[i + 1]];
        match row.binary_search(&(j as u32)) {
            Ok(k) => self.values[self.row_ptr[i] + k],
            Err(_) => 0.0,
        }
    }

    pub fn matvec_into(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let mut acc = 0.0;
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                acc += self.values[k] * x[self.col_idx[k] as usize];
            }
            y[i] = acc;
        }
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        let mut y = vec![0.0; self.n];
        self.matvec_into(x, &mut y);
        y
    }

    pub fn diag(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.get(i, i)).collect()
    }

    pub fn row_sums(&self) -> Vec<f64> {
        (0..self.n)
            .map(|i| self.values[self.row_ptr[i]..self.row_ptr[i + 1]].iter().sum())
            .collect()
    }

    /// Maximum absolute row sum.
    pub fn inf_norm(&self) -> f64 {
        (0..self.n)
            .map(|i| {
                self.values[self.row_ptr[i]..self.row_ptr[i + 1]]
                    .iter()
                    .map(|v| v.abs())
                    .sum::<f64>()
            })
            .fold(0.0, f64::max)
    }

    pub fn scale(&mut self, s: f64) {
        for v in &mut self.values {
            *v *= s;
        }
    }

    /// Stored entries of the upper triangle, row-major.
    pub fn upper_triplets(&self) -> Vec<(u32, u32, f64)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                let j = self.col_idx[k];
                if j >= i as u32 {
                    out.push((i as u32, j, self.values[k]));
                }
            }
        }
        out
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            for k in self.row_ptr[i]..self.row_ptr[i + 1] {
                m[(i, self.col_idx[k] as usize)] = self.values[k];
            }
        }
        m
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mirrors_and_merges_duplicates() {
        let m = SparseSym::from_upper_triplets(3, &[(0, 1, 2.0), (0, 1, 0.5), (1, 1, 1.0)]).unwrap();
        assert_eq!(m.get(0, 1), 2.5);
        assert_eq!(m.get(1, 0), 2.5);
        assert_eq!(m.get(1, 1), 1.0);
        assert_eq!(m.get(2, 2), 0.0);
        assert_eq!(m.nnz(), 3);
    }

    #[test]
    fn matvec_matches_dense() {
        let m = SparseSym::from_upper_triplets(3, &[(0, 0, 2.0), (0, 2, -1.0), (1, 1, 3.0)]).unwrap();
        let x = [1.0, 2.0, 3.0];
        let y = m.matvec(&x);
        let yd = m.to_dense() * nalgebra::DVector::from_row_slice(&x);
        for i in 0..3 {
            assert_eq!(y[i], yd[i]);
        }
    }

    #[test]
    fn rejects_lower_triplets() {
        assert!(SparseSym::from_upper_triplets(2, &[(1, 0, 1.0)]).is_err());
    }

    #[test]
    fn rejects_out_of_range() {
        assert!(SparseSym::from_upper_triplets(2, &[(0, 2, 1.0)]).is_err());
    }
}
