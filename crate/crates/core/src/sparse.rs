//! Row-compressed real symmetric matrices and their action on complex vectors.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum SparseError {
    #[error("dimension mismatch: matrix is {expected}x{expected}, vector has length {found}")]
    DimensionMismatch { expected: usize, found: usize },
}

/// Real matrix in compressed sparse row layout.
///
/// Column indices are sorted and unique within each row. All builders in this
/// crate produce symmetric matrices; [`SparseHamiltonian::symmetry_error`]
/// checks it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SparseHamiltonian {
    dim: usize,
    row_offsets: Vec<usize>,
    col_indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseHamiltonian {
    pub fn identity(dim: usize) -> Self {
        Self {
            dim,
            row_offsets: (0..=dim).collect(),
            col_indices: (0..dim).collect(),
            values: vec![1.0; dim],
        }
    }

    /// Assembles a matrix from `(row, col, value)` triplets. Duplicates are
    /// summed and exact zeros are dropped.
    pub fn from_triplets(dim: usize, mut triplets: Vec<(usize, usize, f64)>) -> Self {
        triplets.sort_by_key(|t| (t.0, t.1));
        let mut row_offsets = Vec::with_capacity(dim + 1);
        let mut col_indices = Vec::with_capacity(triplets.len());
        let mut values: Vec<f64> = Vec::with_capacity(triplets.len());
        row_offsets.push(0);
        let mut row = 0;
        let mut iter = triplets.into_iter().peekable();
        while let Some((r, c, mut v)) = iter.next() {
            assert!(r < dim && c < dim, "triplet ({r}, {c}) outside {dim}x{dim}");
            while let Some(&(r2, c2, v2)) = iter.peek() {
                if r2 == r && c2 == c {
                    v += v2;
                    iter.next();
                } else {
                    break;
                }
            }
            while row < r {
                row_offsets.push(col_indices.len());
                row += 1;
            }
            if v != 0.0 {
                col_indices.push(c);
                values.push(v);
            }
        }
        while row < dim {
            row_offsets.push(col_indices.len());
            row += 1;
        }
        Self { dim, row_offsets, col_indices, values }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row_offsets(&self) -> &[usize] {
        &self.row_offsets
    }

    pub fn col_indices(&self) -> &[usize] {
        &self.col_indices
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// Iterator over the stored `(col, value)` pairs of one row.
    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, f64)> + '_ {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        self.col_indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        let span = self.row_offsets[r]..self.row_offsets[r + 1];
        match self.col_indices[span.clone()].binary_search(&c) {
            Ok(k) => self.values[span.start + k],
            Err(_) => 0.0,
        }
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|r| self.get(r, r)).sum()
    }

    /// Largest `|A_rc - A_cr|` over stored entries, including entries whose
    /// mirror is structurally absent.
    pub fn symmetry_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                worst = worst.max((v - self.get(c, r)).abs());
            }
        }
        worst
    }

    pub fn is_symmetric(&self, tol: f64) -> bool {
        self.symmetry_error() <= tol
    }

    /// `y = A x` for complex `x`.
    pub fn matvec(&self, x: &[Complex64]) -> Result<Vec<Complex64>, SparseError> {
        let mut y = vec![Complex64::new(0.0, 0.0); self.dim];
        self.matvec_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_into(&self, x: &[Complex64], y: &mut [Complex64]) -> Result<(), SparseError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        for (r, out) in y.iter_mut().enumerate() {
            let span = self.row_offsets[r]..self.row_offsets[r + 1];
            let mut acc = Complex64::new(0.0, 0.0);
            for (&c, &v) in self.col_indices[span.clone()].iter().zip(&self.values[span]) {
                acc += x[c] * v;
            }
            *out = acc;
        }
        Ok(())
    }

    /// `y = A x` for real `x`.
    pub fn matvec_real(&self, x: &[f64]) -> Result<Vec<f64>, SparseError> {
        let mut y = vec![0.0; self.dim];
        self.matvec_real_into(x, &mut y)?;
        Ok(y)
    }

    pub fn matvec_real_into(&self, x: &[f64], y: &mut [f64]) -> Result<(), SparseError> {
        self.check_len(x.len())?;
        self.check_len(y.len())?;
        for (r, out) in y.iter_mut().enumerate() {
            let span = self.row_offsets[r]..self.row_offsets[r + 1];
            *out = self.col_indices[span.clone()]
                .iter()
                .zip(&self.values[span])
                .map(|(&c, &v)| v * x[c])
                .sum();
        }
        Ok(())
    }

    /// `<x|A|x>` for complex `x` (real because `A` is real symmetric).
    pub fn expectation(&self, x: &[Complex64]) -> Result<f64, SparseError> {
        let ax = self.matvec(x)?;
        Ok(x.iter().zip(&ax).map(|(a, b)| (a.conj() * b).re).sum())
    }

    /// Row-major dense copy.
    pub fn to_dense(&self) -> Vec<f64> {
        let mut out = vec![0.0; self.dim * self.dim];
        for r in 0..self.dim {
            for (c, v) in self.row(r) {
                out[r * self.dim + c] = v;
            }
        }
        out
    }

    /// `a A + b B` on the union of sparsity patterns.
    pub fn linear_combination(a: f64, lhs: &Self, b: f64, rhs: &Self) -> Self {
        assert_eq!(lhs.dim, rhs.dim);
        let mut triplets = Vec::with_capacity(lhs.nnz() + rhs.nnz());
        for r in 0..lhs.dim {
            triplets.extend(lhs.row(r).map(|(c, v)| (r, c, a * v)));
            triplets.extend(rhs.row(r).map(|(c, v)| (r, c, b * v)));
        }
        Self::from_triplets(lhs.dim, triplets)
    }

    fn check_len(&self, len: usize) -> Result<(), SparseError> {
        if len == self.dim {
            Ok(())
        } else {
            Err(SparseError::DimensionMismatch { expected: self.dim, found: len })
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_matvec_returns_input() {
        let id = SparseHamiltonian::identity(5);
        let x: Vec<Complex64> = (0..5).map(|k| Complex64::new(k as f64, -(k as f64) / 3.0)).collect();
        assert_eq!(id.matvec(&x).unwrap(), x);
    }

    #[test]
    fn triplets_merge_and_drop_zeros() {
        let m = SparseHamiltonian::from_triplets(
            3,
            vec![(2, 0, 1.0), (0, 2, 1.0), (1, 1, 0.5), (1, 1, -0.5), (0, 2, 0.25)],
        );
        assert_eq!(m.nnz(), 2);
        assert_eq!(m.get(0, 2), 1.25);
        assert_eq!(m.get(1, 1), 0.0);
        assert_eq!(m.row_offsets(), &[0, 1, 1, 2]);
    }

    #[test]
    fn asymmetric_entries_are_reported() {
        let m = SparseHamiltonian::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 0.5)]);
        assert!((m.symmetry_error() - 0.5).abs() < 1e-15);
        let lone = SparseHamiltonian::from_triplets(2, vec![(0, 1, 2.0)]);
        assert_eq!(lone.symmetry_error(), 2.0);
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let id = SparseHamiltonian::identity(3);
        let err = id.matvec(&[Complex64::new(1.0, 0.0); 2]).unwrap_err();
        assert_eq!(err, SparseError::DimensionMismatch { expected: 3, found: 2 });
    }
}
