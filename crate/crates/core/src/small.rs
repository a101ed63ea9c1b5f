//! Small dense complex matrices on the qubit (central system) space.

use std::ops::{Add, Mul, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

/// Square complex matrix stored row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SmallMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl SmallMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for k in 0..dim {
            m[(k, k)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    pub fn from_real(rows: &[&[f64]]) -> Self {
        let dim = rows.len();
        let mut m = Self::zeros(dim);
        for (r, row) in rows.iter().enumerate() {
            assert_eq!(row.len(), dim, "matrix must be square");
            for (c, &v) in row.iter().enumerate() {
                m[(r, c)] = Complex64::new(v, 0.0);
            }
        }
        m
    }

    pub fn from_real_2x2(m: [[f64; 2]; 2]) -> Self {
        Self::from_real(&[&m[0], &m[1]])
    }

    pub fn diagonal(values: &[f64]) -> Self {
        let mut m = Self::zeros(values.len());
        for (k, &v) in values.iter().enumerate() {
            m[(k, k)] = Complex64::new(v, 0.0);
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn transpose(&self) -> Self {
        let mut out = Self::zeros(self.dim);
        for r in 0..self.dim {
            for c in 0..self.dim {
                out[(c, r)] = self[(r, c)];
            }
        }
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.transpose();
        out.data.iter_mut().for_each(|z| *z = z.conj());
        out
    }

    pub fn scale(&self, s: Complex64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|z| z * s).collect() }
    }

    pub fn scale_real(&self, s: f64) -> Self {
        self.scale(Complex64::new(s, 0.0))
    }

    pub fn commutator(&self, other: &Self) -> Self {
        &(self * other) - &(other * self)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    /// `max |A - A^†|` elementwise.
    pub fn hermiticity_error(&self) -> f64 {
        (self - &self.adjoint()).max_abs()
    }

    /// Largest imaginary part magnitude.
    pub fn max_imag(&self) -> f64 {
        self.data.iter().map(|z| z.im.abs()).fold(0.0, f64::max)
    }

    /// Real part as row-major `f64` values.
    pub fn real_part(&self) -> Vec<f64> {
        self.data.iter().map(|z| z.re).collect()
    }

    /// Eigenvalues of a Hermitian matrix, ascending. Computed through the real
    /// symmetric embedding `[[Re, -Im], [Im, Re]]`, whose spectrum is the
    /// Hermitian spectrum with every value doubled.
    pub fn hermitian_eigenvalues(&self) -> Vec<f64> {
        let n = self.dim;
        let big = 2 * n;
        let mut a = vec![0.0; big * big];
        for r in 0..n {
            for c in 0..n {
                let z = 0.5 * (self[(r, c)] + self[(c, r)].conj());
                a[r * big + c] = z.re;
                a[(r + n) * big + (c + n)] = z.re;
                a[(r + n) * big + c] = z.im;
                a[r * big + (c + n)] = -z.im;
            }
        }
        let values = crate::eigensolver::eigvalsh_unchecked(a, big);
        values.into_iter().step_by(2).collect()
    }
}

impl std::ops::Index<(usize, usize)> for SmallMatrix {
    type Output = Complex64;
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl std::ops::IndexMut<(usize, usize)> for SmallMatrix {
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

impl Mul for &SmallMatrix {
    type Output = SmallMatrix;
    fn mul(self, rhs: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.dim, rhs.dim);
        let n = self.dim;
        let mut out = SmallMatrix::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self[(r, k)];
                for c in 0..n {
                    out[(r, c)] += a * rhs[(k, c)];
                }
            }
        }
        out
    }
}

impl Add for &SmallMatrix {
    type Output = SmallMatrix;
    fn add(self, rhs: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.dim, rhs.dim);
        SmallMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect() }
    }
}

impl Sub for &SmallMatrix {
    type Output = SmallMatrix;
    fn sub(self, rhs: &SmallMatrix) -> SmallMatrix {
        assert_eq!(self.dim, rhs.dim);
        SmallMatrix { dim: self.dim, data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect() }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pauli_commutator() {
        let sx = SmallMatrix::from_real_2x2([[0.0, 0.5], [0.5, 0.0]]);
        let sz = SmallMatrix::from_real_2x2([[-0.5, 0.0], [0.0, 0.5]]);
        let comm = sx.commutator(&sz);
        // S^z = diag(-1/2, 1/2) here, so [S^x, S^z] = [[0, 1/2], [-1/2, 0]]
        assert!((comm[(0, 1)].re - 0.5).abs() < 1e-15);
        assert!((comm[(1, 0)].re + 0.5).abs() < 1e-15);
        assert!(comm.trace().norm() < 1e-15);
    }

    #[test]
    fn hermitian_eigenvalues_of_complex_matrix() {
        let mut m = SmallMatrix::diagonal(&[1.0, -1.0]);
        m[(0, 1)] = Complex64::new(0.0, 1.0);
        m[(1, 0)] = Complex64::new(0.0, -1.0);
        let ev = m.hermitian_eigenvalues();
        let s = 2f64.sqrt();
        assert!((ev[0] + s).abs() < 1e-12 && (ev[1] - s).abs() < 1e-12);
    }
}
