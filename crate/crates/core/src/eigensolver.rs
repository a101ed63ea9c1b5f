//! Dense real-symmetric eigendecomposition and level-spacing statistics.
//!
//! The matrix is reduced to tridiagonal form by Householder reflections that
//! work on the lower triangle, row by row from the bottom, so every inner loop
//! runs over contiguous memory. The tridiagonal problem is then solved by the
//! implicit QL algorithm with Wilkinson-style shifts.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::sparse::SparseHamiltonian;

/// Inputs whose `|A_ij - A_ji|` exceeds this (relative to `max(1, max|A|)`)
/// are rejected.
pub const SYMMETRY_TOL: f64 = 1e-12;

const MAX_QL_SWEEPS: usize = 60;

#[derive(Debug, Error, PartialEq)]
pub enum EigenError {
    #[error("matrix buffer has {found} entries, expected {dim}x{dim}")]
    Shape { dim: usize, found: usize },
    #[error("matrix is not symmetric: |A[{row},{col}] - A[{col},{row}]| = {error:e}")]
    NotSymmetric { row: usize, col: usize, error: f64 },
    #[error("matrix contains non-finite entries")]
    NonFinite,
    #[error("QL iteration did not converge for eigenvalue {0}")]
    NoConvergence(usize),
}

/// Ascending eigenvalues and orthonormal eigenvectors, stored column-major so
/// eigenvector `k` is the contiguous slice `vectors[k*dim..(k+1)*dim]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EigenDecomposition {
    dim: usize,
    energies: Vec<f64>,
    vectors: Vec<f64>,
}

impl EigenDecomposition {
    pub fn from_parts(energies: Vec<f64>, vectors: Vec<f64>) -> Result<Self, EigenError> {
        let dim = energies.len();
        if vectors.len() != dim * dim {
            return Err(EigenError::Shape { dim, found: vectors.len() });
        }
        Ok(Self { dim, energies, vectors })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn energies(&self) -> &[f64] {
        &self.energies
    }

    /// Column-major eigenvector matrix.
    pub fn vectors(&self) -> &[f64] {
        &self.vectors
    }

    pub fn vector(&self, k: usize) -> &[f64] {
        &self.vectors[k * self.dim..(k + 1) * self.dim]
    }

    pub fn into_parts(self) -> (Vec<f64>, Vec<f64>) {
        (self.energies, self.vectors)
    }

    /// `c_n = <n|x>` for a state `x` in the original basis.
    pub fn project(&self, x: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(x.len(), self.dim);
        (0..self.dim)
            .map(|k| self.vector(k).iter().zip(x).map(|(&v, z)| z * v).sum())
            .collect()
    }

    /// `x = Σ_n c_n |n>`, the inverse of [`EigenDecomposition::project`].
    pub fn expand(&self, coeffs: &[Complex64]) -> Vec<Complex64> {
        assert_eq!(coeffs.len(), self.dim);
        let mut x = vec![Complex64::new(0.0, 0.0); self.dim];
        for (k, c) in coeffs.iter().enumerate() {
            if c.re == 0.0 && c.im == 0.0 {
                continue;
            }
            for (xi, &v) in x.iter_mut().zip(self.vector(k)) {
                *xi += c * v;
            }
        }
        x
    }

    /// `max |Q^T Q - I|`. Cubic in the dimension.
    pub fn orthogonality_error(&self) -> f64 {
        let mut worst = 0.0_f64;
        for a in 0..self.dim {
            for b in a..self.dim {
                let dot: f64 = self.vector(a).iter().zip(self.vector(b)).map(|(x, y)| x * y).sum();
                let target = if a == b { 1.0 } else { 0.0 };
                worst = worst.max((dot - target).abs());
            }
        }
        worst
    }

    /// `max |A Q - Q Λ|` for the matrix the decomposition came from.
    pub fn residual(&self, a: &SparseHamiltonian) -> f64 {
        assert_eq!(a.dim(), self.dim);
        let mut av = vec![0.0; self.dim];
        let mut worst = 0.0_f64;
        for k in 0..self.dim {
            let v = self.vector(k);
            a.matvec_real_into(v, &mut av).expect("dimensions checked");
            let e = self.energies[k];
            for (x, y) in av.iter().zip(v) {
                worst = worst.max((x - e * y).abs());
            }
        }
        worst
    }
}

fn validate(a: &[f64], n: usize) -> Result<(), EigenError> {
    if a.len() != n * n {
        return Err(EigenError::Shape { dim: n, found: a.len() });
    }
    if a.iter().any(|x| !x.is_finite()) {
        return Err(EigenError::NonFinite);
    }
    let scale = a.iter().fold(1.0_f64, |m, x| m.max(x.abs()));
    for r in 0..n {
        for c in 0..r {
            let error = (a[r * n + c] - a[c * n + r]).abs();
            if error > SYMMETRY_TOL * scale {
                return Err(EigenError::NotSymmetric { row: r, col: c, error });
            }
        }
    }
    Ok(())
}

/// Full eigendecomposition of a row-major real symmetric matrix.
pub fn eigh(a: &[f64], n: usize) -> Result<EigenDecomposition, EigenError> {
    validate(a, n)?;
    decompose(a.to_vec(), n)
}

/// Like [`eigh`] but consumes the buffer, avoiding a copy at large dimension.
pub fn eigh_owned(a: Vec<f64>, n: usize) -> Result<EigenDecomposition, EigenError> {
    validate(&a, n)?;
    decompose(a, n)
}

pub fn eigh_sparse(h: &SparseHamiltonian) -> Result<EigenDecomposition, EigenError> {
    eigh_owned(h.to_dense(), h.dim())
}

/// Eigenvalues only, ascending.
pub fn eigvalsh(a: &[f64], n: usize) -> Result<Vec<f64>, EigenError> {
    validate(a, n)?;
    values_only(a.to_vec(), n)
}

pub fn eigvalsh_sparse(h: &SparseHamiltonian) -> Result<Vec<f64>, EigenError> {
    let n = h.dim();
    let a = h.to_dense();
    validate(&a, n)?;
    values_only(a, n)
}

/// Eigenvalues of a matrix the caller already knows to be symmetric.
///
/// # Panics
///
/// Panics if the QL iteration fails to converge.
pub fn eigvalsh_unchecked(a: Vec<f64>, n: usize) -> Vec<f64> {
    values_only(a, n).expect("QL iteration failed on a small symmetric matrix")
}

/// Eigenpairs of the symmetric tridiagonal matrix with diagonal `diag` and
/// sub-diagonal `off` (`off.len() + 1 == diag.len()`). Eigenvectors are
/// returned column-major.
pub fn tridiagonal_eigh(diag: &[f64], off: &[f64]) -> Result<(Vec<f64>, Vec<f64>), EigenError> {
    let n = diag.len();
    assert_eq!(off.len() + 1, n.max(1));
    let mut d = diag.to_vec();
    let mut e = off.to_vec();
    e.push(0.0);
    let mut vt = identity(n);
    ql_implicit(&mut d, &mut e, Some(&mut vt))?;
    Ok(sort_pairs(d, Some(vt), n))
}

fn identity(n: usize) -> Vec<f64> {
    let mut m = vec![0.0; n * n];
    for k in 0..n {
        m[k * n + k] = 1.0;
    }
    m
}

fn symmetrize(a: &mut [f64], n: usize) {
    for r in 0..n {
        for c in 0..r {
            let avg = 0.5 * (a[r * n + c] + a[c * n + r]);
            a[r * n + c] = avg;
            a[c * n + r] = avg;
        }
    }
}

fn decompose(mut a: Vec<f64>, n: usize) -> Result<EigenDecomposition, EigenError> {
    symmetrize(&mut a, n);
    let (mut d, mut e, taus) = tridiagonalize(&mut a, n);
    let mut vt = form_q_transposed(&a, &taus, n);
    drop(a);
    ql_implicit(&mut d, &mut e, Some(&mut vt))?;
    let (energies, vectors) = sort_pairs(d, Some(vt), n);
    Ok(EigenDecomposition { dim: n, energies, vectors })
}

fn values_only(mut a: Vec<f64>, n: usize) -> Result<Vec<f64>, EigenError> {
    symmetrize(&mut a, n);
    let (mut d, mut e, _) = tridiagonalize(&mut a, n);
    drop(a);
    ql_implicit(&mut d, &mut e, None)?;
    Ok(sort_pairs(d, None, n).0)
}

/// Reduces `a` (row-major, symmetric) to tridiagonal form using only its
/// lower triangle. Step `i` annihilates `a[i][0..i-1]` with the reflector
/// `H_i = I - τ_i v v^T`, which is stored back into `a[i][0..i]`.
///
/// Returns the diagonal, the sub-diagonal (`e[i] = T[i+1][i]`, last entry
/// zero) and the reflector scalars.
fn tridiagonalize(a: &mut [f64], n: usize) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let mut d = vec![0.0; n];
    let mut e = vec![0.0; n];
    let mut taus = vec![0.0; n];
    let mut p = vec![0.0; n];
    for i in (2..n).rev() {
        d[i] = a[i * n + i];
        let (head, tail) = a.split_at_mut(i * n);
        let x = &mut tail[..i];
        let below: f64 = x[..i - 1].iter().map(|v| v * v).sum();
        if below == 0.0 {
            e[i - 1] = x[i - 1];
            x.iter_mut().for_each(|v| *v = 0.0);
            continue;
        }
        let norm = (below + x[i - 1] * x[i - 1]).sqrt();
        let alpha = if x[i - 1] > 0.0 { -norm } else { norm };
        e[i - 1] = alpha;
        x[i - 1] -= alpha;
        let vnorm2 = below + x[i - 1] * x[i - 1];
        let tau = 2.0 / vnorm2;
        taus[i] = tau;
        let v: &[f64] = x;

        // p = τ B v with B the leading i×i block, read from its lower triangle.
        let p = &mut p[..i];
        p.iter_mut().for_each(|z| *z = 0.0);
        for r in 0..i {
            let row = &head[r * n..r * n + r + 1];
            let vr = v[r];
            let mut dot = row[r] * vr;
            for ((pc, &brc), &vc) in p[..r].iter_mut().zip(&row[..r]).zip(&v[..r]) {
                *pc += brc * vr;
                dot += brc * vc;
            }
            p[r] += dot;
        }
        p.iter_mut().for_each(|z| *z *= tau);
        let k = 0.5 * tau * p.iter().zip(v).map(|(a, b)| a * b).sum::<f64>();
        p.iter_mut().zip(v).for_each(|(w, &vr)| *w -= k * vr);
        let w: &[f64] = p;

        // B -= v w^T + w v^T, lower triangle only.
        for r in 0..=i - 1 {
            let row = &mut head[r * n..r * n + r + 1];
            let (vr, wr) = (v[r], w[r]);
            for ((b, &wc), &vc) in row.iter_mut().zip(&w[..=r]).zip(&v[..=r]) {
                *b -= vr * wc + wr * vc;
            }
        }
    }
    if n >= 2 {
        d[1] = a[n + 1];
        e[0] = a[n];
    }
    if n >= 1 {
        d[0] = a[0];
    }
    (d, e, taus)
}

/// Rows of the returned matrix are the columns of `Q = H_{n-1} ⋯ H_2`.
fn form_q_transposed(a: &[f64], taus: &[f64], n: usize) -> Vec<f64> {
    let mut qt = identity(n);
    // Column j of Q is H_{n-1}(⋯(H_{j+1} e_j)); reflectors with index ≤ j
    // leave e_j untouched, so sweep reflectors in ascending order.
    for i in 2..n {
        let tau = taus[i];
        if tau == 0.0 {
            continue;
        }
        let v = &a[i * n..i * n + i];
        for j in 0..i {
            let row = &mut qt[j * n..j * n + i];
            let s = tau * row.iter().zip(v).map(|(x, y)| x * y).sum::<f64>();
            if s != 0.0 {
                row.iter_mut().zip(v).for_each(|(x, &y)| *x -= s * y);
            }
        }
    }
    qt
}

/// Implicit QL on the tridiagonal `(d, e)` with `e[i] = T[i+1][i]`. When
/// `vt` is given, its rows are rotated so row `k` ends as the eigenvector
/// belonging to `d[k]`.
fn ql_implicit(d: &mut [f64], e: &mut [f64], mut vt: Option<&mut Vec<f64>>) -> Result<(), EigenError> {
    let n = d.len();
    if n == 0 {
        return Ok(());
    }
    e[n - 1] = 0.0;
    let mut f = 0.0;
    let mut tst1 = 0.0_f64;
    let eps = f64::EPSILON;
    for l in 0..n {
        tst1 = tst1.max(d[l].abs() + e[l].abs());
        let mut m = l;
        while m < n - 1 && e[m].abs() > eps * tst1 {
            m += 1;
        }
        if m > l {
            let mut sweeps = 0;
            loop {
                sweeps += 1;
                if sweeps > MAX_QL_SWEEPS {
                    return Err(EigenError::NoConvergence(l));
                }
                let g = d[l];
                let mut p = (d[l + 1] - g) / (2.0 * e[l]);
                let mut r = p.hypot(1.0);
                if p < 0.0 {
                    r = -r;
                }
                d[l] = e[l] / (p + r);
                d[l + 1] = e[l] * (p + r);
                let dl1 = d[l + 1];
                let h = g - d[l];
                d[l + 2..n].iter_mut().for_each(|x| *x -= h);
                f += h;

                p = d[m];
                let (mut c, mut c2, mut c3) = (1.0, 1.0, 1.0);
                let el1 = e[l + 1];
                let (mut s, mut s2) = (0.0, 0.0);
                for i in (l..m).rev() {
                    c3 = c2;
                    c2 = c;
                    s2 = s;
                    let g = c * e[i];
                    let h = c * p;
                    r = p.hypot(e[i]);
                    e[i + 1] = s * r;
                    s = e[i] / r;
                    c = p / r;
                    p = c * d[i] - s * g;
                    d[i + 1] = h + s * (c * g + s * d[i]);
                    if let Some(vt) = vt.as_deref_mut() {
                        let (lo, hi) = vt.split_at_mut((i + 1) * n);
                        let zi = &mut lo[i * n..];
                        let zi1 = &mut hi[..n];
                        for (a, b) in zi.iter_mut().zip(zi1.iter_mut()) {
                            let t = *b;
                            *b = s * *a + c * t;
                            *a = c * *a - s * t;
                        }
                    }
                }
                p = -s * s2 * c3 * el1 * e[l] / dl1;
                e[l] = s * p;
                d[l] = c * p;
                if e[l].abs() <= eps * tst1 {
                    break;
                }
            }
        }
        d[l] += f;
        e[l] = 0.0;
    }
    Ok(())
}

/// Ascending order with ties kept in original order; eigenvector rows are
/// permuted alongside into a column-major matrix.
fn sort_pairs(d: Vec<f64>, vt: Option<Vec<f64>>, n: usize) -> (Vec<f64>, Vec<f64>) {
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| d[a].total_cmp(&d[b]));
    let values = order.iter().map(|&k| d[k]).collect();
    let vectors = match vt {
        Some(vt) => {
            let mut out = Vec::with_capacity(n * n);
            for &k in &order {
                out.extend_from_slice(&vt[k * n..(k + 1) * n]);
            }
            out
        }
        None => Vec::new(),
    };
    (values, vectors)
}

// ---------------------------------------------------------------------------
// Level statistics

#[derive(Debug, Error, PartialEq)]
pub enum SpectralError {
    #[error("spectral window holds {found} levels, at least {required} needed")]
    TooFewLevels { found: usize, required: usize },
    #[error("invalid window fractions ({0}, {1})")]
    InvalidWindow(f64, f64),
    #[error("degenerate window: all spacings vanish")]
    ZeroSpacing,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SpacingOptions {
    /// Fractions of the sorted level list kept, e.g. `(0.25, 0.75)`.
    pub window: (f64, f64),
    /// Number of neighbouring spacings in the moving local mean.
    pub unfold_window: usize,
    pub bins: usize,
    pub s_max: f64,
    pub min_levels: usize,
}

impl Default for SpacingOptions {
    fn default() -> Self {
        Self { window: (0.25, 0.75), unfold_window: 20, bins: 20, s_max: 4.0, min_levels: 100 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralStats {
    pub bin_edges: Vec<f64>,
    /// Histogram of unfolded spacings in `[0, s_max]`, normalized to unit
    /// integral over that range.
    pub densities: Vec<f64>,
    pub mean_r: f64,
    pub window: (f64, f64),
    pub n_levels: usize,
    /// Unfolded spacings that fell outside `[0, s_max]`.
    pub n_outside: usize,
}

pub fn spacing_statistics(energies: &[f64], window: (f64, f64)) -> Result<SpectralStats, SpectralError> {
    spacing_statistics_with(energies, &SpacingOptions { window, ..SpacingOptions::default() })
}

pub fn spacing_statistics_with(energies: &[f64], opts: &SpacingOptions) -> Result<SpectralStats, SpectralError> {
    let (lo, hi) = opts.window;
    if !(0.0..1.0).contains(&lo) || !(lo < hi && hi <= 1.0) {
        return Err(SpectralError::InvalidWindow(lo, hi));
    }
    let mut levels = energies.to_vec();
    levels.sort_by(f64::total_cmp);
    let n = levels.len();
    let start = (lo * n as f64).floor() as usize;
    let end = ((hi * n as f64).ceil() as usize).min(n);
    let levels = &levels[start..end];
    if levels.len() < opts.min_levels.max(3) {
        return Err(SpectralError::TooFewLevels { found: levels.len(), required: opts.min_levels.max(3) });
    }

    let spacings: Vec<f64> = levels.windows(2).map(|w| w[1] - w[0]).collect();
    let ratios: Vec<f64> = spacings
        .windows(2)
        .filter(|w| w[0].max(w[1]) > 0.0)
        .map(|w| w[0].min(w[1]) / w[0].max(w[1]))
        .collect();
    if ratios.is_empty() {
        return Err(SpectralError::ZeroSpacing);
    }
    let mean_r = ratios.iter().sum::<f64>() / ratios.len() as f64;

    let unfolded = unfold(&spacings, opts.unfold_window);
    let width = opts.s_max / opts.bins as f64;
    let bin_edges: Vec<f64> = (0..=opts.bins).map(|b| b as f64 * width).collect();
    let mut counts = vec![0usize; opts.bins];
    let mut n_outside = 0;
    for s in unfolded {
        if (0.0..opts.s_max).contains(&s) {
            counts[((s / width) as usize).min(opts.bins - 1)] += 1;
        } else {
            n_outside += 1;
        }
    }
    let inside: usize = counts.iter().sum();
    if inside == 0 {
        return Err(SpectralError::ZeroSpacing);
    }
    let densities = counts.iter().map(|&c| c as f64 / (inside as f64 * width)).collect();
    Ok(SpectralStats { bin_edges, densities, mean_r, window: opts.window, n_levels: levels.len(), n_outside })
}

/// Divides each spacing by the mean of the `window` spacings centred on it
/// (shifted inward near the ends).
fn unfold(spacings: &[f64], window: usize) -> Vec<f64> {
    let n = spacings.len();
    let w = window.clamp(1, n);
    let mut prefix = vec![0.0; n + 1];
    for (k, s) in spacings.iter().enumerate() {
        prefix[k + 1] = prefix[k] + s;
    }
    (0..n)
        .filter_map(|k| {
            let start = k.saturating_sub(w / 2).min(n - w);
            let mean = (prefix[start + w] - prefix[start]) / w as f64;
            (mean > 0.0).then(|| spacings[k] / mean)
        })
        .collect()
}

/// Wigner surmise `P_W(s) = (π/2) s exp(-π s²/4)`.
pub fn wigner_surmise(s: f64) -> f64 {
    let pi = std::f64::consts::PI;
    0.5 * pi * s * (-0.25 * pi * s * s).exp()
}

fn wigner_cdf(s: f64) -> f64 {
    1.0 - (-0.25 * std::f64::consts::PI * s * s).exp()
}

/// L1 distance between the spacing histogram and the Wigner surmise, using
/// the exact surmise mass of every bin.
pub fn wigner_dyson_distance(stats: &SpectralStats) -> f64 {
    stats
        .bin_edges
        .windows(2)
        .zip(&stats.densities)
        .map(|(edge, &rho)| (rho * (edge[1] - edge[0]) - (wigner_cdf(edge[1]) - wigner_cdf(edge[0]))).abs())
        .sum()
}

/// Gap ratio of a Poisson spectrum, `2 ln 2 - 1`.
pub const POISSON_MEAN_R: f64 = 0.386_294_361_119_890_6;

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use rand_distr::StandardNormal;

    fn random_symmetric(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut a = vec![0.0; n * n];
        for r in 0..n {
            for c in 0..=r {
                let x: f64 = rng.sample(StandardNormal);
                a[r * n + c] = x;
                a[c * n + r] = x;
            }
        }
        a
    }

    fn dense_residual(a: &[f64], eig: &EigenDecomposition) -> f64 {
        let n = eig.dim();
        let mut worst = 0.0_f64;
        for k in 0..n {
            let v = eig.vector(k);
            for r in 0..n {
                let av: f64 = (0..n).map(|c| a[r * n + c] * v[c]).sum();
                worst = worst.max((av - eig.energies()[k] * v[r]).abs());
            }
        }
        worst
    }

    /// Roots of `det(A - x I)` for symmetric 3×3 `A` by the trigonometric
    /// form of the cubic formula.
    fn cubic_roots(a: &[f64]) -> [f64; 3] {
        let (a11, a12, a13, a22, a23, a33) = (a[0], a[1], a[2], a[4], a[5], a[8]);
        let c2 = -(a11 + a22 + a33);
        let c1 = a11 * a22 + a11 * a33 + a22 * a33 - a12 * a12 - a13 * a13 - a23 * a23;
        let c0 = -(a11 * (a22 * a33 - a23 * a23) - a12 * (a12 * a33 - a23 * a13) + a13 * (a12 * a23 - a22 * a13));
        let p = c1 - c2 * c2 / 3.0;
        let q = 2.0 * c2.powi(3) / 27.0 - c2 * c1 / 3.0 + c0;
        let m = 2.0 * (-p / 3.0).sqrt();
        let theta = (3.0 * q / (p * m)).clamp(-1.0, 1.0).acos() / 3.0;
        let mut roots = [0.0; 3];
        for (k, root) in roots.iter_mut().enumerate() {
            *root = m * (theta - 2.0 * std::f64::consts::PI * k as f64 / 3.0).cos() - c2 / 3.0;
        }
        roots.sort_by(f64::total_cmp);
        roots
    }

    #[test]
    fn spin_x_eigenpairs() {
        let eig = eigh(&[0.0, 0.5, 0.5, 0.0], 2).unwrap();
        assert!((eig.energies()[0] + 0.5).abs() < 1e-15);
        assert!((eig.energies()[1] - 0.5).abs() < 1e-15);
        assert!(eig.orthogonality_error() < 1e-15);
        let v = eig.vector(0);
        assert!((v[0] + v[1]).abs() < 1e-15);
    }

    #[test]
    fn three_by_three_matches_cubic_formula() {
        for seed in 0..20 {
            let a = random_symmetric(3, seed);
            let eig = eigh(&a, 3).unwrap();
            let roots = cubic_roots(&a);
            for (x, y) in eig.energies().iter().zip(&roots) {
                assert!((x - y).abs() < 1e-12, "seed {seed}: {x} vs {y}");
            }
            assert!(dense_residual(&a, &eig) < 1e-13);
        }
    }

    #[test]
    fn random_matrix_invariants() {
        for &n in &[1, 2, 5, 17, 64, 150] {
            let a = random_symmetric(n, n as u64);
            let eig = eigh(&a, n).unwrap();
            assert!(eig.orthogonality_error() < 1e-12, "n={n}");
            let norm = a.iter().fold(0.0_f64, |m, x| m.max(x.abs()));
            assert!(dense_residual(&a, &eig) < 1e-11 * norm.max(1.0) * n as f64, "n={n}");
            assert!(eig.energies().windows(2).all(|w| w[0] <= w[1]));
            let trace: f64 = (0..n).map(|k| a[k * n + k]).sum();
            let sum: f64 = eig.energies().iter().sum();
            assert!((trace - sum).abs() <= 1e-9 * trace.abs().max(1.0));
            let values = eigvalsh(&a, n).unwrap();
            for (x, y) in values.iter().zip(eig.energies()) {
                assert!((x - y).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn diagonal_and_degenerate_inputs() {
        let a = [3.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0, 0.0, 1.0];
        let eig = eigh(&a, 3).unwrap();
        assert_eq!(eig.energies(), &[1.0, 1.0, 3.0]);
        // tie broken by original order: e_1 before e_2
        assert_eq!(eig.vector(0), &[0.0, 1.0, 0.0]);
        assert_eq!(eig.vector(1), &[0.0, 0.0, 1.0]);
        let zero = eigh(&[0.0; 16], 4).unwrap();
        assert!(zero.energies().iter().all(|&x| x == 0.0));
        assert!(zero.orthogonality_error() < 1e-15);
    }

    #[test]
    fn rejects_bad_input() {
        assert!(matches!(eigh(&[0.0, 1.0, 0.5, 0.0], 2), Err(EigenError::NotSymmetric { row: 1, col: 0, .. })));
        assert_eq!(eigh(&[0.0; 3], 2).unwrap_err(), EigenError::Shape { dim: 2, found: 3 });
        assert_eq!(eigh(&[f64::NAN], 1).unwrap_err(), EigenError::NonFinite);
        assert!(eigh(&[0.0, 1.0, 1.0 + 1e-14, 0.0], 2).is_ok());
    }

    #[test]
    fn deterministic() {
        let a = random_symmetric(40, 7);
        assert_eq!(eigh(&a, 40).unwrap(), eigh(&a, 40).unwrap());
    }

    #[test]
    fn tridiagonal_solver_matches_dense() {
        let diag = [1.0, -0.5, 2.0, 0.3, 0.0];
        let off = [0.7, 0.2, -1.1, 0.4];
        let (values, vectors) = tridiagonal_eigh(&diag, &off).unwrap();
        let mut dense = vec![0.0; 25];
        for k in 0..5 {
            dense[k * 5 + k] = diag[k];
        }
        for k in 0..4 {
            dense[(k + 1) * 5 + k] = off[k];
            dense[k * 5 + k + 1] = off[k];
        }
        let eig = eigh(&dense, 5).unwrap();
        for k in 0..5 {
            assert!((values[k] - eig.energies()[k]).abs() < 1e-13);
            let dot: f64 = vectors[k * 5..(k + 1) * 5].iter().zip(eig.vector(k)).map(|(a, b)| a * b).sum();
            assert!((dot.abs() - 1.0).abs() < 1e-12);
        }
        let (one, v) = tridiagonal_eigh(&[2.5], &[]).unwrap();
        assert_eq!((one, v), (vec![2.5], vec![1.0]));
    }

    #[test]
    fn project_and_expand_are_inverse() {
        let eig = eigh(&random_symmetric(12, 3), 12).unwrap();
        let x: Vec<Complex64> = (0..12).map(|k| Complex64::new(k as f64 * 0.1, 1.0 - k as f64 * 0.05)).collect();
        let back = eig.expand(&eig.project(&x));
        for (a, b) in x.iter().zip(&back) {
            assert!((a - b).norm() < 1e-13);
        }
    }

    #[test]
    fn env_hamiltonian_reconstruction() {
        let chain = crate::lattice::ChainConfig::defect_ising(8);
        let h = crate::lattice::build_env_hamiltonian(&chain).unwrap();
        let eig = eigh_sparse(&h).unwrap();
        assert!(eig.residual(&h) <= 1e-9);
        assert!(eig.orthogonality_error() <= 1e-10);
        let sum: f64 = eig.energies().iter().sum();
        assert!(sum.abs() < 1e-9);
    }

    fn poisson_levels(n: usize, seed: u64) -> Vec<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut e = 0.0;
        (0..n)
            .map(|_| {
                let u: f64 = rng.gen();
                e += -(1.0 - u).ln();
                e
            })
            .collect()
    }

    #[test]
    fn poisson_gap_ratio() {
        let stats = spacing_statistics(&poisson_levels(40_000, 1), (0.0, 1.0)).unwrap();
        assert!((stats.mean_r - POISSON_MEAN_R).abs() < 0.01, "{}", stats.mean_r);
        assert!(wigner_dyson_distance(&stats) >= 0.3);
    }

    #[test]
    fn goe_gap_ratio() {
        let mut ratios = Vec::new();
        for seed in 0..4 {
            let values = eigvalsh(&random_symmetric(1000, 100 + seed), 1000).unwrap();
            ratios.push(spacing_statistics(&values, (0.25, 0.75)).unwrap().mean_r);
        }
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        assert!((mean - 0.5307).abs() < 0.01, "{mean}");
    }

    #[test]
    fn picket_fence() {
        let levels: Vec<f64> = (0..1000).map(|k| k as f64).collect();
        let stats = spacing_statistics(&levels, (0.25, 0.75)).unwrap();
        assert_eq!(stats.mean_r, 1.0);
        let width = stats.bin_edges[1] - stats.bin_edges[0];
        let total: f64 = stats.densities.iter().map(|d| d * width).sum();
        assert!((total - 1.0).abs() < 1e-12);
        let bin = (1.0 / width) as usize;
        assert!((stats.densities[bin] * width - 1.0).abs() < 1e-12);
    }

    #[test]
    fn sampled_wigner_surmise_is_close() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut e = 0.0;
        let levels: Vec<f64> = (0..10_001)
            .map(|_| {
                let u: f64 = rng.gen();
                e += (-4.0 * (1.0 - u).ln() / std::f64::consts::PI).sqrt();
                e
            })
            .collect();
        let opts = SpacingOptions { window: (0.0, 1.0), unfold_window: 10_000, ..SpacingOptions::default() };
        let stats = spacing_statistics_with(&levels, &opts).unwrap();
        assert!(wigner_dyson_distance(&stats) <= 0.05);
    }

    #[test]
    fn exact_surmise_histogram_has_zero_distance() {
        let opts = SpacingOptions::default();
        let width = opts.s_max / opts.bins as f64;
        let bin_edges: Vec<f64> = (0..=opts.bins).map(|b| b as f64 * width).collect();
        let mass = wigner_cdf(opts.s_max);
        let densities = bin_edges.windows(2).map(|w| (wigner_cdf(w[1]) - wigner_cdf(w[0])) / (mass * width)).collect();
        let stats = SpectralStats { bin_edges, densities, mean_r: 0.53, window: (0.25, 0.75), n_levels: 0, n_outside: 0 };
        assert!(wigner_dyson_distance(&stats) < 1e-5);
        let midpoint: f64 = stats
            .bin_edges
            .windows(2)
            .map(|w| (wigner_surmise(0.5 * (w[0] + w[1])) * width - (wigner_cdf(w[1]) - wigner_cdf(w[0]))).abs())
            .sum();
        assert!(midpoint < 0.01);
    }

    #[test]
    fn too_few_levels() {
        assert_eq!(
            spacing_statistics(&[0.0, 1.0, 2.0, 3.0], (0.25, 0.75)).unwrap_err(),
            SpectralError::TooFewLevels { found: 2, required: 100 }
        );
        assert!(matches!(spacing_statistics(&[0.0; 10], (0.6, 0.4)), Err(SpectralError::InvalidWindow(..))));
    }
}
