//! Initial states, Krylov propagation, environmental branches, reduced
//! density matrices and their long-time averages.
//!
//! All vectors use the total index `α · 2^N + i` (see the crate docs), so the
//! branch `|E_α>` is the slice `[α · 2^N, (α + 1) · 2^N)`.

use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensolver::{tridiagonal_eigh, EigenDecomposition, EigenError};
use crate::small::SmallMatrix;
use crate::sparse::{SparseError, SparseHamiltonian};

const ZERO: Complex64 = Complex64 { re: 0.0, im: 0.0 };

/// Tolerance on `‖c0‖` and on the norm of normalized states.
pub const NORM_TOL: f64 = 1e-10;

#[derive(Debug, Error, PartialEq)]
pub enum DynamicsError {
    #[error("energy shell [{lo}, {hi}] contains no environment level")]
    EmptyShell { lo: f64, hi: f64 },
    #[error("invalid shell: width must be positive and finite, got {0}")]
    InvalidShell(f64),
    #[error("state is not normalized: norm {0}")]
    NotNormalized(f64),
    #[error("length mismatch: expected {expected}, found {found}")]
    Length { expected: usize, found: usize },
    #[error("time step must be positive and finite, got {0}")]
    InvalidStep(f64),
    #[error("krylov dimension must be at least 2, got {0}")]
    KrylovDim(usize),
    #[error("propagator could not reach the error tolerance (step shrank to {0:e})")]
    StepUnderflow(f64),
    #[error("invalid averaging window: t_min={t_min}, t_max={t_max}, dt={dt}")]
    InvalidWindow { t_min: f64, t_max: f64, dt: f64 },
    #[error("spectrum is degenerate between populated eigenstates {0} and {1} (gap {2:e})")]
    Degenerate(usize, usize, f64),
    #[error(transparent)]
    Sparse(#[from] SparseError),
    #[error(transparent)]
    Eigen(#[from] EigenError),
}

/// Energy interval `[e0 - δe0/2, e0 + δe0/2]`, closed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShellSpec {
    pub e0: f64,
    pub delta_e0: f64,
}

impl ShellSpec {
    pub fn new(e0: f64, delta_e0: f64) -> Result<Self, DynamicsError> {
        let shell = Self { e0, delta_e0 };
        shell.validate()?;
        Ok(shell)
    }

    pub fn validate(&self) -> Result<(), DynamicsError> {
        if self.delta_e0 > 0.0 && self.delta_e0.is_finite() && self.e0.is_finite() {
            Ok(())
        } else {
            Err(DynamicsError::InvalidShell(self.delta_e0))
        }
    }

    pub fn lo(&self) -> f64 {
        self.e0 - 0.5 * self.delta_e0
    }

    pub fn hi(&self) -> f64 {
        self.e0 + 0.5 * self.delta_e0
    }

    pub fn contains(&self, e: f64) -> bool {
        e >= self.lo() && e <= self.hi()
    }

    /// Indices of the levels inside the shell, ascending.
    pub fn indices(&self, energies: &[f64]) -> Vec<usize> {
        (0..energies.len()).filter(|&k| self.contains(energies[k])).collect()
    }
}

/// Environment state expanded on environment eigenstates.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShellState {
    /// `c_{0i}` on every environment eigenstate, zero outside the shell.
    pub coefficients: Vec<Complex64>,
    pub support: Vec<usize>,
}

impl ShellState {
    /// The state in the spin product basis.
    pub fn product_vector(&self, env_eig: &EigenDecomposition) -> Vec<Complex64> {
        env_eig.expand(&self.coefficients)
    }
}

/// Typical state of the shell: i.i.d. standard complex normal coefficients on
/// in-shell eigenstates, normalized. Deterministic for a given seed.
pub fn sample_shell_state(env_eig: &EigenDecomposition, shell: &ShellSpec, seed: u64) -> Result<ShellState, DynamicsError> {
    shell.validate()?;
    let support = shell.indices(env_eig.energies());
    if support.is_empty() {
        return Err(DynamicsError::EmptyShell { lo: shell.lo(), hi: shell.hi() });
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut coefficients = vec![ZERO; env_eig.dim()];
    for &k in &support {
        let re: f64 = StandardNormal.sample(&mut rng);
        let im: f64 = StandardNormal.sample(&mut rng);
        coefficients[k] = Complex64::new(re, im);
    }
    let norm = norm(&coefficients);
    coefficients.iter_mut().for_each(|c| *c /= norm);
    Ok(ShellState { coefficients, support })
}

pub fn norm(v: &[Complex64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

pub fn inner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// `c / ‖c‖`.
pub fn normalize(c: &[Complex64]) -> Vec<Complex64> {
    let n = norm(c);
    c.iter().map(|z| z / n).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WaveFunction {
    pub amplitudes: Vec<Complex64>,
    pub time: f64,
    pub env_dim: usize,
}

impl WaveFunction {
    pub fn system_dim(&self) -> usize {
        self.amplitudes.len() / self.env_dim
    }

    pub fn norm(&self) -> f64 {
        norm(&self.amplitudes)
    }
}

/// Product state `Σ_α c0[α] |α> ⊗ |env>`.
pub fn build_initial_state(c0: &[Complex64], env_state: &[Complex64]) -> Result<WaveFunction, DynamicsError> {
    for v in [c0, env_state] {
        let n = norm(v);
        if (n - 1.0).abs() > NORM_TOL {
            return Err(DynamicsError::NotNormalized(n));
        }
    }
    let amplitudes = c0.iter().flat_map(|&a| env_state.iter().map(move |&e| a * e)).collect();
    Ok(WaveFunction { amplitudes, time: 0.0, env_dim: env_state.len() })
}

// ---------------------------------------------------------------------------
// Krylov propagator

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct KrylovPropagator {
    pub krylov_dim: usize,
    /// Bound on the estimated error of every sub-step.
    pub tol: f64,
    /// Re-orthogonalize each Lanczos vector against the whole basis.
    pub full_reorthogonalization: bool,
}

impl Default for KrylovPropagator {
    fn default() -> Self {
        Self { krylov_dim: 30, tol: 1e-12, full_reorthogonalization: false }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct StepReport {
    pub substeps: usize,
    pub matvecs: usize,
    pub max_error_estimate: f64,
    pub restarts: usize,
}

struct Lanczos {
    basis: Vec<Vec<Complex64>>,
    alpha: Vec<f64>,
    beta: Vec<f64>,
    /// `β_m`, coupling the last basis vector to the residual. Zero after an
    /// invariant subspace was found.
    beta_next: f64,
}

impl KrylovPropagator {
    pub fn new(krylov_dim: usize, tol: f64) -> Result<Self, DynamicsError> {
        if krylov_dim < 2 {
            return Err(DynamicsError::KrylovDim(krylov_dim));
        }
        Ok(Self { krylov_dim, tol, ..Self::default() })
    }

    /// `ψ ← exp(-i H dt) ψ`, splitting `dt` into sub-steps whose a posteriori
    /// error estimate stays below `tol`.
    pub fn propagate(&self, h: &SparseHamiltonian, psi: &mut WaveFunction, dt: f64) -> Result<StepReport, DynamicsError> {
        if self.krylov_dim < 2 {
            return Err(DynamicsError::KrylovDim(self.krylov_dim));
        }
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(DynamicsError::InvalidStep(dt));
        }
        if psi.amplitudes.len() != h.dim() {
            return Err(DynamicsError::Length { expected: h.dim(), found: psi.amplitudes.len() });
        }
        let mut report = StepReport::default();
        let mut remaining = dt;
        while remaining > 0.0 {
            let beta0 = norm(&psi.amplitudes);
            if beta0 == 0.0 {
                psi.time += remaining;
                break;
            }
            let mut lanczos = self.lanczos(h, &psi.amplitudes, beta0, self.full_reorthogonalization, &mut report)?;
            if !self.full_reorthogonalization && lost_orthogonality(&lanczos.basis) {
                report.restarts += 1;
                lanczos = self.lanczos(h, &psi.amplitudes, beta0, true, &mut report)?;
            }
            let m = lanczos.alpha.len();
            let (theta, s) = tridiagonal_eigh(&lanczos.alpha, &lanczos.beta)?;
            let mut tau = remaining;
            let coeffs = loop {
                let y = exp_tridiagonal(&theta, &s, m, tau);
                let err = beta0 * lanczos.beta_next * y[m - 1].norm();
                if err <= self.tol {
                    report.max_error_estimate = report.max_error_estimate.max(err);
                    break y;
                }
                tau *= 0.5;
                if tau < remaining * 1e-12 || tau < 1e-300 {
                    return Err(DynamicsError::StepUnderflow(tau));
                }
            };
            let mut next = vec![ZERO; psi.amplitudes.len()];
            for (v, c) in lanczos.basis.iter().zip(&coeffs) {
                let c = c * beta0;
                next.iter_mut().zip(v).for_each(|(x, b)| *x += c * b);
            }
            psi.amplitudes = next;
            psi.time += tau;
            remaining -= tau;
            report.substeps += 1;
            if remaining < dt * 1e-14 {
                psi.time += remaining;
                break;
            }
        }
        Ok(report)
    }

    fn lanczos(
        &self,
        h: &SparseHamiltonian,
        psi: &[Complex64],
        beta0: f64,
        reorthogonalize: bool,
        report: &mut StepReport,
    ) -> Result<Lanczos, DynamicsError> {
        let dim = psi.len();
        let m_max = self.krylov_dim.min(dim);
        let mut basis: Vec<Vec<Complex64>> = vec![psi.iter().map(|z| z / beta0).collect()];
        let mut alpha = Vec::with_capacity(m_max);
        let mut beta = Vec::with_capacity(m_max);
        let mut w = vec![ZERO; dim];
        let scale = h.values().iter().fold(0.0_f64, |m, v| m.max(v.abs())).max(1e-300);
        loop {
            let j = basis.len() - 1;
            h.matvec_into(&basis[j], &mut w)?;
            report.matvecs += 1;
            let a = inner(&basis[j], &w).re;
            w.iter_mut().zip(&basis[j]).for_each(|(x, v)| *x -= v * a);
            if j > 0 {
                let b = beta[j - 1];
                w.iter_mut().zip(&basis[j - 1]).for_each(|(x, v)| *x -= v * b);
            }
            if reorthogonalize {
                for _ in 0..2 {
                    for v in &basis {
                        let c = inner(v, &w);
                        w.iter_mut().zip(v).for_each(|(x, b)| *x -= c * b);
                    }
                }
            }
            alpha.push(a);
            let b = norm(&w);
            if basis.len() == m_max || b <= 1e-13 * scale {
                let beta_next = if b <= 1e-13 * scale || basis.len() == dim { 0.0 } else { b };
                return Ok(Lanczos { basis, alpha, beta, beta_next });
            }
            beta.push(b);
            basis.push(w.iter().map(|z| z / b).collect());
        }
    }
}

/// Loss of orthogonality between the first and last Lanczos vectors.
fn lost_orthogonality(basis: &[Vec<Complex64>]) -> bool {
    basis.len() > 2 && inner(&basis[0], &basis[basis.len() - 1]).norm() > 1e-8
}

/// `exp(-i τ T) e_1` from the eigenpairs `(θ, S)` of `T` (column-major `S`).
fn exp_tridiagonal(theta: &[f64], s: &[f64], m: usize, tau: f64) -> Vec<Complex64> {
    let mut y = vec![ZERO; m];
    for (k, &t) in theta.iter().enumerate() {
        let col = &s[k * m..(k + 1) * m];
        let phase = Complex64::from_polar(col[0], -t * tau);
        y.iter_mut().zip(col).for_each(|(yi, &c)| *yi += phase * c);
    }
    y
}

// ---------------------------------------------------------------------------
// Branches, RDM and F

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Branches {
    pub vectors: Vec<Vec<Complex64>>,
    pub time: f64,
}

impl Branches {
    pub fn norms_sqr(&self) -> Vec<f64> {
        self.vectors.iter().map(|v| v.iter().map(|z| z.norm_sqr()).sum()).collect()
    }

    /// `Σ_α |α> ⊗ |E_α>`.
    pub fn reassemble(&self) -> Vec<Complex64> {
        self.vectors.concat()
    }
}

pub fn extract_branches(psi: &WaveFunction) -> Branches {
    Branches { vectors: psi.amplitudes.chunks(psi.env_dim).map(<[Complex64]>::to_vec).collect(), time: psi.time }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum RdmTag {
    At(f64),
    LongTimeAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rdm {
    pub matrix: SmallMatrix,
    pub tag: RdmTag,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RdmCheck {
    pub hermiticity_error: f64,
    pub trace_error: f64,
    pub min_eigenvalue: f64,
}

impl RdmCheck {
    pub fn passes(&self, hermiticity_tol: f64, trace_tol: f64, positivity_tol: f64) -> bool {
        self.hermiticity_error <= hermiticity_tol && self.trace_error <= trace_tol && self.min_eigenvalue >= -positivity_tol
    }
}

impl Rdm {
    pub fn get(&self, a: usize, b: usize) -> Complex64 {
        self.matrix[(a, b)]
    }

    pub fn check(&self) -> RdmCheck {
        let trace = self.matrix.trace();
        RdmCheck {
            hermiticity_error: self.matrix.hermiticity_error(),
            trace_error: (trace - Complex64::new(1.0, 0.0)).norm(),
            min_eigenvalue: self.matrix.hermitian_eigenvalues().first().copied().unwrap_or(0.0),
        }
    }
}

/// `ρ_{αβ} = <E_β|E_α>`.
pub fn rdm_from_branches(b: &Branches) -> Rdm {
    let m = b.vectors.len();
    let mut rho = SmallMatrix::zeros(m);
    for a in 0..m {
        for c in a..m {
            let z = inner(&b.vectors[c], &b.vectors[a]);
            rho[(a, c)] = z;
            rho[(c, a)] = z.conj();
        }
        rho[(a, a)] = Complex64::new(rho[(a, a)].re, 0.0);
    }
    Rdm { matrix: rho, tag: RdmTag::At(b.time) }
}

/// `F_{αβ} = <E_α|H^{IE}|E_β>`.
pub fn f_operator(b: &Branches, h_ie: &SparseHamiltonian) -> Result<SmallMatrix, DynamicsError> {
    let m = b.vectors.len();
    let applied = b.vectors.iter().map(|v| h_ie.matvec(v)).collect::<Result<Vec<_>, _>>()?;
    let mut f = SmallMatrix::zeros(m);
    for a in 0..m {
        for c in 0..m {
            f[(a, c)] = inner(&b.vectors[a], &applied[c]);
        }
    }
    Ok(f)
}

/// One interaction term as seen by the system: effective strength
/// (`λ` times the term's own strength) and `H^{IS}`.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemCoupling {
    pub strength: f64,
    pub h_is: SmallMatrix,
}

/// `[H^S, ρ] + Σ_ν s_ν [H^{IS,ν}, (F^ν)^T]`. Its time derivative form is
/// `dρ/dt = -i` times this matrix.
pub fn stationarity_matrix(rho: &SmallMatrix, f: &[SmallMatrix], h_s: &SmallMatrix, couplings: &[SystemCoupling]) -> SmallMatrix {
    assert_eq!(f.len(), couplings.len());
    let mut out = h_s.commutator(rho);
    for (fv, c) in f.iter().zip(couplings) {
        out = &out + &c.h_is.commutator(&fv.transpose()).scale_real(c.strength);
    }
    out
}

/// Frobenius norm of [`stationarity_matrix`]; vanishes for exact long-time
/// averages.
pub fn stationarity_residual(rho: &SmallMatrix, f: &[SmallMatrix], h_s: &SmallMatrix, couplings: &[SystemCoupling]) -> f64 {
    stationarity_matrix(rho, f, h_s, couplings).frobenius_norm()
}

/// `dρ/dt` predicted from the branches.
pub fn rdm_derivative(rho: &SmallMatrix, f: &[SmallMatrix], h_s: &SmallMatrix, couplings: &[SystemCoupling]) -> SmallMatrix {
    stationarity_matrix(rho, f, h_s, couplings).scale(Complex64::new(0.0, -1.0))
}

// ---------------------------------------------------------------------------
// Long-time averages

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AveragingWindow {
    pub t_min: f64,
    pub t_max: f64,
    pub dt_sample: f64,
}

impl Default for AveragingWindow {
    fn default() -> Self {
        Self { t_min: 0.0, t_max: 5000.0, dt_sample: 1.0 }
    }
}

impl AveragingWindow {
    pub fn validate(&self) -> Result<(), DynamicsError> {
        let ok = self.t_min >= 0.0 && self.t_max > self.t_min && self.dt_sample > 0.0 && self.t_max.is_finite();
        if ok {
            Ok(())
        } else {
            Err(DynamicsError::InvalidWindow { t_min: self.t_min, t_max: self.t_max, dt: self.dt_sample })
        }
    }

    /// Number of uniformly spaced samples, both ends included.
    pub fn samples(&self) -> usize {
        ((self.t_max - self.t_min) / self.dt_sample + 1e-9).floor() as usize + 1
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceReport {
    /// Largest elementwise difference between the first-half and full-window
    /// means of `ρ`.
    pub max_rho_difference: f64,
    pub tolerance: f64,
    pub converged: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverage {
    pub rho: Rdm,
    /// Average of `F^ν` per interaction term.
    pub f: Vec<SmallMatrix>,
    pub convergence: ConvergenceReport,
    pub samples: usize,
}

/// Everything observed at one sampled time.
#[derive(Debug, Clone)]
pub struct TrajectorySample<'a> {
    pub time: f64,
    pub rho: &'a Rdm,
    pub f: &'a [SmallMatrix],
    pub branch_norms: Vec<f64>,
    pub energy: f64,
    pub psi: &'a WaveFunction,
}

/// Uniform-sample mean of `ρ(t)` and `F^ν(t)` over the window. `observe` sees
/// every sample in time order.
pub fn time_average(
    h: &SparseHamiltonian,
    psi0: &WaveFunction,
    h_ie: &[&SparseHamiltonian],
    propagator: &KrylovPropagator,
    window: &AveragingWindow,
    tolerance: f64,
    mut observe: impl FnMut(&TrajectorySample<'_>),
) -> Result<TimeAverage, DynamicsError> {
    window.validate()?;
    let mut psi = psi0.clone();
    if window.t_min > psi.time {
        let dt = window.t_min - psi.time;
        propagator.propagate(h, &mut psi, dt)?;
    }
    let m = psi.system_dim();
    let samples = window.samples();
    let half = samples.div_ceil(2);
    let mut rho_sum = SmallMatrix::zeros(m);
    let mut rho_half = SmallMatrix::zeros(m);
    let mut f_sum = vec![SmallMatrix::zeros(m); h_ie.len()];
    for k in 0..samples {
        if k > 0 {
            propagator.propagate(h, &mut psi, window.dt_sample)?;
            psi.time = window.t_min + k as f64 * window.dt_sample;
        }
        let branches = extract_branches(&psi);
        let rho = rdm_from_branches(&branches);
        let f = h_ie.iter().map(|op| f_operator(&branches, op)).collect::<Result<Vec<_>, _>>()?;
        observe(&TrajectorySample {
            time: psi.time,
            rho: &rho,
            f: &f,
            branch_norms: branches.norms_sqr(),
            energy: h.expectation(&psi.amplitudes)?,
            psi: &psi,
        });
        rho_sum = &rho_sum + &rho.matrix;
        if k < half {
            rho_half = &rho_half + &rho.matrix;
        }
        for (acc, fv) in f_sum.iter_mut().zip(&f) {
            *acc = &*acc + fv;
        }
    }
    let rho_mean = rho_sum.scale_real(1.0 / samples as f64);
    let half_mean = rho_half.scale_real(1.0 / half as f64);
    let max_rho_difference = (&half_mean - &rho_mean).max_abs();
    Ok(TimeAverage {
        rho: Rdm { matrix: rho_mean, tag: RdmTag::LongTimeAverage },
        f: f_sum.iter().map(|x| x.scale_real(1.0 / samples as f64)).collect(),
        convergence: ConvergenceReport { max_rho_difference, tolerance, converged: max_rho_difference <= tolerance },
        samples,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalEnsemble {
    pub rho: Rdm,
    pub f: Vec<SmallMatrix>,
    /// `|<n|Ψ0>|²` for every total eigenstate.
    pub populations: Vec<f64>,
}

/// Infinite-time averages from the eigenstate populations:
/// `ρ̄ = Σ_n |<n|Ψ0>|² Tr_E |n><n|` and likewise for `F̄^ν`. Requires the
/// populated part of the spectrum to be nondegenerate.
pub fn diagonal_ensemble(
    total_eig: &EigenDecomposition,
    psi0: &WaveFunction,
    h_ie: &[&SparseHamiltonian],
    population_cutoff: f64,
) -> Result<DiagonalEnsemble, DynamicsError> {
    if psi0.amplitudes.len() != total_eig.dim() {
        return Err(DynamicsError::Length { expected: total_eig.dim(), found: psi0.amplitudes.len() });
    }
    let populations: Vec<f64> = total_eig.project(&psi0.amplitudes).iter().map(|c| c.norm_sqr()).collect();
    check_populated_degeneracy(total_eig.energies(), &populations, population_cutoff)?;
    let d = psi0.env_dim;
    let m = psi0.system_dim();
    let mut rho = vec![vec![0.0; m]; m];
    let mut f = vec![vec![vec![0.0; m]; m]; h_ie.len()];
    let mut applied = vec![0.0; d];
    for (n, &p) in populations.iter().enumerate() {
        if p <= population_cutoff {
            continue;
        }
        let v = total_eig.vector(n);
        let branch = |a: usize| &v[a * d..(a + 1) * d];
        for a in 0..m {
            for b in 0..m {
                rho[a][b] += p * dot(branch(a), branch(b));
            }
        }
        for (fv, op) in f.iter_mut().zip(h_ie) {
            for b in 0..m {
                op.matvec_real_into(branch(b), &mut applied)?;
                for a in 0..m {
                    fv[a][b] += p * dot(branch(a), &applied);
                }
            }
        }
    }
    let to_matrix = |x: &Vec<Vec<f64>>| {
        let rows: Vec<&[f64]> = x.iter().map(Vec::as_slice).collect();
        SmallMatrix::from_real(&rows)
    };
    Ok(DiagonalEnsemble {
        rho: Rdm { matrix: to_matrix(&rho), tag: RdmTag::LongTimeAverage },
        f: f.iter().map(to_matrix).collect(),
        populations,
    })
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Smallest gap between consecutive populated levels must exceed `1e-12`.
fn check_populated_degeneracy(energies: &[f64], populations: &[f64], cutoff: f64) -> Result<(), DynamicsError> {
    let populated: Vec<usize> = (0..energies.len()).filter(|&n| populations[n] > cutoff).collect();
    for w in populated.windows(2) {
        let gap = energies[w[1]] - energies[w[0]];
        if gap < 1e-12 {
            return Err(DynamicsError::Degenerate(w[0], w[1], gap));
        }
    }
    Ok(())
}
