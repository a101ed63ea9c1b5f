//! Closed-form predictions for the averaged reduced density matrix and their
//! comparison with measured averages.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::eigensolver::{eigh, EigenDecomposition};
use crate::small::SmallMatrix;
use crate::sparse::{SparseError, SparseHamiltonian};

/// `|1 - λ η_d h0|` below this is treated as the pole of the TLS formula.
pub const POLE_TOL: f64 = 1e-8;

/// Levels closer than this count as degenerate.
pub const DEGENERACY_TOL: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum PredictionError {
    #[error("levels {0} and {1} are degenerate")]
    DegenerateLevels(usize, usize),
    #[error("TLS prediction sits on its pole: 1 - λ η_d h0 = {0:e}")]
    Pole(f64),
    #[error("renormalized Hamiltonian is not real symmetric")]
    NotRealSymmetric,
    #[error("matrix dimensions disagree")]
    Dimension,
    #[error("lambda grid must be ascending")]
    UnsortedGrid,
    #[error(transparent)]
    Sparse(#[from] SparseError),
}

/// One term `strength · H^{IS} ⊗ H^{IE}` reduced to its system part and the
/// environmental value `h0^ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizationTerm {
    /// `λ λ_ν`.
    pub strength: f64,
    pub h0: f64,
    pub h_is: SmallMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RenormalizedHamiltonian {
    pub matrix: SmallMatrix,
    pub eigen: EigenDecomposition,
}

impl RenormalizedHamiltonian {
    /// Angle of the lower eigenvector relative to `|α=0>` for a 2×2 matrix,
    /// in `(-π/2, π/2]`.
    pub fn tilt_angle(&self) -> f64 {
        let v = self.eigen.vector(0);
        let (a, b) = if v[0] < 0.0 { (-v[0], -v[1]) } else { (v[0], v[1]) };
        b.atan2(a)
    }
}

/// `H̃^S = H^S + Σ_ν λ λ_ν h0^ν H^{IS,ν}`.
pub fn renormalized_hamiltonian(h_s: &SmallMatrix, terms: &[RenormalizationTerm]) -> Result<RenormalizedHamiltonian, PredictionError> {
    let mut matrix = h_s.clone();
    for t in terms {
        if t.h_is.dim() != h_s.dim() {
            return Err(PredictionError::Dimension);
        }
        matrix = &matrix + &t.h_is.scale_real(t.strength * t.h0);
    }
    if matrix.max_imag() > 0.0 || matrix.hermiticity_error() > 1e-14 {
        return Err(PredictionError::NotRealSymmetric);
    }
    let eigen = eigh(&matrix.real_part(), matrix.dim()).map_err(|_| PredictionError::NotRealSymmetric)?;
    Ok(RenormalizedHamiltonian { matrix, eigen })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CommutatorResidual {
    /// `‖[H, ρ]‖_F`.
    pub absolute: f64,
    /// `‖[H, ρ]‖_F / (‖H‖_F ‖ρ‖_F)`.
    pub normalized: f64,
}

pub fn commutator_residual(h: &SmallMatrix, rho: &SmallMatrix) -> CommutatorResidual {
    let absolute = h.commutator(rho).frobenius_norm();
    let scale = h.frobenius_norm() * rho.frobenius_norm();
    CommutatorResidual { absolute, normalized: if scale > 0.0 { absolute / scale } else { 0.0 } }
}

/// `(η_d, η_r) = ((H11 - H22), H12) / (e2 - e1)` for a two-level system.
pub fn eta_coefficients(h_is: &SmallMatrix, qubit_energies: [f64; 2]) -> Result<(f64, f64), PredictionError> {
    let gap = qubit_energies[1] - qubit_energies[0];
    if gap.abs() < DEGENERACY_TOL {
        return Err(PredictionError::DegenerateLevels(0, 1));
    }
    Ok(((h_is[(0, 0)].re - h_is[(1, 1)].re) / gap, h_is[(0, 1)].re / gap))
}

/// `ρ̄12 = λ η_r h0 (ρ̄22 - ρ̄11) / (1 - λ η_d h0)`.
pub fn tls_prediction(eta_d: f64, eta_r: f64, lambda: f64, h0: f64, rho11: f64, rho22: f64) -> Result<Complex64, PredictionError> {
    let denom = 1.0 - lambda * eta_d * h0;
    if denom.abs() < POLE_TOL {
        return Err(PredictionError::Pole(denom));
    }
    Ok(Complex64::new(lambda * eta_r * h0 * (rho22 - rho11) / denom, 0.0))
}

/// `|H12 ρ̄21 - ρ̄12 H21|`.
pub fn realness_residual(rho: &SmallMatrix, h_is: &SmallMatrix) -> f64 {
    (h_is[(0, 1)] * rho[(1, 0)] - rho[(0, 1)] * h_is[(1, 0)]).norm()
}

/// `h1 = Σ_i |c0i|² H^{IE}_{ii}`. When levels of the support are degenerate
/// (gap below `1e-12`) the cross terms `c0i* H_ij c0j` inside each degenerate
/// block are included.
pub fn h1_weighted(env_eig: &EigenDecomposition, h_ie: &SparseHamiltonian, coefficients: &[Complex64]) -> Result<f64, PredictionError> {
    if coefficients.len() != env_eig.dim() || h_ie.dim() != env_eig.dim() {
        return Err(PredictionError::Dimension);
    }
    let energies = env_eig.energies();
    let support: Vec<usize> = (0..coefficients.len()).filter(|&k| coefficients[k].norm_sqr() > 0.0).collect();
    let mut blocks: Vec<Vec<usize>> = Vec::new();
    for &k in &support {
        match blocks.last_mut() {
            Some(b) if energies[k] - energies[*b.last().unwrap()] < DEGENERACY_TOL => b.push(k),
            _ => blocks.push(vec![k]),
        }
    }
    let mut buf = vec![0.0; env_eig.dim()];
    let mut h1 = Complex64::new(0.0, 0.0);
    for block in &blocks {
        for &j in block {
            h_ie.matvec_real_into(env_eig.vector(j), &mut buf)?;
            for &i in block {
                let hij: f64 = env_eig.vector(i).iter().zip(&buf).map(|(a, b)| a * b).sum();
                h1 += coefficients[i].conj() * hij * coefficients[j];
            }
        }
    }
    Ok(h1.re)
}

/// First-order off-diagonal elements
/// `ρ̄_{αβ} = λ H^{IS}_{αβ} h1 (|c0β|² - |c0α|²) / (e_β - e_α)` and diagonal
/// `|c0α|²`.
pub fn weak_coupling_prediction(
    lambda: f64,
    h_is: &SmallMatrix,
    qubit_energies: &[f64],
    h1: f64,
    c0: &[Complex64],
) -> Result<SmallMatrix, PredictionError> {
    let m = c0.len();
    if h_is.dim() != m || qubit_energies.len() != m {
        return Err(PredictionError::Dimension);
    }
    let mut rho = SmallMatrix::zeros(m);
    for a in 0..m {
        rho[(a, a)] = Complex64::new(c0[a].norm_sqr(), 0.0);
        for b in 0..m {
            if a == b {
                continue;
            }
            let gap = qubit_energies[b] - qubit_energies[a];
            if gap.abs() < DEGENERACY_TOL {
                return Err(PredictionError::DegenerateLevels(a, b));
            }
            rho[(a, b)] = h_is[(a, b)] * (lambda * h1 * (c0[b].norm_sqr() - c0[a].norm_sqr()) / gap);
        }
    }
    Ok(rho)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PredictionReport {
    pub lambda: f64,
    pub rho12_measured: Complex64,
    pub rho11_measured: f64,
    pub rho22_measured: f64,
    pub rho12_tls: Option<Complex64>,
    pub rho12_weak: Complex64,
    /// Normalized `‖[H̃^S, ρ̄]‖`.
    pub commutator_residual: f64,
    /// Normalized `‖[H^S, ρ̄]‖` for comparison.
    pub bare_commutator_residual: f64,
    pub realness_residual: f64,
    pub ratio_delta_h: Option<f64>,
    pub h0: f64,
    pub h1: f64,
    pub eta_d: f64,
    pub eta_r: f64,
    /// `|measured - tls| / |measured|` on complex values.
    pub rel_error_tls: Option<f64>,
    /// `| |measured| - |tls| | / |measured|`.
    pub rel_error_tls_modulus: Option<f64>,
    pub rel_error_weak: Option<f64>,
}

/// Inputs shared by every sweep point.
#[derive(Debug, Clone)]
pub struct PredictionInputs {
    pub h_s: SmallMatrix,
    pub qubit_energies: [f64; 2],
    /// System part of the single interaction term.
    pub h_is: SmallMatrix,
    pub h0: f64,
    pub h1: f64,
    pub c0: [Complex64; 2],
}

fn relative(measured: Complex64, predicted: Complex64) -> Option<f64> {
    (measured.norm() > 0.0).then(|| (measured - predicted).norm() / measured.norm())
}

pub fn prediction_report(inputs: &PredictionInputs, lambda: f64, rho: &SmallMatrix, ratio_delta_h: Option<f64>) -> Result<PredictionReport, PredictionError> {
    let (eta_d, eta_r) = eta_coefficients(&inputs.h_is, inputs.qubit_energies)?;
    let (rho11, rho22) = (rho[(0, 0)].re, rho[(1, 1)].re);
    let measured = rho[(0, 1)];
    let tls = tls_prediction(eta_d, eta_r, lambda, inputs.h0, rho11, rho22).ok();
    let weak = weak_coupling_prediction(lambda, &inputs.h_is, &inputs.qubit_energies, inputs.h1, &inputs.c0)?[(0, 1)];
    let tilde = renormalized_hamiltonian(
        &inputs.h_s,
        &[RenormalizationTerm { strength: lambda, h0: inputs.h0, h_is: inputs.h_is.clone() }],
    )?;
    Ok(PredictionReport {
        lambda,
        rho12_measured: measured,
        rho11_measured: rho11,
        rho22_measured: rho22,
        rho12_tls: tls,
        rho12_weak: weak,
        commutator_residual: commutator_residual(&tilde.matrix, rho).normalized,
        bare_commutator_residual: commutator_residual(&inputs.h_s, rho).normalized,
        realness_residual: realness_residual(rho, &inputs.h_is),
        ratio_delta_h,
        h0: inputs.h0,
        h1: inputs.h1,
        eta_d,
        eta_r,
        rel_error_tls: tls.and_then(|t| relative(measured, t)),
        rel_error_tls_modulus: tls.and_then(|t| (measured.norm() > 0.0).then(|| (measured.norm() - t.norm()).abs() / measured.norm())),
        rel_error_weak: relative(measured, weak),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum Crossing {
    /// Interpolated crossing and the bracketing grid points.
    At { lambda: f64, bracket: (f64, f64) },
    /// The quantity already exceeds the threshold at the first grid point.
    StartsAbove,
    /// The quantity never reaches the threshold on the grid.
    NeverExceeds,
}

impl Crossing {
    pub fn value(&self) -> Option<f64> {
        match self {
            Crossing::At { lambda, .. } => Some(*lambda),
            _ => None,
        }
    }
}

/// First `λ` where `y` reaches `threshold`, interpolating linearly in `ln λ`
/// between the bracketing grid points.
pub fn first_crossing(points: &[(f64, f64)], threshold: f64) -> Result<Crossing, PredictionError> {
    if points.windows(2).any(|w| !(w[0].0 < w[1].0)) {
        return Err(PredictionError::UnsortedGrid);
    }
    let Some(&(_, y0)) = points.first() else {
        return Ok(Crossing::NeverExceeds);
    };
    if y0 >= threshold {
        return Ok(Crossing::StartsAbove);
    }
    for w in points.windows(2) {
        let ((l0, y0), (l1, y1)) = (w[0], w[1]);
        if y1 >= threshold {
            let t = (threshold - y0) / (y1 - y0);
            let lambda = if l0 > 0.0 { (l0.ln() + t * (l1.ln() - l0.ln())).exp() } else { l0 + t * (l1 - l0) };
            return Ok(Crossing::At { lambda, bracket: (l0, l1) });
        }
    }
    Ok(Crossing::NeverExceeds)
}

/// `λ_h` from `(λ, |Δh/h0|)` pairs.
pub fn lambda_h_scan(ratio_vs_lambda: &[(f64, f64)], eps_h: f64) -> Result<Crossing, PredictionError> {
    first_crossing(ratio_vs_lambda, eps_h)
}

/// `λ_c` from the relative error of the TLS prediction across a sweep.
/// Points without a defined error (pole or vanishing measurement) are skipped.
pub fn lambda_c_scan(sweep: &[PredictionReport], eps_c: f64) -> Result<Crossing, PredictionError> {
    let points: Vec<(f64, f64)> = sweep.iter().filter_map(|r| r.rel_error_tls.map(|e| (r.lambda, e))).collect();
    first_crossing(&points, eps_c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eigensolver::eigh_sparse;
    use crate::lattice::{build_env_hamiltonian, local_observable, Axis, ChainConfig, QubitOperator};

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn sx() -> SmallMatrix {
        SmallMatrix::from_real_2x2(QubitOperator::Sx.matrix())
    }

    fn hs(q: f64) -> SmallMatrix {
        SmallMatrix::diagonal(&[-0.5 * q, 0.5 * q])
    }

    #[test]
    fn renormalization_reduces_to_bare_hamiltonian() {
        let bare = renormalized_hamiltonian(&hs(0.3), &[]).unwrap();
        assert_eq!(bare.matrix, hs(0.3));
        assert!(bare.tilt_angle().abs() < 1e-15);
        let zero_h0 = renormalized_hamiltonian(&hs(0.3), &[RenormalizationTerm { strength: 0.5, h0: 0.0, h_is: sx() }]).unwrap();
        assert_eq!(zero_h0.matrix, hs(0.3));
    }

    #[test]
    fn tilt_angle_matches_analytic_rotation() {
        for &(q, lambda, h0) in &[(0.05, 0.01, 0.3), (0.3, 0.2, -0.25), (0.05, 0.3, 0.4)] {
            let r = renormalized_hamiltonian(&hs(q), &[RenormalizationTerm { strength: lambda, h0, h_is: sx() }]).unwrap();
            // [[-q/2, g], [g, q/2]] with g = λ h0/2; lower eigenvector (cos θ, -sin θ)
            // where tan 2θ = 2g / q = λ h0 / q.
            let theta = -0.5 * (lambda * h0 / q).atan();
            assert!((r.tilt_angle() - theta).abs() < 1e-12, "{} vs {}", r.tilt_angle(), theta);
        }
        // angle vanishes linearly as λ → 0
        let small: Vec<f64> = [1e-3, 1e-4]
            .iter()
            .map(|&l| renormalized_hamiltonian(&hs(0.05), &[RenormalizationTerm { strength: l, h0: 0.3, h_is: sx() }]).unwrap().tilt_angle())
            .collect();
        assert!((small[0] / small[1] - 10.0).abs() < 1e-3);
    }

    #[test]
    fn commutator_residual_vanishes_for_commuting_rho() {
        let r = renormalized_hamiltonian(&hs(0.05), &[RenormalizationTerm { strength: 0.1, h0: 0.3, h_is: sx() }]).unwrap();
        assert_eq!(commutator_residual(&r.matrix, &SmallMatrix::identity(2).scale_real(0.5)).absolute, 0.0);
        let mut rho = SmallMatrix::zeros(2);
        for k in 0..2 {
            let v = r.eigen.vector(k);
            let p = [0.7, 0.3][k];
            for a in 0..2 {
                for b in 0..2 {
                    rho[(a, b)] += c(p * v[a] * v[b], 0.0);
                }
            }
        }
        assert!(commutator_residual(&r.matrix, &rho).absolute < 1e-15);
        assert!(commutator_residual(&hs(0.05), &rho).absolute > 1e-3);
    }

    #[test]
    fn eta_values() {
        let (d, r) = eta_coefficients(&sx(), [-0.025, 0.025]).unwrap();
        assert_eq!(d, 0.0);
        assert!((r - 1.0 / (2.0 * 0.05)).abs() < 1e-12);
        let both = SmallMatrix::from_real_2x2(QubitOperator::SxPlusSz.matrix());
        let (d, r) = eta_coefficients(&both, [-0.15, 0.15]).unwrap();
        assert!((d + 1.0 / 0.3).abs() < 1e-12);
        assert!((r - 1.0 / 0.6).abs() < 1e-12);
        assert_eq!(eta_coefficients(&SmallMatrix::identity(2), [-0.1, 0.1]).unwrap(), (0.0, 0.0));
        assert!(eta_coefficients(&sx(), [0.1, 0.1]).is_err());
    }

    #[test]
    fn tls_formula_limits() {
        assert_eq!(tls_prediction(-3.0, 1.6, 0.0, 0.3, 0.26, 0.74).unwrap(), c(0.0, 0.0));
        assert_eq!(tls_prediction(-3.0, 1.6, 0.1, 0.3, 0.5, 0.5).unwrap(), c(0.0, 0.0));
        assert!(matches!(tls_prediction(10.0, 1.0, 0.5, 0.2, 0.3, 0.7), Err(PredictionError::Pole(_))));
        let v = tls_prediction(0.0, 10.0, 0.01, 0.3, 0.26, 0.74).unwrap();
        assert!((v.re - 0.01 * 10.0 * 0.3 * 0.48).abs() < 1e-15);
    }

    #[test]
    fn realness() {
        let mut rho = SmallMatrix::diagonal(&[0.3, 0.7]);
        assert_eq!(realness_residual(&rho, &sx()), 0.0);
        rho[(0, 1)] = c(0.1, 0.0);
        rho[(1, 0)] = c(0.1, 0.0);
        assert_eq!(realness_residual(&rho, &sx()), 0.0);
        rho[(0, 1)] = c(0.1, 0.05);
        rho[(1, 0)] = c(0.1, -0.05);
        assert!((realness_residual(&rho, &sx()) - 0.05).abs() < 1e-15);
    }

    #[test]
    fn weak_coupling_matches_tls_under_substitution() {
        let c0 = [c(0.51, 0.0), c(0.86, 0.0)];
        let norm = (0.51f64.powi(2) + 0.86f64.powi(2)).sqrt();
        let c0 = [c0[0] / norm, c0[1] / norm];
        let e = [-0.025, 0.025];
        let (lambda, h0) = (1e-3, 0.31);
        let weak = weak_coupling_prediction(lambda, &sx(), &e, h0, &c0).unwrap();
        let (eta_d, eta_r) = eta_coefficients(&sx(), e).unwrap();
        let tls = tls_prediction(eta_d, eta_r, lambda, h0, c0[0].norm_sqr(), c0[1].norm_sqr()).unwrap();
        assert!((weak[(0, 1)] - tls).norm() < 1e-12);
        let explicit = lambda * eta_r * h0 * (c0[1].norm_sqr() - c0[0].norm_sqr());
        assert!((weak[(0, 1)].re - explicit).abs() < 1e-15);
        assert!((weak[(0, 0)].re - c0[0].norm_sqr()).abs() < 1e-15);
        // Hermitian by construction
        assert!((weak[(1, 0)] - weak[(0, 1)].conj()).norm() < 1e-15);
        let equal = [c(0.5f64.sqrt(), 0.0), c(0.0, 0.5f64.sqrt())];
        assert_eq!(weak_coupling_prediction(0.1, &sx(), &e, h0, &equal).unwrap()[(0, 1)].norm(), 0.0);
    }

    #[test]
    fn h1_limits() {
        let chain = ChainConfig::defect_ising(6);
        let env = eigh_sparse(&build_env_hamiltonian(&chain).unwrap()).unwrap();
        let op = local_observable(3, Axis::X, 6).unwrap();
        let mut coeffs = vec![c(0.0, 0.0); 64];
        coeffs[20] = c(0.0, 1.0);
        let h1 = h1_weighted(&env, &op, &coeffs).unwrap();
        let mut buf = vec![0.0; 64];
        op.matvec_real_into(env.vector(20), &mut buf).unwrap();
        let direct: f64 = env.vector(20).iter().zip(&buf).map(|(a, b)| a * b).sum();
        assert!((h1 - direct).abs() < 1e-14);

        let id = SparseHamiltonian::identity(64);
        let spread: Vec<Complex64> = (0..64).map(|k| c((k as f64).sin(), 0.3)).collect();
        let n = crate::dynamics::norm(&spread);
        let spread: Vec<Complex64> = spread.iter().map(|z| z / n).collect();
        assert!((h1_weighted(&env, &id, &spread).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn h1_degenerate_block_includes_cross_terms() {
        // Two exactly degenerate levels of a diagonal matrix, mixed by the operator.
        let eig = crate::eigensolver::eigh(&[1.0, 0.0, 0.0, 1.0], 2).unwrap();
        let op = SparseHamiltonian::from_triplets(2, vec![(0, 1, 1.0), (1, 0, 1.0)]);
        let s = 0.5f64.sqrt();
        let h1 = h1_weighted(&eig, &op, &[c(s, 0.0), c(s, 0.0)]).unwrap();
        assert!((h1 - 1.0).abs() < 1e-15);
    }

    #[test]
    fn crossings() {
        let pts = [(0.001, 0.01), (0.01, 0.05), (0.1, 0.15), (1.0, 0.5)];
        match first_crossing(&pts, 0.1).unwrap() {
            Crossing::At { lambda, bracket } => {
                assert_eq!(bracket, (0.01, 0.1));
                assert!((lambda - 10f64.powf(-2.0 + 0.5)).abs() < 1e-12);
            }
            other => panic!("{other:?}"),
        }
        assert_eq!(first_crossing(&[(0.01, 0.05), (0.1, 0.05)], 0.1).unwrap(), Crossing::NeverExceeds);
        assert_eq!(first_crossing(&[(0.01, 0.6), (0.1, 0.7)], 0.1).unwrap(), Crossing::StartsAbove);
        assert_eq!(first_crossing(&[(0.1, 0.0), (0.01, 0.5)], 0.1).unwrap_err(), PredictionError::UnsortedGrid);
        assert_eq!(lambda_h_scan(&[(0.01, 0.05), (0.1, 0.05), (1.0, 0.05)], 0.1).unwrap().value(), None);
    }

    #[test]
    fn lambda_c_from_reports() {
        let inputs = PredictionInputs {
            h_s: hs(0.05),
            qubit_energies: [-0.025, 0.025],
            h_is: sx(),
            h0: 0.3,
            h1: 0.3,
            c0: [c(0.6, 0.0), c(0.8, 0.0)],
        };
        let reports: Vec<PredictionReport> = [0.001, 0.01, 0.1]
            .iter()
            .map(|&l| {
                let mut rho = SmallMatrix::diagonal(&[0.36, 0.64]);
                let exact = l * 10.0 * 0.3 * 0.28;
                rho[(0, 1)] = c(exact * (1.0 + l), 0.0);
                rho[(1, 0)] = rho[(0, 1)];
                prediction_report(&inputs, l, &rho, None).unwrap()
            })
            .collect();
        assert!(reports[0].rel_error_tls.unwrap() < 0.01);
        assert!(reports[0].commutator_residual < reports[0].bare_commutator_residual);
        assert_eq!(lambda_c_scan(&reports, 0.5).unwrap(), Crossing::NeverExceeds);
        assert!(lambda_c_scan(&reports, 0.05).unwrap().value().is_some());
    }
}
