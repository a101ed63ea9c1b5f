//! Eigenfunction main-body widths on the uncoupled basis, the effective
//! environmental energy region and the participation function.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dynamics::{ShellSpec, WaveFunction};
use crate::eigensolver::EigenDecomposition;

#[derive(Debug, Error, PartialEq)]
pub enum EfError {
    #[error("epsilon must lie in (0, 0.5), got {0}")]
    InvalidEpsilon(f64),
    #[error("dimension mismatch: total {total}, system {system} x environment {env}")]
    Dimension { total: usize, system: usize, env: usize },
    #[error("eigenstate index {0} out of range")]
    StateIndex(usize),
    #[error("inputs must be non-negative and finite")]
    InvalidInput,
}

fn check_epsilon(epsilon: f64) -> Result<(), EfError> {
    if epsilon > 0.0 && epsilon < 0.5 {
        Ok(())
    } else {
        Err(EfError::InvalidEpsilon(epsilon))
    }
}

/// The uncoupled basis `|α> ⊗ |i>` with `|i>` the environment eigenstates.
pub struct UncoupledBasis<'a> {
    pub env: &'a EigenDecomposition,
    pub qubit_energies: &'a [f64],
}

impl UncoupledBasis<'_> {
    /// `E_{αi} = e^S_α + e_i` on the total index.
    pub fn energies(&self) -> Vec<f64> {
        crate::lattice::uncoupled_energies(self.qubit_energies, self.env.energies())
    }

    /// `|C^n_{αi}|²` of a total eigenvector given in the product basis.
    pub fn weights(&self, total_vector: &[f64]) -> Vec<f64> {
        let d = self.env.dim();
        let mut out = Vec::with_capacity(total_vector.len());
        for branch in total_vector.chunks(d) {
            for i in 0..d {
                let c: f64 = self.env.vector(i).iter().zip(branch).map(|(a, b)| a * b).sum();
                out.push(c * c);
            }
        }
        out
    }

    fn check(&self, total: &EigenDecomposition) -> Result<(), EfError> {
        let (system, env) = (self.qubit_energies.len(), self.env.dim());
        if system * env != total.dim() {
            return Err(EfError::Dimension { total: total.dim(), system, env });
        }
        Ok(())
    }
}

/// Smallest `w` such that the weight with `|E_{αi} - center| ≤ w/2` reaches
/// `1 - ε`.
pub fn width_from_weights(weights: &[f64], energies: &[f64], center: f64, epsilon: f64) -> Result<f64, EfError> {
    check_epsilon(epsilon)?;
    let total: f64 = weights.iter().sum();
    let target = (1.0 - epsilon) * total;
    let mut order: Vec<(f64, f64)> = energies.iter().zip(weights).map(|(&e, &w)| ((e - center).abs(), w)).collect();
    order.sort_by(|a, b| a.0.total_cmp(&b.0));
    let mut acc = 0.0;
    for (k, &(dist, w)) in order.iter().enumerate() {
        acc += w;
        // Every state at the same distance enters the window together.
        let tie = order.get(k + 1).is_some_and(|next| next.0 == dist);
        if acc >= target && !tie {
            return Ok(2.0 * dist);
        }
    }
    Ok(2.0 * order.last().map_or(0.0, |p| p.0))
}

/// Main-body width `w^ε_n` of total eigenstate `n`.
pub fn ef_width(total: &EigenDecomposition, n: usize, basis: &UncoupledBasis<'_>, epsilon: f64) -> Result<f64, EfError> {
    basis.check(total)?;
    if n >= total.dim() {
        return Err(EfError::StateIndex(n));
    }
    let weights = basis.weights(total.vector(n));
    width_from_weights(&weights, &basis.energies(), total.energies()[n], epsilon)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StateWidth {
    pub n: usize,
    pub energy: f64,
    pub population: f64,
    pub width: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EfWidthReport {
    pub per_state: Vec<StateWidth>,
    pub w_eps_max: f64,
    pub epsilon: f64,
    pub relevant_set_rule: String,
}

pub const RELEVANT_SET_RULE: &str =
    "smallest set of eigenstates, taken in descending |<n|psi0>|^2, whose populations sum to at least 1 - epsilon";

/// `|<n|Ψ0>|²` for every total eigenstate.
pub fn populations(total: &EigenDecomposition, psi0: &WaveFunction) -> Vec<f64> {
    total.project(&psi0.amplitudes).iter().map(|c| c.norm_sqr()).collect()
}

/// Indices of the relevant states under [`RELEVANT_SET_RULE`].
pub fn relevant_states(populations: &[f64], epsilon: f64) -> Vec<usize> {
    let mut order: Vec<usize> = (0..populations.len()).collect();
    order.sort_by(|&a, &b| populations[b].total_cmp(&populations[a]).then(a.cmp(&b)));
    let total: f64 = populations.iter().sum();
    let mut acc = 0.0;
    let mut out = Vec::new();
    for k in order {
        if acc >= (1.0 - epsilon) * total {
            break;
        }
        acc += populations[k];
        out.push(k);
    }
    out
}

/// `w^ε_max` over the relevant states of `psi0`.
pub fn w_max(total: &EigenDecomposition, basis: &UncoupledBasis<'_>, psi0: &WaveFunction, epsilon: f64) -> Result<EfWidthReport, EfError> {
    check_epsilon(epsilon)?;
    basis.check(total)?;
    let pops = populations(total, psi0);
    let energies = basis.energies();
    let mut per_state = Vec::new();
    for n in relevant_states(&pops, epsilon) {
        let weights = basis.weights(total.vector(n));
        let width = width_from_weights(&weights, &energies, total.energies()[n], epsilon)?;
        per_state.push(StateWidth { n, energy: total.energies()[n], population: pops[n], width });
    }
    let w_eps_max = per_state.iter().map(|s| s.width).fold(0.0, f64::max);
    Ok(EfWidthReport { per_state, w_eps_max, epsilon, relevant_set_rule: RELEVANT_SET_RULE.to_string() })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EffectiveRegion {
    pub delta_e: f64,
    pub delta_e0: f64,
    pub two_delta_s: f64,
    pub w_eps_max: f64,
}

/// `δe = δe0 + 2Δ_S + w^ε_max` with `Δ_S = q_s` for the qubit.
pub fn effective_region(shell: &ShellSpec, q_s: f64, w_eps_max: f64) -> Result<EffectiveRegion, EfError> {
    let ok = |x: f64| x >= 0.0 && x.is_finite();
    if !(ok(shell.delta_e0) && ok(q_s) && ok(w_eps_max)) {
        return Err(EfError::InvalidInput);
    }
    let two_delta_s = 2.0 * q_s;
    Ok(EffectiveRegion { delta_e: shell.delta_e0 + two_delta_s + w_eps_max, delta_e0: shell.delta_e0, two_delta_s, w_eps_max })
}

/// `L0 = 1 / Σ_n |<n|Ψ0>|⁴`.
pub fn participation(total: &EigenDecomposition, psi0: &WaveFunction) -> f64 {
    1.0 / populations(total, psi0).iter().map(|p| p * p).sum::<f64>()
}

/// `2 g2_max / L0`, an upper bound on the averaged norm of the fluctuation
/// operator.
pub fn fluctuation_bound(g2_max_in_shell: f64, l0: f64) -> Result<f64, EfError> {
    if !(g2_max_in_shell >= 0.0 && l0 > 0.0) {
        return Err(EfError::InvalidInput);
    }
    Ok(2.0 * g2_max_in_shell / l0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_initial_state, normalize, sample_shell_state};
    use crate::eigensolver::eigh_sparse;
    use crate::lattice::{self, ChainConfig, CouplingConfig, InteractionKind};
    use num_complex::Complex64;

    struct Fixture {
        env: EigenDecomposition,
        total: EigenDecomposition,
        qubit: [f64; 2],
        psi0: WaveFunction,
    }

    fn fixture(n: usize, lambda: f64) -> Fixture {
        let chain = ChainConfig::defect_ising(n);
        let coupling = CouplingConfig { q_s: 0.05, lambda, coupling_site: 7.min(n), interaction: InteractionKind::SxSx };
        let env = eigh_sparse(&lattice::build_env_hamiltonian(&chain).unwrap()).unwrap();
        let total = eigh_sparse(&lattice::build_total_hamiltonian(&chain, &coupling).unwrap()).unwrap();
        let shell = ShellSpec::new(-1.2 * n as f64 / 13.0, 0.3).unwrap();
        let state = sample_shell_state(&env, &shell, 1).unwrap();
        let c0 = normalize(&[Complex64::new(0.51, 0.0), Complex64::new(0.86, 0.0)]);
        let psi0 = build_initial_state(&c0, &state.product_vector(&env)).unwrap();
        Fixture { env, total, qubit: lattice::qubit_energies(&coupling), psi0 }
    }

    /// Tries every window `[E_n - r, E_n + r]` with `r` a distance to some basis
    /// energy and keeps the narrowest one reaching the target.
    fn brute_force_width(weights: &[f64], energies: &[f64], center: f64, epsilon: f64) -> f64 {
        let mut best = f64::INFINITY;
        for &r in energies.iter().map(|e| (e - center).abs()).collect::<Vec<_>>().iter() {
            let inside: f64 = weights.iter().zip(energies).filter(|(_, &e)| (e - center).abs() <= r).map(|(w, _)| w).sum();
            if inside >= 1.0 - epsilon && 2.0 * r < best {
                best = 2.0 * r;
            }
        }
        best
    }

    #[test]
    fn uncoupled_states_have_zero_width() {
        let f = fixture(6, 0.0);
        let basis = UncoupledBasis { env: &f.env, qubit_energies: &f.qubit };
        for n in [0, 10, 77] {
            assert!(ef_width(&f.total, n, &basis, 0.05).unwrap() < 1e-12);
        }
        assert!(w_max(&f.total, &basis, &f.psi0, 0.05).unwrap().w_eps_max < 1e-12);
    }

    #[test]
    fn width_matches_exhaustive_scan() {
        let f = fixture(8, 0.1);
        let basis = UncoupledBasis { env: &f.env, qubit_energies: &f.qubit };
        let energies = basis.energies();
        for n in (0..f.total.dim()).step_by(37) {
            let weights = basis.weights(f.total.vector(n));
            assert!((weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
            let fast = ef_width(&f.total, n, &basis, 0.05).unwrap();
            let slow = brute_force_width(&weights, &energies, f.total.energies()[n], 0.05);
            assert!((fast - slow).abs() < 1e-12, "n={n}: {fast} vs {slow}");
        }
    }

    #[test]
    fn width_nonincreasing_in_epsilon() {
        let f = fixture(6, 0.3);
        let basis = UncoupledBasis { env: &f.env, qubit_energies: &f.qubit };
        for n in [3, 40, 100] {
            let widths: Vec<f64> = [0.01, 0.05, 0.1, 0.3].iter().map(|&e| ef_width(&f.total, n, &basis, e).unwrap()).collect();
            assert!(widths.windows(2).all(|w| w[0] >= w[1]));
        }
        assert_eq!(ef_width(&f.total, 0, &basis, 0.6).unwrap_err(), EfError::InvalidEpsilon(0.6));
    }

    #[test]
    fn relevant_set_rule() {
        let pops = [0.05, 0.5, 0.3, 0.15];
        assert_eq!(relevant_states(&pops, 0.1), vec![1, 2, 3]);
        assert_eq!(relevant_states(&pops, 0.25), vec![1, 2]);
        let f = fixture(6, 0.1);
        let basis = UncoupledBasis { env: &f.env, qubit_energies: &f.qubit };
        let report = w_max(&f.total, &basis, &f.psi0, 0.05).unwrap();
        let captured: f64 = report.per_state.iter().map(|s| s.population).sum();
        assert!(captured >= 0.95);
        let max = report.per_state.iter().map(|s| s.width).fold(0.0, f64::max);
        assert_eq!(report.w_eps_max, max);
    }

    #[test]
    fn effective_region_sums() {
        let r = effective_region(&ShellSpec { e0: -1.2, delta_e0: 0.1 }, 0.05, 0.0).unwrap();
        assert!((r.delta_e - 0.2).abs() < 1e-15);
        let r = effective_region(&ShellSpec { e0: -1.2, delta_e0: 0.1 }, 0.3, 0.0).unwrap();
        assert!((r.delta_e - 0.7).abs() < 1e-15);
        assert!(effective_region(&ShellSpec { e0: 0.0, delta_e0: 0.1 }, -0.1, 0.0).is_err());
    }

    #[test]
    fn participation_limits() {
        let f = fixture(6, 0.1);
        let eigenstate = WaveFunction {
            amplitudes: f.total.vector(4).iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            time: 0.0,
            env_dim: 64,
        };
        assert!((participation(&f.total, &eigenstate) - 1.0).abs() < 1e-10);
        let k = 7;
        let mut amps = vec![Complex64::new(0.0, 0.0); 128];
        for n in 0..k {
            for (a, &v) in amps.iter_mut().zip(f.total.vector(10 * n)) {
                *a += Complex64::new(v / (k as f64).sqrt(), 0.0);
            }
        }
        let sup = WaveFunction { amplitudes: amps, time: 0.0, env_dim: 64 };
        assert!((participation(&f.total, &sup) - k as f64).abs() < 1e-9);
        let l0 = participation(&f.total, &f.psi0);
        assert!((1.0..=128.0).contains(&l0));
    }

    #[test]
    fn participation_against_direct_sum() {
        let f = fixture(8, 0.05);
        let mut sum = 0.0;
        for n in 0..f.total.dim() {
            let v = f.total.vector(n);
            let mut overlap = Complex64::new(0.0, 0.0);
            for k in 0..v.len() {
                overlap += f.psi0.amplitudes[k] * v[k];
            }
            sum += overlap.norm_sqr().powi(2);
        }
        assert!((participation(&f.total, &f.psi0) - 1.0 / sum).abs() < 1e-9 / sum);
    }

    #[test]
    fn bound_vanishes_for_large_participation() {
        assert_eq!(fluctuation_bound(0.01, 1e300).unwrap(), 2e-302);
        assert!((fluctuation_bound(0.01, 4.0).unwrap() - 0.005).abs() < 1e-18);
        assert!(fluctuation_bound(0.01, 0.0).is_err());
    }
}
