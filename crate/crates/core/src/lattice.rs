//! Model Hamiltonians of the qubit + defect Ising chain over the product basis.
//!
//! Spin operators are Pauli matrices divided by two. The environment is
//!
//! ```text
//! H^E = B_x Σ_l S^x_l + Σ_s d_s S^z_s + J_z Σ_l S^z_l S^z_{l+1}
//! ```
//!
//! with the bond `(N, 1)` included when the chain is periodic. The qubit has
//! `H^S = q_s S^z` and couples to one site `k` through `λ H^{IS} ⊗ H^{IE}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::small::SmallMatrix;
use crate::sparse::SparseHamiltonian;

/// Qubit levels. Fixed to two throughout the crate.
pub const QUBIT_DIM: usize = 2;

#[derive(Debug, Error, PartialEq)]
pub enum ConfigError {
    #[error("chain needs at least 2 sites, got {0}")]
    TooFewSites(usize),
    #[error("chains longer than {max} sites are not supported, got {0}", max = MAX_SITES)]
    TooManySites(usize),
    #[error("site {site} outside the chain 1..={n_sites}")]
    SiteOutOfRange { site: usize, n_sites: usize },
    #[error("defect site {0} listed more than once")]
    DuplicateDefect(usize),
    #[error("qubit splitting q_s must be finite and non-negative, got {0}")]
    InvalidSplitting(f64),
    #[error("generic interaction needs at least one term")]
    EmptyInteraction,
    #[error("non-finite parameter `{0}`")]
    NonFinite(&'static str),
}

pub const MAX_SITES: usize = 24;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Defect {
    pub site: usize,
    pub strength: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChainConfig {
    pub n_sites: usize,
    pub b_x: f64,
    pub j_z: f64,
    #[serde(default)]
    pub defects: Vec<Defect>,
    #[serde(default = "default_periodic")]
    pub periodic: bool,
}

fn default_periodic() -> bool {
    true
}

impl ChainConfig {
    /// Chaotic parameter set: `B_x = 0.9`, `J_z = 1.0`, `d_1 = 1.11`,
    /// `d_5 = 0.6`, periodic.
    pub fn defect_ising(n_sites: usize) -> Self {
        Self {
            n_sites,
            b_x: 0.9,
            j_z: 1.0,
            defects: vec![Defect { site: 1, strength: 1.11 }, Defect { site: 5, strength: 0.6 }],
            periodic: true,
        }
    }

    pub fn env_dim(&self) -> usize {
        1 << self.n_sites
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.n_sites < 2 {
            return Err(ConfigError::TooFewSites(self.n_sites));
        }
        if self.n_sites > MAX_SITES {
            return Err(ConfigError::TooManySites(self.n_sites));
        }
        if !self.b_x.is_finite() {
            return Err(ConfigError::NonFinite("b_x"));
        }
        if !self.j_z.is_finite() {
            return Err(ConfigError::NonFinite("j_z"));
        }
        let mut seen = Vec::with_capacity(self.defects.len());
        for d in &self.defects {
            check_site(d.site, self.n_sites)?;
            if !d.strength.is_finite() {
                return Err(ConfigError::NonFinite("defect strength"));
            }
            if seen.contains(&d.site) {
                return Err(ConfigError::DuplicateDefect(d.site));
            }
            seen.push(d.site);
        }
        Ok(())
    }
}

fn check_site(site: usize, n_sites: usize) -> Result<(), ConfigError> {
    if site == 0 || site > n_sites {
        Err(ConfigError::SiteOutOfRange { site, n_sites })
    } else {
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    X,
    Z,
}

/// Qubit-side operator of an interaction term, in the α basis.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QubitOperator {
    Sx,
    Sz,
    SxPlusSz,
    Identity,
    /// Explicit real symmetric 2×2 matrix.
    Matrix([[f64; 2]; 2]),
}

impl QubitOperator {
    pub fn matrix(&self) -> [[f64; 2]; 2] {
        match self {
            QubitOperator::Sx => [[0.0, 0.5], [0.5, 0.0]],
            QubitOperator::Sz => [[-0.5, 0.0], [0.0, 0.5]],
            QubitOperator::SxPlusSz => [[-0.5, 0.5], [0.5, 0.5]],
            QubitOperator::Identity => [[1.0, 0.0], [0.0, 1.0]],
            QubitOperator::Matrix(m) => *m,
        }
    }
}

/// One `λ_ν H^{IS,ν} ⊗ S^{axis}_{site}` term of a generic interaction.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GenericTerm {
    pub strength: f64,
    pub qubit: QubitOperator,
    pub site: usize,
    pub axis: Axis,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum InteractionKind {
    /// `S^x ⊗ S^x_k`
    SxSx,
    /// `(S^x + S^z) ⊗ S^x_k`
    SxPlusSzSx,
    /// Sum of product terms; each term's strength is multiplied by `λ`.
    Generic(Vec<GenericTerm>),
}

impl InteractionKind {
    pub fn label(&self) -> String {
        match self {
            InteractionKind::SxSx => "SxSx".into(),
            InteractionKind::SxPlusSzSx => "SxPlusSzSx".into(),
            InteractionKind::Generic(terms) => format!("Generic{}", terms.len()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CouplingConfig {
    pub q_s: f64,
    pub lambda: f64,
    pub coupling_site: usize,
    pub interaction: InteractionKind,
}

impl CouplingConfig {
    pub fn validate(&self, chain: &ChainConfig) -> Result<(), ConfigError> {
        if !(self.q_s.is_finite() && self.q_s >= 0.0) {
            return Err(ConfigError::InvalidSplitting(self.q_s));
        }
        if !self.lambda.is_finite() {
            return Err(ConfigError::NonFinite("lambda"));
        }
        check_site(self.coupling_site, chain.n_sites)?;
        if let InteractionKind::Generic(terms) = &self.interaction {
            if terms.is_empty() {
                return Err(ConfigError::EmptyInteraction);
            }
            for t in terms {
                check_site(t.site, chain.n_sites)?;
                if !t.strength.is_finite() {
                    return Err(ConfigError::NonFinite("term strength"));
                }
            }
        }
        Ok(())
    }

    pub fn with_lambda(&self, lambda: f64) -> Self {
        Self { lambda, ..self.clone() }
    }
}

/// One product term `strength · H^{IS} ⊗ H^{IE}` of the interaction, without
/// the overall `λ`.
#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTerm {
    pub strength: f64,
    pub qubit: SmallMatrix,
    pub env: SparseHamiltonian,
}

fn spin_z(state: usize, site: usize) -> f64 {
    if state >> (site - 1) & 1 == 1 {
        0.5
    } else {
        -0.5
    }
}

pub fn build_env_hamiltonian(cfg: &ChainConfig) -> Result<SparseHamiltonian, ConfigError> {
    cfg.validate()?;
    let n = cfg.n_sites;
    let dim = cfg.env_dim();
    let bonds: Vec<(usize, usize)> = (1..n)
        .map(|l| (l, l + 1))
        .chain(cfg.periodic.then_some((n, 1)))
        .collect();
    let mut triplets = Vec::with_capacity(dim * (n + 1));
    for state in 0..dim {
        let mut diag = 0.0;
        for d in &cfg.defects {
            diag += d.strength * spin_z(state, d.site);
        }
        for &(a, b) in &bonds {
            diag += cfg.j_z * spin_z(state, a) * spin_z(state, b);
        }
        triplets.push((state, state, diag));
        if cfg.b_x != 0.0 {
            for l in 0..n {
                triplets.push((state, state ^ (1 << l), 0.5 * cfg.b_x));
            }
        }
    }
    Ok(SparseHamiltonian::from_triplets(dim, triplets))
}

/// `S^x_site` or `S^z_site` on the `2^n_sites` environment space.
pub fn local_observable(site: usize, axis: Axis, n_sites: usize) -> Result<SparseHamiltonian, ConfigError> {
    if n_sites > MAX_SITES {
        return Err(ConfigError::TooManySites(n_sites));
    }
    check_site(site, n_sites)?;
    let dim = 1usize << n_sites;
    let triplets = (0..dim)
        .map(|s| match axis {
            Axis::X => (s, s ^ (1 << (site - 1)), 0.5),
            Axis::Z => (s, s, spin_z(s, site)),
        })
        .collect();
    Ok(SparseHamiltonian::from_triplets(dim, triplets))
}

/// `H^S = q_s S^z = diag(-q_s/2, +q_s/2)` in the α basis.
pub fn build_qubit_hamiltonian(cfg: &CouplingConfig) -> SmallMatrix {
    SmallMatrix::diagonal(&[-0.5 * cfg.q_s, 0.5 * cfg.q_s])
}

/// Qubit energies `e^S_α`, ascending.
pub fn qubit_energies(cfg: &CouplingConfig) -> [f64; 2] {
    [-0.5 * cfg.q_s, 0.5 * cfg.q_s]
}

pub fn build_interaction(cfg: &CouplingConfig, chain: &ChainConfig) -> Result<Vec<InteractionTerm>, ConfigError> {
    chain.validate()?;
    cfg.validate(chain)?;
    let n = chain.n_sites;
    let k = cfg.coupling_site;
    let product = |strength: f64, qubit: &QubitOperator, site: usize, axis: Axis| -> Result<InteractionTerm, ConfigError> {
        Ok(InteractionTerm {
            strength,
            qubit: SmallMatrix::from_real_2x2(qubit.matrix()),
            env: local_observable(site, axis, n)?,
        })
    };
    match &cfg.interaction {
        InteractionKind::SxSx => Ok(vec![product(1.0, &QubitOperator::Sx, k, Axis::X)?]),
        InteractionKind::SxPlusSzSx => Ok(vec![product(1.0, &QubitOperator::SxPlusSz, k, Axis::X)?]),
        InteractionKind::Generic(terms) => terms
            .iter()
            .map(|t| product(t.strength, &t.qubit, t.site, t.axis))
            .collect(),
    }
}

/// `H = H^S ⊗ I + λ Σ_ν s_ν H^{IS,ν} ⊗ H^{IE,ν} + I ⊗ H^E` on the total index
/// `α · 2^N + i`.
pub fn build_total_hamiltonian(chain: &ChainConfig, coupling: &CouplingConfig) -> Result<SparseHamiltonian, ConfigError> {
    let env = build_env_hamiltonian(chain)?;
    let terms = build_interaction(coupling, chain)?;
    let hs = build_qubit_hamiltonian(coupling);
    Ok(assemble_total(&hs, &env, &terms, coupling.lambda))
}

pub fn assemble_total(hs: &SmallMatrix, env: &SparseHamiltonian, terms: &[InteractionTerm], lambda: f64) -> SparseHamiltonian {
    let m = hs.dim();
    let d = env.dim();
    let mut triplets = Vec::new();
    for a in 0..m {
        for b in 0..m {
            let hs_ab = hs[(a, b)].re;
            if hs_ab != 0.0 {
                triplets.extend((0..d).map(|i| (a * d + i, b * d + i, hs_ab)));
            }
            for term in terms {
                let q = lambda * term.strength * term.qubit[(a, b)].re;
                if q == 0.0 {
                    continue;
                }
                for i in 0..d {
                    triplets.extend(term.env.row(i).map(|(j, v)| (a * d + i, b * d + j, q * v)));
                }
            }
        }
        for i in 0..d {
            triplets.extend(env.row(i).map(|(j, v)| (a * d + i, a * d + j, v)));
        }
    }
    SparseHamiltonian::from_triplets(m * d, triplets)
}

/// Uncoupled energies `E_{αi} = e^S_α + e_i` laid out on the total index.
pub fn uncoupled_energies(qubit: &[f64], env: &[f64]) -> Vec<f64> {
    qubit.iter().flat_map(|&ea| env.iter().map(move |&ei| ea + ei)).collect()
}
