//! Experiment configuration: one JSON document describing the model, the
//! sweep grids and the analysis parameters.

use std::path::{Path, PathBuf};

use ethlab::dynamics::{AveragingWindow, ShellSpec};
use ethlab::lattice::{Axis, ChainConfig, CouplingConfig, InteractionKind};
use ethlab::Complex64;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ShellScaling {
    /// `e0(N) = e0 · N / reference_n`, keeping `e0/N` fixed.
    PerSite,
    /// `e0(N) = e0` for every `N`.
    Fixed,
}

/// Energy shell of the initial environment state.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShellConfig {
    pub e0: f64,
    pub delta_e0: f64,
    pub reference_n: usize,
    pub scaling: ShellScaling,
}

impl Default for ShellConfig {
    fn default() -> Self {
        Self { e0: -1.2, delta_e0: 0.1, reference_n: 13, scaling: ShellScaling::PerSite }
    }
}

impl ShellConfig {
    pub fn center(&self, n_sites: usize) -> f64 {
        match self.scaling {
            ShellScaling::PerSite => self.e0 * n_sites as f64 / self.reference_n as f64,
            ShellScaling::Fixed => self.e0,
        }
    }

    pub fn shell_for(&self, n_sites: usize) -> Result<ShellSpec, CliError> {
        ShellSpec::new(self.center(n_sites), self.delta_e0).map_err(|e| CliError::Config(e.to_string()))
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Strictly ascending.
    pub lambda_grid: Vec<f64>,
    pub n_grid: Vec<usize>,
    pub q_s: Vec<f64>,
    pub interactions: Vec<InteractionKind>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            lambda_grid: vec![0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.5],
            n_grid: vec![10],
            q_s: vec![0.05],
            interactions: vec![InteractionKind::SxSx],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DynamicsConfig {
    pub t_min: f64,
    pub t_max: f64,
    pub dt_sample: f64,
    pub krylov_dim: usize,
    pub krylov_tol: f64,
    pub seed: u64,
    /// Qubit amplitudes as `[re, im]` pairs; normalized on use.
    pub c0: Vec<[f64; 2]>,
    /// Bound on the split-window difference of the time-averaged RDM.
    pub averaging_tolerance: f64,
    /// Record the sampled trajectory in `evolve` and `sweep`.
    pub record_trajectory: bool,
}

impl Default for DynamicsConfig {
    fn default() -> Self {
        let w = AveragingWindow::default();
        Self {
            t_min: w.t_min,
            t_max: w.t_max,
            dt_sample: w.dt_sample,
            krylov_dim: 30,
            krylov_tol: 1e-12,
            seed: 1,
            c0: vec![[0.51, 0.0], [0.86, 0.0]],
            averaging_tolerance: 0.01,
            record_trajectory: true,
        }
    }
}

impl DynamicsConfig {
    pub fn window(&self) -> AveragingWindow {
        AveragingWindow { t_min: self.t_min, t_max: self.t_max, dt_sample: self.dt_sample }
    }

    /// Normalized qubit amplitudes.
    pub fn c0(&self) -> Vec<Complex64> {
        let raw: Vec<Complex64> = self.c0.iter().map(|p| Complex64::new(p[0], p[1])).collect();
        ethlab::dynamics::normalize(&raw)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AnalysisConfig {
    /// Weight left outside the main body of an eigenfunction.
    pub epsilon: f64,
    pub eps_h: f64,
    pub eps_c: f64,
    /// Width of the `h(e)` smoothing window in per-site energy.
    pub window_width: f64,
    /// Shell for the fluctuation statistics.
    pub eth_shell: ShellSpec,
    pub eth_axes: Vec<Axis>,
    pub min_shell_levels: usize,
    pub omega_bin: f64,
    pub omega_max: f64,
    pub g2_min_count: usize,
    /// Eigenstates with smaller population are dropped from the diagonal
    /// ensemble.
    pub population_cutoff: f64,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        Self {
            epsilon: 0.05,
            eps_h: 0.1,
            eps_c: 0.1,
            window_width: 0.01,
            eth_shell: ShellSpec { e0: -1.2, delta_e0: 0.2 },
            eth_axes: vec![Axis::X, Axis::Z],
            min_shell_levels: ethlab::eth::MIN_SHELL_LEVELS,
            omega_bin: 0.05,
            omega_max: 2.0,
            g2_min_count: 10,
            population_cutoff: 1e-14,
        }
    }
}

/// Dimension caps for dense decompositions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Limits {
    pub env_dim_cap: usize,
    pub total_dim_cap: usize,
}

impl Default for Limits {
    fn default() -> Self {
        Self { env_dim_cap: 4096, total_dim_cap: 4096 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    /// `n_sites` is replaced by each entry of `sweep.n_grid`.
    #[serde(default = "default_chain")]
    pub chain: ChainConfig,
    /// `q_s`, `lambda` and `interaction` are replaced by the sweep values.
    #[serde(default = "default_coupling")]
    pub coupling: CouplingConfig,
    #[serde(default)]
    pub shell: ShellConfig,
    #[serde(default)]
    pub sweep: SweepConfig,
    #[serde(default)]
    pub dynamics: DynamicsConfig,
    #[serde(default)]
    pub analysis: AnalysisConfig,
    #[serde(default)]
    pub limits: Limits,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
}

fn default_chain() -> ChainConfig {
    ChainConfig::defect_ising(10)
}

fn default_coupling() -> CouplingConfig {
    CouplingConfig { q_s: 0.05, lambda: 0.0, coupling_site: 7, interaction: InteractionKind::SxSx }
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("runs/default")
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            chain: default_chain(),
            coupling: default_coupling(),
            shell: ShellConfig::default(),
            sweep: SweepConfig::default(),
            dynamics: DynamicsConfig::default(),
            analysis: AnalysisConfig::default(),
            limits: Limits::default(),
            output_dir: default_output_dir(),
        }
    }
}

fn check(cond: bool, msg: impl Into<String>) -> Result<(), CliError> {
    if cond {
        Ok(())
    } else {
        Err(CliError::Config(msg.into()))
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn chain_for(&self, n_sites: usize) -> ChainConfig {
        ChainConfig { n_sites, ..self.chain.clone() }
    }

    pub fn coupling_for(&self, q_s: f64, interaction: &InteractionKind, lambda: f64) -> CouplingConfig {
        CouplingConfig { q_s, lambda, coupling_site: self.coupling.coupling_site, interaction: interaction.clone() }
    }

    pub fn validate(&self) -> Result<(), CliError> {
        let s = &self.sweep;
        check(!s.lambda_grid.is_empty(), "sweep.lambda_grid is empty")?;
        check(!s.n_grid.is_empty(), "sweep.n_grid is empty")?;
        check(!s.q_s.is_empty(), "sweep.q_s is empty")?;
        check(!s.interactions.is_empty(), "sweep.interactions is empty")?;
        check(s.lambda_grid.iter().all(|l| l.is_finite() && *l >= 0.0), "sweep.lambda_grid must be finite and nonnegative")?;
        check(s.lambda_grid.windows(2).all(|w| w[0] < w[1]), "sweep.lambda_grid must be strictly ascending")?;
        for &n in &s.n_grid {
            let chain = self.chain_for(n);
            chain.validate()?;
            for &q in &s.q_s {
                check(q > 0.0, "sweep.q_s entries must be positive")?;
                for kind in &s.interactions {
                    self.coupling_for(q, kind, 0.0).validate(&chain)?;
                }
            }
        }
        check(self.shell.reference_n > 0, "shell.reference_n must be positive")?;
        for &n in &s.n_grid {
            self.shell.shell_for(n)?;
        }
        self.analysis.eth_shell.validate().map_err(|e| CliError::Config(format!("analysis.eth_shell: {e}")))?;

        let d = &self.dynamics;
        self.dynamics.window().validate().map_err(|e| CliError::Config(format!("dynamics: {e}")))?;
        check(d.krylov_dim >= 2, "dynamics.krylov_dim must be at least 2")?;
        check(d.krylov_tol > 0.0, "dynamics.krylov_tol must be positive")?;
        check(d.c0.len() == 2, "dynamics.c0 must hold two amplitudes")?;
        check(d.c0.iter().flatten().all(|x| x.is_finite()), "dynamics.c0 must be finite")?;
        check(d.c0.iter().map(|p| p[0] * p[0] + p[1] * p[1]).sum::<f64>() > 0.0, "dynamics.c0 must be nonzero")?;
        check(d.averaging_tolerance > 0.0, "dynamics.averaging_tolerance must be positive")?;

        let a = &self.analysis;
        check(a.epsilon > 0.0 && a.epsilon < 0.5, "analysis.epsilon must lie in (0, 0.5)")?;
        check(a.eps_h > 0.0 && a.eps_c > 0.0, "analysis.eps_h and eps_c must be positive")?;
        check(a.window_width > 0.0, "analysis.window_width must be positive")?;
        check(a.omega_bin > 0.0 && a.omega_max > 0.0, "analysis.omega_bin and omega_max must be positive")?;
        check(!a.eth_axes.is_empty(), "analysis.eth_axes is empty")?;
        check(a.population_cutoff >= 0.0, "analysis.population_cutoff must be nonnegative")?;
        check(self.limits.env_dim_cap >= 4 && self.limits.total_dim_cap >= 4, "limits must be at least 4")?;
        Ok(())
    }

    /// SHA-256 of the canonical JSON form, ignoring `output_dir`.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.output_dir = PathBuf::new();
        hex::encode(Sha256::digest(serde_json::to_vec(&c).expect("config serializes")))
    }
}
