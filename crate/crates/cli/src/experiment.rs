//! One grid point end to end: environment, initial state, averaged RDM,
//! widths and predictions.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use ethlab::dynamics::{
    build_initial_state, diagonal_ensemble, sample_shell_state, stationarity_residual, time_average, ConvergenceReport, KrylovPropagator,
    ShellSpec, SystemCoupling, TimeAverage, TrajectorySample, WaveFunction,
};
use ethlab::eigensolver::{eigh_sparse, EigenDecomposition};
use ethlab::ef::{effective_region, participation, w_max, EfWidthReport, EffectiveRegion, UncoupledBasis};
use ethlab::eth::{delta_h_ratio, observable_in_eigenbasis, smoothed_h, ConditionRatio, HPoint, MatrixElements, PairRule};
use ethlab::lattice::{
    assemble_total, build_env_hamiltonian, build_interaction, build_qubit_hamiltonian, qubit_energies, ChainConfig, InteractionKind,
};
use ethlab::predictions::{h1_weighted, lambda_c_scan, lambda_h_scan, prediction_report, Crossing, PredictionInputs, PredictionReport};
use ethlab::small::SmallMatrix;
use ethlab::sparse::SparseHamiltonian;
use serde::{Deserialize, Serialize};

use crate::cache::EigenCache;
use crate::config::ExperimentConfig;
use crate::error::CliError;

/// Environment Hamiltonian and its full decomposition.
pub struct Environment {
    pub chain: ChainConfig,
    pub hamiltonian: SparseHamiltonian,
    pub eig: EigenDecomposition,
}

impl Environment {
    pub fn build(chain: &ChainConfig, cache: &EigenCache) -> Result<Self, CliError> {
        let hamiltonian = build_env_hamiltonian(chain)?;
        let eig = cache.env_decomposition(chain, &hamiltonian)?;
        Ok(Self { chain: chain.clone(), hamiltonian, eig })
    }

    pub fn n_sites(&self) -> usize {
        self.chain.n_sites
    }
}

/// Eigenbasis matrix elements of an observable and its smoothed `h(e)`.
pub struct ObservableProfile {
    pub elements: MatrixElements,
    pub curve: Vec<HPoint>,
}

pub fn observable_profile(
    env: &Environment,
    op: &SparseHamiltonian,
    shell: &ShellSpec,
    rule: PairRule,
    window_width: f64,
) -> Result<ObservableProfile, CliError> {
    let elements = observable_in_eigenbasis(&env.eig, op, shell, rule)?;
    let curve = smoothed_h(&elements, env.n_sites(), window_width)?;
    Ok(ObservableProfile { elements, curve })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSpec {
    pub n_sites: usize,
    pub q_s: f64,
    pub interaction: InteractionKind,
    pub lambda: f64,
    pub seed: u64,
}

impl PointSpec {
    pub fn label(&self) -> String {
        format!("N{}_q{}_{}_l{}_s{}", self.n_sites, self.q_s, self.interaction.label(), self.lambda, self.seed)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AverageMethod {
    DiagonalEnsemble,
    TimeAverage,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WidthSource {
    Computed,
    /// Taken from the same point at a smaller chain.
    Fallback { n_sites: usize },
    Unavailable,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TimeAverageSummary {
    pub rho: SmallMatrix,
    pub convergence: ConvergenceReport,
    pub samples: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryRow {
    pub time: f64,
    pub rho11: f64,
    pub rho22: f64,
    pub rho12_re: f64,
    pub rho12_im: f64,
    pub energy: f64,
    pub norm: f64,
}

pub const TRAJECTORY_HEADER: &str = "# ethlab trajectory v1\ntime,rho11,rho22,rho12_re,rho12_im,energy,norm\n";

pub fn trajectory_csv(rows: &[TrajectoryRow]) -> String {
    let mut out = String::from(TRAJECTORY_HEADER);
    for r in rows {
        out.push_str(&format!("{},{:e},{:e},{:e},{:e},{:e},{:e}\n", r.time, r.rho11, r.rho22, r.rho12_re, r.rho12_im, r.energy, r.norm));
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub spec: PointSpec,
    pub total_dim: usize,
    pub shell: ShellSpec,
    pub shell_levels: usize,
    pub method: AverageMethod,
    /// Long-time average of the reduced density matrix.
    pub rho: SmallMatrix,
    pub f: Vec<SmallMatrix>,
    pub stationarity_residual: f64,
    pub time_average: Option<TimeAverageSummary>,
    pub width: Option<EfWidthReport>,
    pub width_source: WidthSource,
    pub region: EffectiveRegion,
    pub condition: Option<ConditionRatio>,
    pub participation: Option<f64>,
    pub prediction: Option<PredictionReport>,
    pub warnings: Vec<String>,
}

impl PointResult {
    pub fn w_eps_max(&self) -> Option<f64> {
        match self.width_source {
            WidthSource::Unavailable => None,
            _ => Some(self.region.w_eps_max),
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointOptions {
    /// Propagate and sample `ρ(t)` even when the diagonal ensemble is used.
    pub trajectory: bool,
    /// Compute `w^ε_max` when the total system is within the cap.
    pub width: bool,
    /// `(n_sites, w)` used when the width cannot be computed.
    pub width_fallback: Option<(usize, f64)>,
}

fn sample_row(s: &TrajectorySample<'_>) -> TrajectoryRow {
    TrajectoryRow {
        time: s.time,
        rho11: s.rho.get(0, 0).re,
        rho22: s.rho.get(1, 1).re,
        rho12_re: s.rho.get(0, 1).re,
        rho12_im: s.rho.get(0, 1).im,
        energy: s.energy,
        norm: s.psi.norm(),
    }
}

/// Krylov propagation over the configured window.
pub fn propagate_and_average(
    cfg: &ExperimentConfig,
    total: &SparseHamiltonian,
    psi0: &WaveFunction,
    ops: &[&SparseHamiltonian],
    record: bool,
) -> Result<(TimeAverage, Vec<TrajectoryRow>), CliError> {
    let propagator = KrylovPropagator::new(cfg.dynamics.krylov_dim, cfg.dynamics.krylov_tol)?;
    let mut rows = Vec::new();
    let avg = time_average(total, psi0, ops, &propagator, &cfg.dynamics.window(), cfg.dynamics.averaging_tolerance, |s| {
        if record {
            rows.push(sample_row(s));
        }
    })?;
    Ok((avg, rows))
}

pub fn run_point(cfg: &ExperimentConfig, env: &Environment, spec: &PointSpec, opts: &PointOptions) -> Result<(PointResult, Vec<TrajectoryRow>), CliError> {
    if env.n_sites() != spec.n_sites {
        return Err(CliError::Config(format!("environment has {} sites, point wants {}", env.n_sites(), spec.n_sites)));
    }
    let chain = &env.chain;
    let coupling = cfg.coupling_for(spec.q_s, &spec.interaction, spec.lambda);
    let terms = build_interaction(&coupling, chain)?;
    let shell = cfg.shell.shell_for(spec.n_sites)?;
    let mut warnings = Vec::new();

    let state = sample_shell_state(&env.eig, &shell, spec.seed)?;
    let c0 = cfg.dynamics.c0();
    let psi0 = build_initial_state(&c0, &state.product_vector(&env.eig))?;
    let hs = build_qubit_hamiltonian(&coupling);
    let total = assemble_total(&hs, &env.hamiltonian, &terms, spec.lambda);
    let total_dim = total.dim();
    let ops: Vec<&SparseHamiltonian> = terms.iter().map(|t| &t.env).collect();
    let couplings: Vec<SystemCoupling> =
        terms.iter().map(|t| SystemCoupling { strength: spec.lambda * t.strength, h_is: t.qubit.clone() }).collect();

    let mut trajectory = Vec::new();
    let within_cap = total_dim <= cfg.limits.total_dim_cap;
    let (method, rho, f, width, width_source, l0, ta) = if within_cap {
        let total_eig = eigh_sparse(&total)?;
        let de = diagonal_ensemble(&total_eig, &psi0, &ops, cfg.analysis.population_cutoff)?;
        let (width, source) = if opts.width {
            let basis = UncoupledBasis { env: &env.eig, qubit_energies: &qubit_energies(&coupling) };
            (Some(w_max(&total_eig, &basis, &psi0, cfg.analysis.epsilon)?), WidthSource::Computed)
        } else {
            (None, WidthSource::Unavailable)
        };
        let l0 = participation(&total_eig, &psi0);
        let ta = if opts.trajectory {
            let (avg, rows) = propagate_and_average(cfg, &total, &psi0, &ops, true)?;
            trajectory = rows;
            Some(TimeAverageSummary { rho: avg.rho.matrix, convergence: avg.convergence, samples: avg.samples })
        } else {
            None
        };
        (AverageMethod::DiagonalEnsemble, de.rho.matrix, de.f, width, source, Some(l0), ta)
    } else {
        let (avg, rows) = propagate_and_average(cfg, &total, &psi0, &ops, opts.trajectory)?;
        trajectory = rows;
        warnings.push(format!("total dimension {total_dim} exceeds cap {}; time average used and width not computed", cfg.limits.total_dim_cap));
        let summary = TimeAverageSummary { rho: avg.rho.matrix.clone(), convergence: avg.convergence, samples: avg.samples };
        let source = match opts.width_fallback {
            Some((n, _)) => WidthSource::Fallback { n_sites: n },
            None => WidthSource::Unavailable,
        };
        (AverageMethod::TimeAverage, avg.rho.matrix, avg.f, None, source, None, Some(summary))
    };
    if let Some(ta) = &ta {
        if !ta.convergence.converged {
            warnings.push(format!(
                "time average not converged: split-window difference {:e} > {:e}",
                ta.convergence.max_rho_difference, ta.convergence.tolerance
            ));
        }
    }

    let w = match (&width, &width_source) {
        (Some(r), _) => r.w_eps_max,
        (None, WidthSource::Fallback { .. }) => opts.width_fallback.unwrap().1,
        _ => 0.0,
    };
    let region = effective_region(&shell, spec.q_s, w)?;
    let residual = stationarity_residual(&rho, &f, &hs, &couplings);

    let (condition, prediction) = if terms.len() == 1 {
        let term = &terms[0];
        let profile = observable_profile(env, &term.env, &shell, PairRule::BothInShell, cfg.analysis.window_width)?;
        match delta_h_ratio(&profile.curve, &profile.elements, shell.e0, region.delta_e) {
            Ok(cond) => {
                let inputs = PredictionInputs {
                    h_s: hs.clone(),
                    qubit_energies: qubit_energies(&coupling),
                    h_is: term.qubit.scale_real(term.strength),
                    h0: cond.h0,
                    h1: h1_weighted(&env.eig, &term.env, &state.coefficients)?,
                    c0: [c0[0], c0[1]],
                };
                let ratio = (width_source != WidthSource::Unavailable).then_some(cond.ratio);
                (Some(cond), Some(prediction_report(&inputs, spec.lambda, &rho, ratio)?))
            }
            Err(e) => {
                warnings.push(format!("condition ratio unavailable: {e}"));
                (None, None)
            }
        }
    } else {
        warnings.push("closed-form predictions need a single interaction term".into());
        (None, None)
    };

    let result = PointResult {
        spec: spec.clone(),
        total_dim,
        shell,
        shell_levels: state.support.len(),
        method,
        rho,
        f,
        stationarity_residual: residual,
        time_average: ta,
        width,
        width_source,
        region,
        condition,
        participation: l0,
        prediction,
        warnings,
    };
    Ok((result, trajectory))
}

/// `λ_h` and `λ_c` for one `(N, q_s, interaction)` series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaRow {
    pub n_sites: usize,
    pub q_s: f64,
    pub interaction: String,
    pub lambda_h: Crossing,
    pub lambda_c: Crossing,
    pub points: usize,
}

pub fn lambda_table(results: &[PointResult], eps_h: f64, eps_c: f64) -> Result<Vec<LambdaRow>, CliError> {
    let mut keys: Vec<(usize, f64, String)> = Vec::new();
    for r in results {
        let k = (r.spec.n_sites, r.spec.q_s, r.spec.interaction.label());
        if !keys.contains(&k) {
            keys.push(k);
        }
    }
    let mut rows = Vec::new();
    for (n, q, label) in keys {
        let mut series: Vec<&PointResult> =
            results.iter().filter(|r| r.spec.n_sites == n && r.spec.q_s == q && r.spec.interaction.label() == label).collect();
        series.sort_by(|a, b| a.spec.lambda.total_cmp(&b.spec.lambda));
        series.dedup_by(|a, b| a.spec.lambda == b.spec.lambda);
        let reports: Vec<PredictionReport> = series.iter().filter_map(|r| r.prediction).collect();
        let ratios: Vec<(f64, f64)> = reports.iter().filter_map(|p| p.ratio_delta_h.map(|x| (p.lambda, x))).collect();
        rows.push(LambdaRow {
            n_sites: n,
            q_s: q,
            interaction: label,
            lambda_h: lambda_h_scan(&ratios, eps_h)?,
            lambda_c: lambda_c_scan(&reports, eps_c)?,
            points: series.len(),
        });
    }
    Ok(rows)
}

/// Applies `f` to every item on up to `workers` threads, preserving order.
pub fn parallel_map<T: Sync, R: Send>(items: &[T], workers: usize, f: impl Fn(&T) -> R + Sync) -> Vec<R> {
    let workers = workers.clamp(1, items.len().max(1));
    if workers == 1 {
        return items.iter().map(f).collect();
    }
    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<R>>> = Mutex::new((0..items.len()).map(|_| None).collect());
    std::thread::scope(|s| {
        for _ in 0..workers {
            s.spawn(|| loop {
                let k = next.fetch_add(1, Ordering::Relaxed);
                if k >= items.len() {
                    break;
                }
                let r = f(&items[k]);
                slots.lock().unwrap()[k] = Some(r);
            });
        }
    });
    slots.into_inner().unwrap().into_iter().map(|r| r.expect("every slot filled")).collect()
}
