//! Subcommand implementations. Every command writes into a run directory and
//! keeps a manifest there; finished tasks are skipped on rerun.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::Mutex;
use std::time::Instant;

use ethlab::dynamics::{build_initial_state, sample_shell_state, ShellSpec};
use ethlab::eigensolver::{eigh_sparse, spacing_statistics_with, wigner_dyson_distance, wigner_surmise, SpacingOptions, POISSON_MEAN_R};
use ethlab::ef::{effective_region, fluctuation_bound, participation, w_max, EfWidthReport, EffectiveRegion, UncoupledBasis};
use ethlab::eth::{
    delta_h_ratio, fluctuation_stats, g2_max, g_profile, log_slope, observable_in_eigenbasis, ConditionRatio, FluctuationStats, GPoint,
    HPoint, PairRule,
};
use ethlab::lattice::{assemble_total, build_interaction, build_qubit_hamiltonian, local_observable, qubit_energies, Axis};
use serde::{Deserialize, Serialize};

use crate::cache::EigenCache;
use crate::config::ExperimentConfig;
use crate::error::CliError;
use crate::experiment::{
    lambda_table, observable_profile, parallel_map, run_point, trajectory_csv, Environment, LambdaRow, PointOptions, PointResult, PointSpec,
};
use crate::manifest::{ArtifactWriter, RunManifest, TaskRecord, TaskStatus};

/// Mean gap ratio of the Gaussian orthogonal ensemble.
pub const GOE_MEAN_R: f64 = 0.5307;

pub struct RunContext {
    pub config: ExperimentConfig,
    pub out: PathBuf,
    pub workers: usize,
    pub cache: EigenCache,
}

impl RunContext {
    pub fn new(config: ExperimentConfig, out: Option<PathBuf>, workers: usize, cache: EigenCache) -> Self {
        let out = out.unwrap_or_else(|| config.output_dir.clone());
        Self { config, out, workers: workers.max(1), cache }
    }

    fn check_env_cap(&self, n: usize) -> Result<(), CliError> {
        let dim = 1usize << n;
        let cap = self.config.limits.env_dim_cap;
        if dim > cap {
            let mb = (dim * dim * 8 * 2) as f64 / 1e6;
            return Err(CliError::Config(format!(
                "environment dimension {dim} (N = {n}) exceeds limits.env_dim_cap = {cap}; a full decomposition needs about {mb:.0} MB. \
                 Lower N in sweep.n_grid or raise limits.env_dim_cap"
            )));
        }
        Ok(())
    }

    fn environment(&self, n: usize) -> Result<Environment, CliError> {
        self.check_env_cap(n)?;
        Environment::build(&self.config.chain_for(n), &self.cache)
    }
}

/// Runs `body` unless the task is already complete, then records it.
fn run_task(
    manifest: &Mutex<RunManifest>,
    dir: &Path,
    name: &str,
    body: impl FnOnce(&mut ArtifactWriter<'_>, &mut Vec<String>) -> Result<(), CliError>,
) -> Result<bool, CliError> {
    if manifest.lock().unwrap().is_complete(name, dir) {
        return Ok(false);
    }
    let start = Instant::now();
    let mut writer = ArtifactWriter::new(dir);
    let mut warnings = Vec::new();
    let result = body(&mut writer, &mut warnings);
    for w in &warnings {
        eprintln!("warning: {name}: {w}");
    }
    let status = match &result {
        Ok(()) => TaskStatus::Done,
        Err(e) => TaskStatus::Failed { error: e.to_string() },
    };
    let mut m = manifest.lock().unwrap();
    m.record(name, TaskRecord { status, artifacts: writer.artifacts, warnings, wall_clock_s: start.elapsed().as_secs_f64() });
    m.save(dir)?;
    result.map(|_| true)
}

fn record_skip(manifest: &Mutex<RunManifest>, dir: &Path, name: &str, note: String) -> Result<(), CliError> {
    let mut m = manifest.lock().unwrap();
    m.record(name, TaskRecord { status: TaskStatus::Skipped { note }, artifacts: Vec::new(), warnings: Vec::new(), wall_clock_s: 0.0 });
    m.save(dir)
}

fn open_manifest(ctx: &RunContext, command: &str) -> Result<Mutex<RunManifest>, CliError> {
    fs::create_dir_all(&ctx.out).map_err(CliError::io(ctx.out.display().to_string()))?;
    Ok(Mutex::new(RunManifest::resume(&ctx.out, command, &ctx.config.hash())?))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(CliError::io(path.display().to_string()))?;
    Ok(serde_json::from_str(&text)?)
}

// ---------------------------------------------------------------------------
// spectrum

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumSummary {
    pub n_sites: usize,
    pub dim: usize,
    pub n_levels: usize,
    pub window: (f64, f64),
    pub mean_r: f64,
    pub wigner_dyson_distance: f64,
    pub poisson_mean_r: f64,
    pub goe_mean_r: f64,
}

pub fn cmd_spectrum(ctx: &RunContext) -> Result<Vec<SpectrumSummary>, CliError> {
    let manifest = open_manifest(ctx, "spectrum")?;
    let mut out = Vec::new();
    for &n in &ctx.config.sweep.n_grid {
        let json = format!("spectrum_N{n}.json");
        run_task(&manifest, &ctx.out, &format!("spectrum_N{n}"), |w, _| {
            let env = ctx.environment(n)?;
            let energies = env.eig.energies();
            let opts = SpacingOptions::default();
            let stats = spacing_statistics_with(energies, &opts).map_err(|e| CliError::Numerical(format!("N = {n}: {e}")))?;
            let mut csv = String::from("# ethlab energies v1\nindex,energy\n");
            for (k, e) in energies.iter().enumerate() {
                csv.push_str(&format!("{k},{e:.17e}\n"));
            }
            w.write(&format!("energies_N{n}.csv"), csv.as_bytes())?;
            let mut hist = String::from("# ethlab spacing histogram v1\ns_lo,s_hi,density,wigner_dyson\n");
            for (k, d) in stats.densities.iter().enumerate() {
                let (lo, hi) = (stats.bin_edges[k], stats.bin_edges[k + 1]);
                hist.push_str(&format!("{lo},{hi},{d:e},{:e}\n", wigner_surmise(0.5 * (lo + hi))));
            }
            w.write(&format!("spacing_N{n}.csv"), hist.as_bytes())?;
            let summary = SpectrumSummary {
                n_sites: n,
                dim: energies.len(),
                n_levels: stats.n_levels,
                window: stats.window,
                mean_r: stats.mean_r,
                wigner_dyson_distance: wigner_dyson_distance(&stats),
                poisson_mean_r: POISSON_MEAN_R,
                goe_mean_r: GOE_MEAN_R,
            };
            w.json(&json, &summary)
        })?;
        out.push(read_json(&ctx.out.join(&json))?);
    }
    Ok(out)
}

// ---------------------------------------------------------------------------
// eth-check

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AxisReport {
    pub axis: Axis,
    pub site: usize,
    pub fluctuations: Option<FluctuationStats>,
    pub g2_max: Option<f64>,
    /// Slope of `ln |f|²` against `ω` over `[0, omega_max]`.
    pub g_log_slope: Option<f64>,
    pub curve_points: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionEntry {
    pub q_s: f64,
    pub e0: f64,
    pub delta_e: f64,
    pub condition: Option<ConditionRatio>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EthReport {
    pub n_sites: usize,
    pub eth_shell: ShellSpec,
    pub axes: Vec<AxisReport>,
    /// `|Δh/h0|` of the coupled observable at `λ = 0`, where `w^ε_max = 0`.
    pub conditions: Vec<ConditionEntry>,
}

fn curve_csv(curve: &[HPoint]) -> String {
    let mut s = String::from("# ethlab h curve v1\ne_center,h,count\n");
    for p in curve {
        s.push_str(&format!("{:e},{:e},{}\n", p.e_center, p.h, p.count));
    }
    s
}

fn g_csv(profile: &[GPoint]) -> String {
    let mut s = String::from("# ethlab off-diagonal profile v1\nomega_center,mean_sq,count\n");
    for p in profile {
        s.push_str(&format!("{:e},{:e},{}\n", p.omega_center, p.mean_sq, p.count));
    }
    s
}

pub fn axis_name(axis: Axis) -> &'static str {
    match axis {
        Axis::X => "x",
        Axis::Z => "z",
    }
}

/// ETH statistics of `S^axis_site` for one environment.
pub fn eth_report(cfg: &ExperimentConfig, env: &Environment, w: Option<&mut ArtifactWriter<'_>>, warnings: &mut Vec<String>) -> Result<EthReport, CliError> {
    let n = env.n_sites();
    let a = &cfg.analysis;
    let site = cfg.coupling.coupling_site;
    let mut writer = w;
    let mut axes = Vec::new();
    let mut conditions = Vec::new();
    for &axis in &a.eth_axes {
        let op = local_observable(site, axis, n)?;
        let profile = observable_profile(env, &op, &a.eth_shell, PairRule::BothInShell, a.window_width)?;
        let fluctuations = match fluctuation_stats(&profile.elements, &a.eth_shell, a.min_shell_levels) {
            Ok(f) => Some(f),
            Err(e) => {
                warnings.push(format!("N = {n}, axis {}: {e}", axis_name(axis)));
                None
            }
        };
        let wide = observable_in_eigenbasis(&env.eig, &op, &a.eth_shell, PairRule::MeanInShell { omega_max: a.omega_max })?;
        let g = g_profile(&wide, &a.eth_shell, a.omega_bin)?;
        if let Some(w) = writer.as_deref_mut() {
            w.write(&format!("h_curve_N{n}_{}.csv", axis_name(axis)), curve_csv(&profile.curve).as_bytes())?;
            w.write(&format!("g_profile_N{n}_{}.csv", axis_name(axis)), g_csv(&g).as_bytes())?;
        }
        axes.push(AxisReport {
            axis,
            site,
            fluctuations,
            g2_max: g2_max(&g, a.g2_min_count),
            g_log_slope: log_slope(&g, 0.0, a.omega_max),
            curve_points: profile.curve.len(),
        });
        if axis == Axis::X {
            let shell = cfg.shell.shell_for(n)?;
            for &q in &cfg.sweep.q_s {
                let region = effective_region(&shell, q, 0.0)?;
                let condition = match delta_h_ratio(&profile.curve, &profile.elements, shell.e0, region.delta_e) {
                    Ok(c) => Some(c),
                    Err(e) => {
                        warnings.push(format!("N = {n}, q_s = {q}: {e}"));
                        None
                    }
                };
                conditions.push(ConditionEntry { q_s: q, e0: shell.e0, delta_e: region.delta_e, condition });
            }
        }
    }
    Ok(EthReport { n_sites: n, eth_shell: a.eth_shell, axes, conditions })
}

pub fn cmd_eth_check(ctx: &RunContext) -> Result<Vec<EthReport>, CliError> {
    let manifest = open_manifest(ctx, "eth-check")?;
    let mut reports = Vec::new();
    for &n in &ctx.config.sweep.n_grid {
        let json = format!("eth_N{n}.json");
        run_task(&manifest, &ctx.out, &format!("eth_N{n}"), |w, warnings| {
            let env = ctx.environment(n)?;
            let report = eth_report(&ctx.config, &env, Some(w), warnings)?;
            w.json(&json, &report)
        })?;
        reports.push(read_json::<EthReport>(&ctx.out.join(&json))?);
    }
    run_task(&manifest, &ctx.out, "eth_summary", |w, _| {
        let mut csv = String::from("# ethlab fluctuations v1\nn_sites,axis,mu,sigma_d,sigma_nd,gauss_stat_d,gauss_stat_nd,n_levels,n_pairs\n");
        let mut cond = String::from("# ethlab condition ratio v1\nn_sites,q_s,e0,delta_e,h0,delta_h,ratio,raw_delta_h\n");
        for r in &reports {
            for a in &r.axes {
                if let Some(f) = &a.fluctuations {
                    csv.push_str(&format!(
                        "{},{},{:e},{:e},{:e},{:e},{:e},{},{}\n",
                        r.n_sites,
                        axis_name(a.axis),
                        f.mu,
                        f.sigma_d,
                        f.sigma_nd,
                        f.gauss_stat_d,
                        f.gauss_stat_nd,
                        f.n_levels,
                        f.n_pairs
                    ));
                }
            }
            for c in &r.conditions {
                if let Some(x) = &c.condition {
                    cond.push_str(&format!("{},{},{},{},{:e},{:e},{:e},{:e}\n", r.n_sites, c.q_s, c.e0, c.delta_e, x.h0, x.delta_h, x.ratio, x.raw_delta_h));
                }
            }
        }
        w.write("fluctuations_vs_n.csv", csv.as_bytes())?;
        w.write("condition_ratio.csv", cond.as_bytes())
    })?;
    Ok(reports)
}

// ---------------------------------------------------------------------------
// evolve and sweep

fn write_point(w: &mut ArtifactWriter<'_>, result: &PointResult, trajectory: &[crate::experiment::TrajectoryRow]) -> Result<(), CliError> {
    let label = result.spec.label();
    if !trajectory.is_empty() {
        w.write(&format!("trajectory_{label}.csv"), trajectory_csv(trajectory).as_bytes())?;
    }
    w.json(&format!("average_{label}.json"), result)?;
    w.json(&format!("prediction_{label}.json"), &result.prediction)
}

fn point_specs(cfg: &ExperimentConfig, lambdas: &[f64], seed: u64) -> Vec<PointSpec> {
    let mut specs = Vec::new();
    for &n in &cfg.sweep.n_grid {
        for &q in &cfg.sweep.q_s {
            for kind in &cfg.sweep.interactions {
                for &lambda in lambdas {
                    specs.push(PointSpec { n_sites: n, q_s: q, interaction: kind.clone(), lambda, seed });
                }
            }
        }
    }
    specs
}

pub fn cmd_evolve(ctx: &RunContext, lambda: f64, seed: u64) -> Result<Vec<PointResult>, CliError> {
    if !lambda.is_finite() {
        return Err(CliError::Config(format!("lambda must be finite, got {lambda}")));
    }
    let manifest = open_manifest(ctx, "evolve")?;
    let mut results = Vec::new();
    for &n in &ctx.config.sweep.n_grid {
        let env = ctx.environment(n)?;
        let specs: Vec<PointSpec> = point_specs(&ctx.config, &[lambda], seed).into_iter().filter(|s| s.n_sites == n).collect();
        for spec in specs {
            let label = spec.label();
            run_task(&manifest, &ctx.out, &format!("evolve_{label}"), |w, warnings| {
                let opts = PointOptions { trajectory: true, width: true, width_fallback: None };
                let (result, trajectory) = run_point(&ctx.config, &env, &spec, &opts)?;
                warnings.extend(result.warnings.iter().cloned());
                write_point(w, &result, &trajectory)
            })?;
            results.push(read_json(&ctx.out.join(format!("average_{label}.json")))?);
        }
    }
    Ok(results)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepSummary {
    pub points: Vec<PointResult>,
    pub table: Vec<LambdaRow>,
}

pub fn prediction_csv(points: &[&PointResult]) -> String {
    let mut s = String::from("# ethlab predictions v1\nlambda,rho12_measured_abs,rho12_tls_abs,rho12_weak_abs,rel_error_tls,ratio_delta_h,w_eps_max\n");
    for p in points {
        let Some(r) = &p.prediction else { continue };
        let opt = |x: Option<f64>| x.map_or(String::from("nan"), |v| format!("{v:e}"));
        s.push_str(&format!(
            "{},{:e},{},{:e},{},{},{}\n",
            r.lambda,
            r.rho12_measured.norm(),
            opt(r.rho12_tls.map(|z| z.norm())),
            r.rho12_weak.norm(),
            opt(r.rel_error_tls),
            opt(r.ratio_delta_h),
            opt(p.w_eps_max()),
        ));
    }
    s
}

pub fn cmd_sweep(ctx: &RunContext, seed: u64) -> Result<SweepSummary, CliError> {
    let cfg = &ctx.config;
    let manifest = open_manifest(ctx, "sweep")?;
    let specs = point_specs(cfg, &cfg.sweep.lambda_grid, seed);
    let within = |s: &PointSpec| (2usize << s.n_sites) <= cfg.limits.total_dim_cap;
    let record = cfg.dynamics.record_trajectory;

    let mut envs = BTreeMap::new();
    for &n in &cfg.sweep.n_grid {
        envs.insert(n, ctx.environment(n)?);
    }
    let point_path = |s: &PointSpec| ctx.out.join(format!("average_{}.json", s.label()));
    let run_one = |spec: &PointSpec, fallback: Option<(usize, f64)>| -> Result<PointResult, CliError> {
        let label = spec.label();
        if !within(spec) {
            record_skip(
                &manifest,
                &ctx.out,
                &format!("ef_width_{label}"),
                format!("total dimension {} exceeds limits.total_dim_cap = {}", 2usize << spec.n_sites, cfg.limits.total_dim_cap),
            )?;
        }
        run_task(&manifest, &ctx.out, &format!("point_{label}"), |w, warnings| {
            let opts = PointOptions { trajectory: record, width: true, width_fallback: fallback };
            let (result, trajectory) = run_point(cfg, &envs[&spec.n_sites], spec, &opts)?;
            warnings.extend(result.warnings.iter().cloned());
            write_point(w, &result, &trajectory)
        })?;
        read_json(&point_path(spec))
    };

    let (small, large): (Vec<PointSpec>, Vec<PointSpec>) = specs.iter().cloned().partition(|s| within(s));
    let mut results: Vec<PointResult> =
        parallel_map(&small, ctx.workers, |s| run_one(s, None)).into_iter().collect::<Result<_, _>>()?;
    let fallback_for = |s: &PointSpec| -> Option<(usize, f64)> {
        results
            .iter()
            .filter(|r| r.spec.q_s == s.q_s && r.spec.interaction == s.interaction && r.spec.lambda == s.lambda && r.spec.n_sites < s.n_sites)
            .max_by_key(|r| r.spec.n_sites)
            .and_then(|r| r.w_eps_max().map(|w| (r.spec.n_sites, w)))
    };
    let large_with_fallback: Vec<(PointSpec, Option<(usize, f64)>)> = large.iter().map(|s| (s.clone(), fallback_for(s))).collect();
    let large_results: Vec<PointResult> =
        parallel_map(&large_with_fallback, ctx.workers, |(s, fb)| run_one(s, *fb)).into_iter().collect::<Result<_, _>>()?;
    results.extend(large_results);

    let table = lambda_table(&results, cfg.analysis.eps_h, cfg.analysis.eps_c)?;
    run_task(&manifest, &ctx.out, "lambda_table", |w, _| {
        w.json("table.json", &table)?;
        w.write("table.csv", table_csv(&table).as_bytes())?;
        for row in &table {
            let series: Vec<&PointResult> = results
                .iter()
                .filter(|r| r.spec.n_sites == row.n_sites && r.spec.q_s == row.q_s && r.spec.interaction.label() == row.interaction)
                .collect();
            w.write(&format!("predictions_N{}_q{}_{}.csv", row.n_sites, row.q_s, row.interaction), prediction_csv(&series).as_bytes())?;
        }
        Ok(())
    })?;
    Ok(SweepSummary { points: results, table })
}

pub fn crossing_text(c: &ethlab::predictions::Crossing) -> String {
    use ethlab::predictions::Crossing;
    match c {
        Crossing::At { lambda, bracket } => format!("{lambda:.4} [{}, {}]", bracket.0, bracket.1),
        Crossing::StartsAbove => "None (starts above)".into(),
        Crossing::NeverExceeds => "None (never exceeds)".into(),
    }
}

fn table_csv(table: &[LambdaRow]) -> String {
    let mut s = String::from("# ethlab lambda table v1\nn_sites,q_s,interaction,lambda_h,lambda_c\n");
    for r in table {
        let v = |c: &ethlab::predictions::Crossing| c.value().map_or(String::from("None"), |x| format!("{x:e}"));
        s.push_str(&format!("{},{},{},{},{}\n", r.n_sites, r.q_s, r.interaction, v(&r.lambda_h), v(&r.lambda_c)));
    }
    s
}

// ---------------------------------------------------------------------------
// ef-width

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WidthResult {
    pub spec: PointSpec,
    pub report: EfWidthReport,
    pub region: EffectiveRegion,
    pub participation: f64,
    pub g2_max: Option<f64>,
    pub fluctuation_bound: Option<f64>,
}

/// `w^ε_max`, the effective region and the fluctuation bound for one point.
pub fn width_point(cfg: &ExperimentConfig, env: &Environment, spec: &PointSpec) -> Result<WidthResult, CliError> {
    let coupling = cfg.coupling_for(spec.q_s, &spec.interaction, spec.lambda);
    let terms = build_interaction(&coupling, &env.chain)?;
    let shell = cfg.shell.shell_for(spec.n_sites)?;
    let state = sample_shell_state(&env.eig, &shell, spec.seed)?;
    let psi0 = build_initial_state(&cfg.dynamics.c0(), &state.product_vector(&env.eig))?;
    let hs = build_qubit_hamiltonian(&coupling);
    let total_eig = eigh_sparse(&assemble_total(&hs, &env.hamiltonian, &terms, spec.lambda))?;
    let energies = qubit_energies(&coupling);
    let basis = UncoupledBasis { env: &env.eig, qubit_energies: &energies };
    let report = w_max(&total_eig, &basis, &psi0, cfg.analysis.epsilon)?;
    let region = effective_region(&shell, spec.q_s, report.w_eps_max)?;
    let l0 = participation(&total_eig, &psi0);
    let gamma = ShellSpec::new(shell.e0, region.delta_e)?;
    let omega_max = cfg.analysis.omega_max;
    let elements = observable_in_eigenbasis(&env.eig, &terms[0].env, &gamma, PairRule::MeanInShell { omega_max })?;
    let g2 = g2_max(&g_profile(&elements, &gamma, cfg.analysis.omega_bin)?, cfg.analysis.g2_min_count);
    let bound = g2.map(|g| fluctuation_bound(g, l0)).transpose()?;
    Ok(WidthResult { spec: spec.clone(), report, region, participation: l0, g2_max: g2, fluctuation_bound: bound })
}

pub fn cmd_ef_width(ctx: &RunContext, seed: u64) -> Result<Vec<WidthResult>, CliError> {
    let cfg = &ctx.config;
    let manifest = open_manifest(ctx, "ef-width")?;
    let mut results = Vec::new();
    for &n in &cfg.sweep.n_grid {
        let specs: Vec<PointSpec> = point_specs(cfg, &cfg.sweep.lambda_grid, seed).into_iter().filter(|s| s.n_sites == n).collect();
        if (2usize << n) > cfg.limits.total_dim_cap {
            for s in &specs {
                record_skip(&manifest, &ctx.out, &format!("ef_width_{}", s.label()), format!("total dimension {} exceeds limits.total_dim_cap", 2usize << n))?;
            }
            continue;
        }
        let env = ctx.environment(n)?;
        let paths: Vec<PathBuf> = specs.iter().map(|s| ctx.out.join(format!("ef_{}.json", s.label()))).collect();
        let done: Vec<Result<bool, CliError>> = parallel_map(&specs, ctx.workers, |s| {
            run_task(&manifest, &ctx.out, &format!("ef_width_{}", s.label()), |w, _| {
                let r = width_point(cfg, &env, s)?;
                w.json(&format!("ef_{}.json", s.label()), &r)
            })
        });
        for (d, p) in done.into_iter().zip(&paths) {
            d?;
            results.push(read_json::<WidthResult>(p)?);
        }
    }
    run_task(&manifest, &ctx.out, "ef_width_summary", |w, _| {
        let mut s = String::from("# ethlab widths v1\nn_sites,q_s,interaction,lambda,w_eps_max,delta_e,participation,g2_max,fluctuation_bound\n");
        for r in &results {
            let opt = |x: Option<f64>| x.map_or(String::from("nan"), |v| format!("{v:e}"));
            s.push_str(&format!(
                "{},{},{},{},{:e},{:e},{:e},{},{}\n",
                r.spec.n_sites,
                r.spec.q_s,
                r.spec.interaction.label(),
                r.spec.lambda,
                r.report.w_eps_max,
                r.region.delta_e,
                r.participation,
                opt(r.g2_max),
                opt(r.fluctuation_bound)
            ));
        }
        w.write("widths.csv", s.as_bytes())
    })?;
    Ok(results)
}

// ---------------------------------------------------------------------------
// report

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunEntry {
    pub dir: String,
    pub command: String,
    pub config_hash: String,
    pub code_version: String,
    pub tasks: usize,
    pub failed: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub runs: Vec<RunEntry>,
    pub warnings: Vec<String>,
    pub table: Vec<LambdaRow>,
}

/// Manifests in `root` and its immediate subdirectories.
fn manifest_files(root: &Path) -> Result<Vec<PathBuf>, CliError> {
    if !root.is_dir() {
        return Err(CliError::Config(format!("{} is not a directory", root.display())));
    }
    let mut files = RunManifest::find(root);
    let mut subdirs: Vec<PathBuf> = fs::read_dir(root)
        .map_err(CliError::io(root.display().to_string()))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.is_dir())
        .collect();
    subdirs.sort();
    for d in subdirs {
        files.extend(RunManifest::find(&d));
    }
    Ok(files)
}

pub fn build_report(root: &Path) -> Result<Report, CliError> {
    let mut runs = Vec::new();
    let mut warnings = Vec::new();
    let mut table = Vec::new();
    for file in manifest_files(root)? {
        let dir = file.parent().unwrap_or(root).to_path_buf();
        let Some(m) = RunManifest::load_file(&file)? else { continue };
        let failed = m.tasks.values().filter(|t| matches!(t.status, TaskStatus::Failed { .. })).count();
        runs.push(RunEntry {
            dir: dir.display().to_string(),
            command: m.command.clone(),
            config_hash: m.config_hash.clone(),
            code_version: m.code_version.clone(),
            tasks: m.tasks.len(),
            failed,
        });
        let path = dir.join("table.json");
        if m.command == "sweep" && path.exists() {
            table.extend(read_json::<Vec<LambdaRow>>(&path)?);
        }
    }
    if runs.is_empty() {
        return Err(CliError::Config(format!("no run manifests under {}", root.display())));
    }
    let first = &runs[0];
    for r in &runs[1..] {
        if r.code_version != first.code_version {
            warnings.push(format!("mixed code versions: {} ({}) vs {} ({})", first.code_version, first.dir, r.code_version, r.dir));
        }
        if r.config_hash != first.config_hash {
            warnings.push(format!("mixed config hashes: {} ({}) vs {} ({})", first.config_hash, first.dir, r.config_hash, r.dir));
        }
    }
    table.sort_by(|a, b| (a.n_sites, &a.interaction).cmp(&(b.n_sites, &b.interaction)).then(a.q_s.total_cmp(&b.q_s)));
    Ok(Report { runs, warnings, table })
}

/// Human-readable table: one row per `(N, interaction)`, `λ_h` and `λ_c`
/// columns per `q_s`.
pub fn report_table(report: &Report) -> String {
    let mut qs: Vec<f64> = report.table.iter().map(|r| r.q_s).collect();
    qs.sort_by(f64::total_cmp);
    qs.dedup();
    let mut header = format!("{:>4}  {:<12}", "N", "interaction");
    for q in &qs {
        header.push_str(&format!("  {:<28}  {:<28}", format!("lambda_h(q_s={q})"), format!("lambda_c(q_s={q})")));
    }
    let mut lines = vec![header];
    let mut keys: Vec<(usize, String)> = report.table.iter().map(|r| (r.n_sites, r.interaction.clone())).collect();
    keys.dedup();
    for (n, kind) in keys {
        let mut line = format!("{n:>4}  {kind:<12}");
        for q in &qs {
            match report.table.iter().find(|r| r.n_sites == n && r.interaction == kind && r.q_s == *q) {
                Some(r) => line.push_str(&format!("  {:<28}  {:<28}", crossing_text(&r.lambda_h), crossing_text(&r.lambda_c))),
                None => line.push_str(&format!("  {:<28}  {:<28}", "-", "-")),
            }
        }
        lines.push(line);
    }
    lines.join("\n") + "\n"
}

pub fn cmd_report(root: &Path) -> Result<Report, CliError> {
    let report = build_report(root)?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    let mut bytes = serde_json::to_vec_pretty(&report)?;
    bytes.push(b'\n');
    let json = root.join("report.json");
    fs::write(&json, bytes).map_err(CliError::io(json.display().to_string()))?;
    let text = report_table(&report);
    let txt = root.join("report.txt");
    fs::write(&txt, &text).map_err(CliError::io(txt.display().to_string()))?;
    print!("{text}");
    Ok(report)
}
