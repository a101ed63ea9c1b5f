use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use ethlab_cli::cache::EigenCache;
use ethlab_cli::commands::{self, RunContext};
use ethlab_cli::{CliError, ExperimentConfig};

#[derive(Parser)]
#[command(name = "ethlab", version, about = "Qubit + defect Ising chain experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// JSON experiment config; defaults apply when omitted
    #[arg(long)]
    config: Option<PathBuf>,
    /// Run directory; defaults to the config's output_dir
    #[arg(long)]
    out: Option<PathBuf>,
    /// Seed of the initial environment state; overrides dynamics.seed
    #[arg(long)]
    seed: Option<u64>,
    /// Parallel workers for grid points
    #[arg(long, default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Level statistics of the environment for every N in the grid
    Spectrum(Common),
    /// Diagonal and off-diagonal statistics of local observables
    EthCheck(Common),
    /// One trajectory and its long-time average per (N, q_s, interaction)
    Evolve {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        lambda: f64,
    },
    /// Full lambda grid with predictions and the lambda_h / lambda_c table
    Sweep(Common),
    /// Eigenfunction main-body widths over the lambda grid
    EfWidth(Common),
    /// Aggregate the manifests and tables under a directory
    Report {
        #[command(flatten)]
        common: Common,
        /// Directory to scan; defaults to --out
        run_dir: Option<PathBuf>,
    },
}

fn context(common: &Common) -> Result<(RunContext, u64), CliError> {
    let config = match &common.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => ExperimentConfig::default(),
    };
    let seed = common.seed.unwrap_or(config.dynamics.seed);
    Ok((RunContext::new(config, common.out.clone(), common.workers, EigenCache::from_env()), seed))
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Spectrum(c) => {
            let (ctx, _) = context(&c)?;
            for s in commands::cmd_spectrum(&ctx)? {
                println!("N = {:2}  <r> = {:.4}  WD L1 = {:.4}  levels = {}", s.n_sites, s.mean_r, s.wigner_dyson_distance, s.n_levels);
            }
        }
        Command::EthCheck(c) => {
            let (ctx, _) = context(&c)?;
            for r in commands::cmd_eth_check(&ctx)? {
                for a in &r.axes {
                    if let Some(f) = &a.fluctuations {
                        println!(
                            "N = {:2}  S^{}_{}  sigma_d = {:.4e}  sigma_nd = {:.4e}  levels = {}",
                            r.n_sites,
                            commands::axis_name(a.axis),
                            a.site,
                            f.sigma_d,
                            f.sigma_nd,
                            f.n_levels
                        );
                    }
                }
                for e in &r.conditions {
                    if let Some(x) = &e.condition {
                        println!("N = {:2}  q_s = {}  |dh/h0| = {:.4}", r.n_sites, e.q_s, x.ratio);
                    }
                }
            }
        }
        Command::Evolve { common, lambda } => {
            let (ctx, seed) = context(&common)?;
            for r in commands::cmd_evolve(&ctx, lambda, seed)? {
                let rho12 = r.rho[(0, 1)];
                print!("{}  rho12 = {:.6e}{:+.6e}i", r.spec.label(), rho12.re, rho12.im);
                if let Some(e) = r.prediction.and_then(|p| p.rel_error_tls) {
                    print!("  rel_error_tls = {e:.4}");
                }
                println!();
            }
        }
        Command::Sweep(c) => {
            let (ctx, seed) = context(&c)?;
            let summary = commands::cmd_sweep(&ctx, seed)?;
            for row in &summary.table {
                println!(
                    "N = {:2}  q_s = {}  {}  lambda_h = {}  lambda_c = {}",
                    row.n_sites,
                    row.q_s,
                    row.interaction,
                    commands::crossing_text(&row.lambda_h),
                    commands::crossing_text(&row.lambda_c)
                );
            }
        }
        Command::EfWidth(c) => {
            let (ctx, seed) = context(&c)?;
            for r in commands::cmd_ef_width(&ctx, seed)? {
                println!("{}  w_max = {:.4e}  delta_e = {:.4}  L0 = {:.1}", r.spec.label(), r.report.w_eps_max, r.region.delta_e, r.participation);
            }
        }
        Command::Report { common, run_dir } => {
            let dir = match run_dir.or(common.out.clone()) {
                Some(d) => d,
                None => context(&common)?.0.out,
            };
            commands::cmd_report(&dir)?;
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
