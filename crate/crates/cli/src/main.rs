use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stiga_cli::config::ExperimentConfig;
use stiga_cli::experiments::{regression_slope, run_compare, run_convergence, run_solve, ConvergenceRow};
use stiga_cli::CliError;

#[derive(Parser)]
#[command(name = "stiga", version, about = "Space-time IgA monodomain solver")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Overrides `output.dir` of the configuration.
    #[arg(long, global = true)]
    output_dir: Option<PathBuf>,
    #[arg(short, long, global = true)]
    verbose: bool,
    /// Worker threads for assembly and the preconditioner.
    #[arg(long, global = true, default_value_t = 1)]
    threads: usize,
    /// Reserved; no default code path is randomized.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand)]
enum Command {
    /// Solve once with the configured method.
    Solve { config: PathBuf },
    /// Error table for the manufactured 1D solution.
    Convergence { config: PathBuf },
    /// Galerkin against SU on one discretization.
    Compare { config: PathBuf },
}

fn load(path: &Path, out: &Option<PathBuf>) -> Result<ExperimentConfig, CliError> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(dir) = out {
        cfg.output.dir = dir.clone();
    }
    cfg.resolve()
}

fn run(cli: Cli) -> Result<(), CliError> {
    rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads.max(1))
        .build_global()
        .map_err(|e| CliError::Config(e.to_string()))?;
    if let Some(seed) = cli.seed {
        log::debug!("seed {seed} ignored");
    }
    match &cli.command {
        Command::Solve { config } => {
            let cfg = load(config, &cli.output_dir)?;
            let r = run_solve(&cfg, &cfg.output.dir)?;
            println!(
                "{:?}: {} fixed-point iterations, {:.1} GMRES, {:.1} PCG on average, {:.2} s",
                r.method, r.iterations, r.average_gmres, r.average_pcg, r.wall_time
            );
            if let Some(o) = r.oscillation {
                println!("oscillation metric {o:.6e}");
            }
        }
        Command::Convergence { config } => {
            let cfg = load(config, &cli.output_dir)?;
            let rows = run_convergence(&cfg, &cfg.output.dir)?;
            println!("{:>6} {:>12} {:>14} {:>7}", "degree", "h", "error", "order");
            for r in &rows {
                let order = r.order.map_or("-".into(), |o| format!("{o:.2}"));
                println!("{:>6} {:>12.6e} {:>14.6e} {:>7}", r.degree, r.h, r.error, order);
            }
            for &p in &cfg.convergence.degrees {
                let of_p: Vec<&ConvergenceRow> = rows.iter().filter(|r| r.degree == p).collect();
                println!("degree {p}: fitted order {:.2}", regression_slope(&of_p));
            }
            if rows.iter().any(|r| r.failure.is_some()) {
                return Err(CliError::Unconverged("some levels did not converge".into()));
            }
        }
        Command::Compare { config } => {
            let cfg = load(config, &cli.output_dir)?;
            let r = run_compare(&cfg, &cfg.output.dir)?;
            println!(
                "{:>9} {:>6} {:>10} {:>10} {:>14} {:>10}",
                "method", "iters", "avg GMRES", "avg PCG", "oscillation", "time [s]"
            );
            for m in [&r.galerkin, &r.su] {
                let osc = m.oscillation.map_or("-".into(), |o| format!("{o:.4e}"));
                println!(
                    "{:>9} {:>6} {:>10.1} {:>10.1} {:>14} {:>10.2}",
                    format!("{:?}", m.method),
                    m.iterations,
                    m.average_gmres,
                    m.average_pcg,
                    osc,
                    m.wall_time
                );
            }
            if let Some(ratio) = r.oscillation_ratio() {
                println!("SU / Galerkin oscillation {ratio:.3e}");
            }
            if !(r.galerkin.converged && r.su.converged) {
                return Err(CliError::Unconverged("a method did not converge".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
