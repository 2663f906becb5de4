use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use wncs::experiment::{parse_config, run_experiment, ExperimentError, RunConfig};
use wncs::simulator::{scenario_library, SimError};

/// Channel-scheduling experiments for wireless networked control.
#[derive(Parser)]
#[command(version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the sweep described by a JSON configuration.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Output directory, overriding the configuration.
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        seed: Option<u64>,
        /// Monte Carlo runs per parameter point.
        #[arg(long)]
        runs: Option<usize>,
        /// Write one trace CSV per run.
        #[arg(long)]
        emit_traces: bool,
    },
    /// List the built-in scenarios.
    ListScenarios,
    /// Check a configuration without running it.
    Validate {
        #[arg(long)]
        config: PathBuf,
    },
}

const EXIT_VALIDATION: u8 = 1;
const EXIT_SOLVER: u8 = 2;
const EXIT_IO: u8 = 3;

fn load(path: &Path) -> Result<RunConfig, ExitCode> {
    let text = std::fs::read_to_string(path).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_IO)
    })?;
    parse_config(&text).map_err(|e| {
        eprintln!("error: {}: {e}", path.display());
        ExitCode::from(EXIT_VALIDATION)
    })
}

fn configure_workers() {
    let Ok(value) = std::env::var("WNCS_WORKERS") else { return };
    match value.parse::<usize>() {
        Ok(n) if n > 0 => {
            if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
                eprintln!("warning: could not size the worker pool: {e}");
            }
        }
        _ => eprintln!("warning: ignoring WNCS_WORKERS={value:?}, expected a positive integer"),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListScenarios => {
            for info in scenario_library() {
                println!("{:<16} {}", info.name, info.description);
            }
            ExitCode::SUCCESS
        }
        Command::Validate { config } => match load(&config) {
            Ok(cfg) => {
                let points = cfg.a_values.len()
                    * cfg.capacities.len()
                    * cfg.horizons.len()
                    * cfg.strategies.len()
                    * cfg.loss_aware.len();
                println!("{}: valid, {points} parameter points", config.display());
                ExitCode::SUCCESS
            }
            Err(code) => code,
        },
        Command::Run { config, out, seed, runs, emit_traces } => {
            configure_workers();
            let mut cfg = match load(&config) {
                Ok(cfg) => cfg,
                Err(code) => return code,
            };
            cfg.out = out.unwrap_or(cfg.out);
            cfg.seed = seed.unwrap_or(cfg.seed);
            cfg.runs = runs.or(cfg.runs);
            cfg.emit_traces |= emit_traces;
            match run_experiment(&cfg) {
                Ok(rows) => {
                    for r in &rows {
                        eprintln!(
                            "{} {} N={} gamma={} a={}: J = {:.6} ± {:.6} ({:.0} ms)",
                            r.scenario, r.strategy, r.n, r.gamma, r.a, r.j_mean, r.j_stderr, r.wall_ms
                        );
                    }
                    println!("{}", cfg.out.join("results.csv").display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(match e {
                        ExperimentError::Config(_) => EXIT_VALIDATION,
                        ExperimentError::Simulation(SimError::InvalidScenario(_)) => EXIT_VALIDATION,
                        ExperimentError::Simulation(_) => EXIT_SOLVER,
                        ExperimentError::Io { .. } => EXIT_IO,
                    })
                }
            }
        }
    }
}
