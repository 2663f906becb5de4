//! Experiment orchestration: JSON configuration, parameter sweeps, and the
//! files they produce.
//!
//! An experiment directory holds
//! - `results.csv`, one row per parameter point with the columns of
//!   [`RESULT_COLUMNS`];
//! - `manifest.json`, with the configuration hash, seed, crate version and
//!   wall-clock timings;
//! - `traces/`, one CSV per Monte Carlo run when traces are requested.
//!
//! `results.csv` is a pure function of the configuration, so repeated runs
//! produce identical bytes. Timings live only in the manifest.

mod config;
mod trace_csv;

pub use config::{parse_config, ConfigError, RunConfig, ScenarioSpec};
pub use trace_csv::{emit_trace, read_trace, trace_records, TraceRecord};

use crate::simulator::{closed_loop_cost, monte_carlo, simulate_runs, MCStats, SimError};
use serde::Serialize;
use sha2::{Digest, Sha256};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::time::Instant;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Simulation(#[from] SimError),
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },
}

/// Column order of `results.csv`. Stable within a major version.
pub const RESULT_COLUMNS: [&str; 14] = [
    "scenario",
    "strategy",
    "loss_aware",
    "N",
    "gamma",
    "a",
    "seed",
    "runs",
    "steps",
    "J_mean",
    "J_stderr",
    "J_trace_mean",
    "grants",
    "r",
];

/// Aggregate of one parameter point.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub scenario: String,
    pub strategy: String,
    pub loss_aware: bool,
    pub n: usize,
    pub gamma: usize,
    pub a: f64,
    pub seed: u64,
    pub runs: usize,
    pub steps: usize,
    pub j_mean: f64,
    pub j_stderr: f64,
    pub j_trace_mean: f64,
    /// Mean grants per run of each agent.
    pub grants: Vec<f64>,
    /// Grant ratio of two-agent scenarios.
    pub r: Option<f64>,
    pub wall_ms: f64,
}

impl ResultRow {
    /// Fields in [`RESULT_COLUMNS`] order. Grants are `;`-separated; a
    /// missing or infinite ratio is written as an empty field.
    pub fn csv_fields(&self) -> Vec<String> {
        vec![
            self.scenario.clone(),
            self.strategy.clone(),
            self.loss_aware.to_string(),
            self.n.to_string(),
            self.gamma.to_string(),
            self.a.to_string(),
            self.seed.to_string(),
            self.runs.to_string(),
            self.steps.to_string(),
            self.j_mean.to_string(),
            self.j_stderr.to_string(),
            self.j_trace_mean.to_string(),
            self.grants.iter().map(f64::to_string).collect::<Vec<_>>().join(";"),
            self.r.filter(|r| r.is_finite()).map_or_else(String::new, |r| r.to_string()),
        ]
    }
}

#[derive(Debug, Serialize)]
struct Manifest<'a> {
    config_sha256: &'a str,
    seed: u64,
    version: &'static str,
    scenario: String,
    rows: usize,
    traces: bool,
    wall_ms: Vec<f64>,
    total_wall_ms: f64,
}

pub(crate) fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn io_error(path: &Path) -> impl Fn(std::io::Error) -> ExperimentError + '_ {
    move |source| ExperimentError::Io { path: path.to_path_buf(), source }
}

/// Runs the sweep of `cfg` and writes its artifacts to `cfg.out`.
///
/// Parameter points run one after another; the Monte Carlo runs of each
/// point use the rayon pool. Each row is flushed as soon as its point
/// completes, so a failing point leaves the finished rows on disk.
pub fn run_experiment(cfg: &RunConfig) -> Result<Vec<ResultRow>, ExperimentError> {
    cfg.validate()?;
    let started = Instant::now();
    fs::create_dir_all(&cfg.out).map_err(io_error(&cfg.out))?;
    let trace_dir = cfg.out.join("traces");
    if cfg.emit_traces {
        fs::create_dir_all(&trace_dir).map_err(io_error(&trace_dir))?;
    }

    let results_path = cfg.out.join("results.csv");
    let io = io_error(&results_path);
    let mut results = BufWriter::new(File::create(&results_path).map_err(&io)?);
    writeln!(results, "{}", RESULT_COLUMNS.join(",")).map_err(&io)?;
    results.flush().map_err(&io)?;

    let mut rows = Vec::new();
    for &a in &cfg.a_values {
        for &gamma in &cfg.capacities {
            for &n in &cfg.horizons {
                for &strategy in &cfg.strategies {
                    for &aware in &cfg.loss_aware {
                        let point = Instant::now();
                        let sc = cfg.scenario_at(a, gamma, n, strategy, aware)?;
                        let stats = if cfg.emit_traces {
                            let traces = simulate_runs(&sc)?;
                            for t in &traces {
                                let file = format!(
                                    "{}_{}_aware{}_N{}_g{}_a{}_run{}.csv",
                                    sc.name,
                                    strategy,
                                    u8::from(aware),
                                    n,
                                    gamma,
                                    a,
                                    t.run
                                );
                                emit_trace(t, &trace_dir.join(file))?;
                            }
                            let summaries: Vec<_> = traces.iter().map(|t| (closed_loop_cost(t), t.grants())).collect();
                            MCStats::from_summaries(&summaries)
                        } else {
                            monte_carlo(&sc)?
                        };
                        let row = ResultRow {
                            scenario: sc.name.clone(),
                            strategy: strategy.to_string(),
                            loss_aware: aware,
                            n,
                            gamma,
                            a,
                            seed: sc.seed,
                            runs: sc.runs,
                            steps: sc.steps,
                            j_mean: stats.j_mean,
                            j_stderr: stats.j_stderr,
                            j_trace_mean: stats.trace_cost_mean,
                            grants: stats.grants_mean,
                            r: stats.grant_ratio,
                            wall_ms: point.elapsed().as_secs_f64() * 1e3,
                        };
                        writeln!(results, "{}", csv_line(&row.csv_fields())).map_err(&io)?;
                        results.flush().map_err(&io)?;
                        rows.push(row);
                    }
                }
            }
        }
    }

    let manifest = Manifest {
        config_sha256: &cfg.hash,
        seed: cfg.seed,
        version: env!("CARGO_PKG_VERSION"),
        scenario: cfg.base_scenario(cfg.a_values[0])?.name,
        rows: rows.len(),
        traces: cfg.emit_traces,
        wall_ms: rows.iter().map(|r| r.wall_ms).collect(),
        total_wall_ms: started.elapsed().as_secs_f64() * 1e3,
    };
    let manifest_path = cfg.out.join("manifest.json");
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    fs::write(&manifest_path, text + "\n").map_err(io_error(&manifest_path))?;
    Ok(rows)
}

/// Joins fields with commas, quoting any that need it.
fn csv_line(fields: &[String]) -> String {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::Any(b'\n')).from_writer(Vec::new());
    w.write_record(fields).expect("writing to memory");
    let bytes = w.into_inner().expect("writing to memory");
    String::from_utf8(bytes).expect("fields are UTF-8").trim_end_matches('\n').to_string()
}
