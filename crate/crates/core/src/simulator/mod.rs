//! Closed-loop co-simulation of plants, filters, controllers and the
//! channel scheduler, with Monte Carlo aggregation and a stability monitor.

mod closed_loop;
mod library;
mod metrics;
mod monitor;
mod scenario;

pub use closed_loop::{run_closed_loop, AgentStep, SimTrace};
pub use library::{
    build_scenario, default_weights, double_integrator, double_integrator_agent, heterogeneous, identical4, lossy2,
    scenario_library, tuning2, ScenarioInfo, LOSSY_FLOORS,
};
pub use metrics::{
    closed_loop_cost, cost_difference, monte_carlo, scaled_around_minimum, simulate_runs, CostSummary, MCStats,
};
pub use monitor::{baseline_steady_state_mu, contraction, lsp_bound_monitor, LspBound, LspReport, WindowCheck};
pub use scenario::{LinearAgent, Scenario, SigmaModel};

use crate::control::ControlError;
use crate::estimation::EstimationError;
use crate::scheduler::ScheduleError;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("invalid scenario: {0}")]
    InvalidScenario(String),
    #[error("scheduler failed in run {run} at step {step}: {source}")]
    Solver { run: u64, step: usize, source: ScheduleError },
    #[error("filter failed in run {run} at step {step}: {source}")]
    Estimation { run: u64, step: usize, source: EstimationError },
    #[error(transparent)]
    Control(#[from] ControlError),
    #[error(transparent)]
    Noise(#[from] EstimationError),
    #[error("contraction factor α = {0} is not below 1")]
    InvalidAlpha(f64),
}

#[cfg(test)]
mod tests;
