//! Communication allocation over a shared channel.
//!
//! At every time instant the planner chooses which agents may transmit in
//! each of the next `N + 1` slots, with at most `γ` grants per slot, so as to
//! minimize the summed expected error price `Σ_i Σ_k tr(Γ_i E_{i,k})`.
//!
//! Solvers:
//! - [`solve_exhaustive`]: enumeration oracle for desk-sized instances.
//! - [`solve_greedy_voi`]: slot-by-slot myopic value of information.
//! - [`solve_relaxed`] + [`round_schedule`]: projected gradient on the
//!   continuous relaxation, then sum-up rounding.
//! - [`baseline_round_robin`]: the fixed rotation used as a fallback and as a
//!   reference schedule.

mod baseline;
mod exhaustive;
mod greedy;
mod problem;
mod receding;
mod relaxed;
mod rounding;

pub use baseline::baseline_round_robin;
pub use exhaustive::{solve_exhaustive, MAX_ENUMERATION};
pub use greedy::solve_greedy_voi;
pub use problem::{
    allocation_cost, voi, AllocationProblem, PlanningAgent, RelaxedSchedule, Schedule, ScheduleLike,
    RELAXED_FEASIBILITY_TOL,
};
pub use receding::{receding_horizon_step, PlanOutcome};
pub use relaxed::{
    cost_and_gradient, project_column, solve_relaxed, solve_relaxed_with, RelaxedOptions, RelaxedSolution,
};
pub use rounding::round_schedule;

use crate::estimation::EstimationError;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("invalid allocation problem: {0}")]
    InvalidProblem(String),
    #[error("infeasible schedule: {0}")]
    InfeasibleSchedule(String),
    #[error("enumeration of {leaves:.3e} schedules exceeds the limit of {limit}")]
    TooLarge { leaves: f64, limit: u64 },
    #[error("relaxed solver did not reach stationarity {stationarity:.3e} within {iterations} iterations")]
    NonConvergent { iterations: usize, stationarity: f64 },
    #[error(transparent)]
    Estimation(#[from] EstimationError),
}

/// Which solver drives the receding-horizon loop.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Strategy {
    Exhaustive,
    Greedy,
    /// Relaxation solved by projected gradient, then sum-up rounding.
    Relaxed,
    Baseline,
}

impl Strategy {
    pub const ALL: [Strategy; 4] = [Strategy::Exhaustive, Strategy::Greedy, Strategy::Relaxed, Strategy::Baseline];

    pub fn name(self) -> &'static str {
        match self {
            Strategy::Exhaustive => "exhaustive",
            Strategy::Greedy => "greedy",
            Strategy::Relaxed => "relaxed",
            Strategy::Baseline => "baseline",
        }
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Strategy {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Strategy::ALL
            .into_iter()
            .find(|st| st.name() == s)
            .ok_or_else(|| format!("unknown strategy `{s}`"))
    }
}
