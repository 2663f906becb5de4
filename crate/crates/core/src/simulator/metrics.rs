use super::{run_closed_loop, Scenario, SimError, SimTrace};
use crate::control::{stage_cost, ControllerDesign, SystemMatrices};
use crate::linalg::Vector;
use rayon::prelude::*;

/// Cost figures of one trace.
#[derive(Debug, Clone, PartialEq)]
pub struct CostSummary {
    /// `J = (1/T) Σ_k Σ_i ℓ_i(x_{i,k}, u_{i,k})`.
    pub j: f64,
    /// `J` restricted to each agent; sums to `j`.
    pub per_agent: Vec<f64>,
    /// `Σ_k Σ_i tr(Γ_i E_{i,k})` along the realized posteriors.
    pub trace_cost: f64,
}

pub fn closed_loop_cost(trace: &SimTrace) -> CostSummary {
    let mut per_agent = vec![0.0; trace.num_agents()];
    let mut trace_cost = 0.0;
    for row in &trace.steps {
        for (i, a) in row.iter().enumerate() {
            per_agent[i] += a.stage_cost;
            trace_cost += a.tr_gamma_e;
        }
    }
    let t = trace.num_steps().max(1) as f64;
    per_agent.iter_mut().for_each(|c| *c /= t);
    CostSummary { j: per_agent.iter().sum(), per_agent, trace_cost }
}

/// Extra closed-loop cost of acting on `x̂ = x - e` instead of `x` for one
/// noiseless step:
/// `ℓ(x, -Kx̂) - ℓ(x, -Kx) + 𝒱(A x - BKx̂) - 𝒱(A x - BKx)` with `𝒱(z) = zᵀPz`.
/// Its mean over `e ~ N(0, E)` is `tr(Γ E)`.
pub fn cost_difference(sys: &SystemMatrices, design: &ControllerDesign, x: &Vector, e: &Vector) -> f64 {
    let xhat = x - e;
    let u = design.control(&xhat);
    let ubar = design.control(x);
    let value = |z: Vector| z.dot(&(&design.p * &z));
    let next = value(&sys.a * x + &sys.b * &u);
    let next_bar = value(&sys.a * x + &sys.b * &ubar);
    stage_cost(x, &u, &design.weights) - stage_cost(x, &ubar, &design.weights) + next - next_bar
}

/// Monte Carlo summary of a scenario.
#[derive(Debug, Clone, PartialEq)]
pub struct MCStats {
    pub runs: usize,
    pub j_mean: f64,
    /// Standard error of `j_mean`; zero for a single run.
    pub j_stderr: f64,
    pub j_per_run: Vec<f64>,
    pub trace_cost_mean: f64,
    pub trace_cost_stderr: f64,
    /// Mean grant count of each agent per run.
    pub grants_mean: Vec<f64>,
    /// `Σ grants of agent 2 / Σ grants of agent 1` for two-agent scenarios.
    /// Infinite when agent 1 is never served.
    pub grant_ratio: Option<f64>,
}

impl MCStats {
    pub fn from_summaries(summaries: &[(CostSummary, Vec<usize>)]) -> Self {
        let runs = summaries.len();
        let j_per_run: Vec<f64> = summaries.iter().map(|(c, _)| c.j).collect();
        let traces: Vec<f64> = summaries.iter().map(|(c, _)| c.trace_cost).collect();
        let (j_mean, j_stderr) = mean_stderr(&j_per_run);
        let (trace_cost_mean, trace_cost_stderr) = mean_stderr(&traces);

        let agents = summaries.first().map_or(0, |(_, g)| g.len());
        let mut totals = vec![0usize; agents];
        for (_, g) in summaries {
            totals.iter_mut().zip(g).for_each(|(t, g)| *t += g);
        }
        let grants_mean = totals.iter().map(|&t| t as f64 / runs.max(1) as f64).collect();
        let grant_ratio = (agents == 2).then(|| {
            if totals[0] == 0 {
                if totals[1] == 0 { 1.0 } else { f64::INFINITY }
            } else {
                totals[1] as f64 / totals[0] as f64
            }
        });
        Self { runs, j_mean, j_stderr, j_per_run, trace_cost_mean, trace_cost_stderr, grants_mean, grant_ratio }
    }

    /// `J / J_baseline`.
    pub fn relative_to(&self, baseline: &MCStats) -> f64 {
        self.j_mean / baseline.j_mean
    }
}

fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n == 1 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// `J / min J` over a sweep.
pub fn scaled_around_minimum(values: &[f64]) -> Vec<f64> {
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    values.iter().map(|v| v / min).collect()
}

/// All runs of the scenario, in run order. Runs are executed in parallel on
/// the current rayon pool; the result does not depend on the worker count.
pub fn simulate_runs(sc: &Scenario) -> Result<Vec<SimTrace>, SimError> {
    sc.validate()?;
    (0..sc.runs as u64).into_par_iter().map(|run| run_closed_loop(sc, run)).collect()
}

/// Runs the scenario `sc.runs` times and aggregates the results.
pub fn monte_carlo(sc: &Scenario) -> Result<MCStats, SimError> {
    sc.validate()?;
    let summaries: Vec<(CostSummary, Vec<usize>)> = (0..sc.runs as u64)
        .into_par_iter()
        .map(|run| run_closed_loop(sc, run).map(|t| (closed_loop_cost(&t), t.grants())))
        .collect::<Result<_, _>>()?;
    Ok(MCStats::from_summaries(&summaries))
}
