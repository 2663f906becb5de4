use super::{Scenario, SimError, SimTrace};
use crate::estimation::expected_cov_update;
use crate::linalg::{min_symmetric_eigenvalue, trace_product, Mat};
use crate::scheduler::baseline_round_robin;

/// Steps simulated before the baseline covariance orbit is sampled.
const MU_WARMUP: usize = 500;
/// Steps over which the orbit maximum is taken.
const MU_WINDOW: usize = 200;

/// The stability-in-probability bound `limsup E{xᵀPx} ≤ ν / (1 - α)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LspBound {
    /// Largest per-agent contraction `1 - λ_min(Q P⁻¹)`.
    pub alpha: f64,
    /// `Σ tr(P_i W_i) + N μ`.
    pub nu: f64,
    pub mu: f64,
    pub bound: f64,
}

impl LspBound {
    /// Bound for the scenario's designs with the given `μ`, or the baseline
    /// steady-state value from [`baseline_steady_state_mu`] when `None`.
    pub fn for_scenario(sc: &Scenario, mu: Option<f64>) -> Result<Self, SimError> {
        let mu = match mu {
            Some(mu) => mu,
            None => baseline_steady_state_mu(sc)?,
        };
        let mut alpha: f64 = 0.0;
        let mut nu = sc.horizon as f64 * mu;
        for agent in &sc.agents {
            let d = &agent.design;
            alpha = alpha.max(contraction(&d.p, &d.closed_loop_weight())?);
            nu += trace_product(&d.p, &agent.noise.w);
        }
        Ok(Self { alpha, nu, mu, bound: nu / (1.0 - alpha) })
    }
}

/// Smallest `α` with `tr((P - Q) X) ≤ α tr(P X)` for every `X ⪰ 0`, i.e.
/// `1 - λ_min(Q P⁻¹)`, clipped at zero.
pub fn contraction(p: &Mat, q: &Mat) -> Result<f64, SimError> {
    let chol = p.clone().cholesky().ok_or_else(|| SimError::InvalidScenario("P is not positive definite".into()))?;
    let l_inv = chol.l().try_inverse().ok_or_else(|| SimError::InvalidScenario("P is singular".into()))?;
    let scaled = &l_inv * q * l_inv.transpose();
    let alpha = (1.0 - min_symmetric_eigenvalue(&scaled)).max(0.0);
    if alpha >= 1.0 {
        return Err(SimError::InvalidAlpha(alpha));
    }
    Ok(alpha)
}

/// Largest `Σ_i tr(Γ_i E_i)` on the expected-covariance orbit driven by the
/// baseline rotation with the true success probabilities, sampled after a
/// warm-up.
pub fn baseline_steady_state_mu(sc: &Scenario) -> Result<f64, SimError> {
    let m = sc.num_agents();
    let mut e: Vec<Mat> = sc.agents.iter().map(|a| a.noise.x0.clone()).collect();
    let mut mu: f64 = 0.0;
    for k in 1..=MU_WARMUP + MU_WINDOW {
        let grants = baseline_round_robin(m, sc.capacity, 0, k * sc.capacity).column(0);
        let mut total = 0.0;
        for (i, agent) in sc.agents.iter().enumerate() {
            let weight = if grants[i] { sc.sigma.sigma(i, k) } else { 0.0 };
            e[i] = expected_cov_update(&e[i], &agent.sys.a, &agent.sys.c, &agent.noise.w, &agent.noise.v, weight)
                .map_err(|source| SimError::Estimation { run: 0, step: k, source })?;
            total += trace_product(&agent.design.gamma, &e[i]);
        }
        if k > MU_WARMUP {
            mu = mu.max(total);
        }
    }
    Ok(mu)
}

#[derive(Debug, Clone, PartialEq)]
pub struct WindowCheck {
    pub start: usize,
    pub end: usize,
    /// Cross-run mean of `Σ_i x_iᵀ P_i x_i`, averaged over the window.
    pub mean: f64,
    pub flagged: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LspReport {
    pub bound: LspBound,
    /// Cross-run mean of `Σ_i x_iᵀ P_i x_i` at every step.
    pub mean_tr_px: Vec<f64>,
    pub windows: Vec<WindowCheck>,
    /// Time average of each run over the second half of the horizon.
    pub run_averages: Vec<f64>,
    pub fraction_inside: f64,
    /// Largest window mean in the second half, the empirical limsup.
    pub empirical_limsup: f64,
    /// `bound - empirical_limsup`; negative when the bound is exceeded.
    pub margin: f64,
}

impl LspReport {
    pub fn flagged(&self) -> bool {
        self.windows.iter().any(|w| w.flagged)
    }
}

/// Compares the traces of a Monte Carlo batch against `bound`. Windows of
/// `window` steps whose cross-run average exceeds the bound by more than
/// 10 % are flagged.
pub fn lsp_bound_monitor(traces: &[SimTrace], bound: LspBound, window: usize) -> LspReport {
    let steps = traces.iter().map(SimTrace::num_steps).min().unwrap_or(0);
    let window = window.max(1);
    let per_step = |t: &SimTrace, k: usize| t.steps[k].iter().map(|a| a.tr_p_x).sum::<f64>();

    let runs = traces.len().max(1) as f64;
    let mean_tr_px: Vec<f64> = (0..steps).map(|k| traces.iter().map(|t| per_step(t, k)).sum::<f64>() / runs).collect();

    let windows: Vec<WindowCheck> = (0..steps)
        .step_by(window)
        .map(|start| {
            let end = (start + window).min(steps);
            let mean = mean_tr_px[start..end].iter().sum::<f64>() / (end - start) as f64;
            WindowCheck { start, end, mean, flagged: mean > 1.1 * bound.bound }
        })
        .collect();

    let half = steps / 2;
    let run_averages: Vec<f64> = traces
        .iter()
        .map(|t| (half..steps).map(|k| per_step(t, k)).sum::<f64>() / (steps - half).max(1) as f64)
        .collect();
    let inside = run_averages.iter().filter(|&&a| a <= bound.bound).count();
    let fraction_inside = if traces.is_empty() { 1.0 } else { inside as f64 / traces.len() as f64 };
    let empirical_limsup =
        windows.iter().filter(|w| w.start >= half).map(|w| w.mean).fold(0.0, f64::max);

    LspReport {
        bound,
        mean_tr_px,
        windows,
        run_averages,
        fraction_inside,
        empirical_limsup,
        margin: bound.bound - empirical_limsup,
    }
}
