//! Continuous relaxation of the allocation problem.
//!
//! The covariance update is affine in the schedule weight for a fixed
//! prediction, so the relaxed problem keeps the same dynamics with
//! `δ ∈ [0, 1]`. It is solved by projected gradient with Barzilai–Borwein
//! steps and Armijo backtracking. The gradient comes from an adjoint sweep:
//!
//! ```text
//! Ē_k = A E_{k-1} Aᵀ + W,   M_k = L(Ē_k) C,   c_k = δ_k σ_k
//! E_k = Ē_k - c_k M_k Ē_k
//!
//! Λ_k   = Γ + Aᵀ G_{k+1} A                      (∂J/∂E_k)
//! ∂J/∂δ_k = -σ_k tr(Λ_k M_k Ē_k)
//! G_k   = (I - c_k M_k)ᵀ Λ_k (I - c_k M_k) + (c_k - c_k²) M_kᵀ Λ_k M_k
//! ```
//!
//! where the last line accounts for the dependence of the Kalman gain on Ē.

use super::greedy::solve_greedy_voi;
use super::problem::{check_schedule, AllocationProblem, PlanningAgent, RelaxedSchedule, ScheduleLike};
use super::ScheduleError;
use crate::estimation::kalman_gain;
use crate::linalg::{symmetrize_in_place, trace_product, Mat};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RelaxedOptions {
    pub max_iter: usize,
    /// Bound on `‖P(δ - ∇J) - δ‖∞`.
    pub stationarity_tol: f64,
    pub armijo: f64,
    /// Also start from the greedy schedule and from the uniform split.
    pub multi_start: bool,
}

impl Default for RelaxedOptions {
    fn default() -> Self {
        Self { max_iter: 10_000, stationarity_tol: 1e-6, armijo: 1e-4, multi_start: true }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSolution {
    pub schedule: RelaxedSchedule,
    pub cost: f64,
    pub iterations: usize,
    pub stationarity: f64,
}

/// Local minimizer of the relaxed allocation cost from `init`.
pub fn solve_relaxed(p: &AllocationProblem, init: &RelaxedSchedule) -> Result<(RelaxedSchedule, f64), ScheduleError> {
    let sol = solve_relaxed_with(p, init, &RelaxedOptions::default())?;
    Ok((sol.schedule, sol.cost))
}

pub fn solve_relaxed_with(
    p: &AllocationProblem,
    init: &RelaxedSchedule,
    opts: &RelaxedOptions,
) -> Result<RelaxedSolution, ScheduleError> {
    check_schedule(p, init)?;
    let mut starts = vec![init.clone()];
    if opts.multi_start {
        let (greedy, _) = solve_greedy_voi(p)?;
        starts.push(RelaxedSchedule::from(&greedy));
        starts.push(RelaxedSchedule::uniform(p.num_agents(), p.slots(), p.capacity()));
    }

    let mut best: Option<RelaxedSolution> = None;
    let mut worst_stationarity: f64 = 0.0;
    let mut total_iterations = 0;
    for start in starts {
        let sol = projected_gradient(p, start, opts)?;
        total_iterations += sol.iterations;
        if sol.stationarity > opts.stationarity_tol {
            worst_stationarity = worst_stationarity.max(sol.stationarity);
            continue;
        }
        if best.as_ref().is_none_or(|b| sol.cost < b.cost) {
            best = Some(sol);
        }
    }
    best.ok_or(ScheduleError::NonConvergent { iterations: total_iterations, stationarity: worst_stationarity })
}

fn projected_gradient(
    p: &AllocationProblem,
    start: RelaxedSchedule,
    opts: &RelaxedOptions,
) -> Result<RelaxedSolution, ScheduleError> {
    let cap = p.capacity() as f64;
    let mut d = start;
    project(&mut d, cap);
    let (mut cost, mut grad) = cost_and_gradient(p, &d)?;
    let mut step = 1.0 / max_abs_rows(&grad).max(1e-12);
    let mut stationarity = f64::INFINITY;

    for iteration in 0..opts.max_iter {
        stationarity = projected_step_norm(&d, &grad, 1.0, cap);
        if stationarity <= opts.stationarity_tol {
            return Ok(RelaxedSolution { schedule: d, cost, iterations: iteration, stationarity });
        }

        let mut target = d.clone();
        axpy_rows(target.rows_mut(), -step, &grad);
        project(&mut target, cap);
        let direction = diff_rows(target.rows(), d.rows());
        let slope = dot_rows(&grad, &direction);
        if slope >= 0.0 {
            break;
        }

        let mut lambda = 1.0;
        let (next, next_cost) = loop {
            let mut trial = d.clone();
            axpy_rows(trial.rows_mut(), lambda, &direction);
            let trial_cost = relaxed_cost(p, &trial)?;
            if trial_cost <= cost + opts.armijo * lambda * slope {
                break (trial, trial_cost);
            }
            lambda *= 0.5;
            if lambda < 1e-12 {
                return Ok(RelaxedSolution { schedule: d, cost, iterations: iteration, stationarity });
            }
        };

        let (_, next_grad) = cost_and_gradient(p, &next)?;
        let s = diff_rows(next.rows(), d.rows());
        let y = diff_rows(&next_grad, &grad);
        let sy = dot_rows(&s, &y);
        step = if sy > 0.0 { (dot_rows(&s, &s) / sy).clamp(1e-10, 1e10) } else { 1e10 };
        d = next;
        cost = next_cost;
        grad = next_grad;
    }
    Ok(RelaxedSolution { schedule: d, cost, iterations: opts.max_iter, stationarity })
}

/// Relaxed objective and its gradient with respect to every `δ_{i,k}`.
pub fn cost_and_gradient(p: &AllocationProblem, d: &RelaxedSchedule) -> Result<(f64, Vec<Vec<f64>>), ScheduleError> {
    let mut total = 0.0;
    let mut grad = Vec::with_capacity(p.num_agents());
    for (i, agent) in p.agents().iter().enumerate() {
        let (cost, g) = agent_cost_and_gradient(agent, &d.rows()[i], &p.e_init()[i])?;
        total += cost;
        grad.push(g);
    }
    Ok((total, grad))
}

fn relaxed_cost(p: &AllocationProblem, d: &RelaxedSchedule) -> Result<f64, ScheduleError> {
    let mut total = 0.0;
    for (i, agent) in p.agents().iter().enumerate() {
        total += super::voi(agent, &d.rows()[i], &p.e_init()[i])?;
    }
    Ok(total)
}

fn agent_cost_and_gradient(agent: &PlanningAgent, delta: &[f64], e_init: &Mat) -> Result<(f64, Vec<f64>), ScheduleError> {
    let n = agent.a.nrows();
    let identity = Mat::identity(n, n);
    let mut predicted = Vec::with_capacity(delta.len());
    let mut gains = Vec::with_capacity(delta.len());
    let mut e = e_init.clone();
    let mut cost = 0.0;
    for (slot, &d) in delta.iter().enumerate() {
        let mut ebar = &agent.a * &e * agent.a.transpose() + &agent.w;
        symmetrize_in_place(&mut ebar);
        let lc = kalman_gain(&ebar, &agent.c, &agent.v)? * &agent.c;
        let weight = d * agent.sigma[slot];
        e = (&identity - &lc * weight) * &ebar;
        symmetrize_in_place(&mut e);
        cost += agent.price(&e);
        predicted.push(ebar);
        gains.push(lc);
    }

    let at = agent.a.transpose();
    let mut grad = vec![0.0; delta.len()];
    let mut adjoint = Mat::zeros(n, n);
    for slot in (0..delta.len()).rev() {
        let lambda = &agent.gamma + &at * &adjoint * &agent.a;
        let m = &gains[slot];
        let ebar = &predicted[slot];
        let sigma = agent.sigma[slot];
        grad[slot] = -sigma * trace_product(&lambda, &(m * ebar));
        let c = delta[slot] * sigma;
        let t = &identity - m * c;
        adjoint = t.transpose() * &lambda * &t + (m.transpose() * &lambda * m) * (c - c * c);
    }
    Ok((cost, grad))
}

/// Euclidean projection of one slot onto `{x ∈ [0,1]^M : Σ x ≤ capacity}`.
pub fn project_column(col: &mut [f64], capacity: f64) {
    let clipped_sum: f64 = col.iter().map(|x| x.clamp(0.0, 1.0)).sum();
    if clipped_sum <= capacity {
        col.iter_mut().for_each(|x| *x = x.clamp(0.0, 1.0));
        return;
    }
    let shifted_sum = |tau: f64| col.iter().map(|x| (x - tau).clamp(0.0, 1.0)).sum::<f64>();
    let mut lo = 0.0;
    let mut hi = col.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if shifted_sum(mid) > capacity {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    // Solve exactly on the free set identified by the bracket.
    let mid = 0.5 * (lo + hi);
    let (mut free_sum, mut free, mut ones) = (0.0, 0usize, 0usize);
    for &x in col.iter() {
        let y = x - mid;
        if y >= 1.0 {
            ones += 1;
        } else if y > 0.0 {
            free_sum += x;
            free += 1;
        }
    }
    let mut tau = hi;
    if free > 0 {
        let exact = (free_sum + ones as f64 - capacity) / free as f64;
        if exact >= 0.0 && shifted_sum(exact) <= capacity + 1e-12 {
            tau = exact;
        }
    }
    col.iter_mut().for_each(|x| *x = (*x - tau).clamp(0.0, 1.0));
}

fn project(d: &mut RelaxedSchedule, capacity: f64) {
    let slots = d.slots();
    let rows = d.rows_mut();
    let mut col = vec![0.0; rows.len()];
    for k in 0..slots {
        for (i, row) in rows.iter().enumerate() {
            col[i] = row[k];
        }
        project_column(&mut col, capacity);
        for (i, row) in rows.iter_mut().enumerate() {
            row[k] = col[i];
        }
    }
}

fn projected_step_norm(d: &RelaxedSchedule, grad: &[Vec<f64>], step: f64, capacity: f64) -> f64 {
    let mut target = d.clone();
    axpy_rows(target.rows_mut(), -step, grad);
    project(&mut target, capacity);
    diff_rows(target.rows(), d.rows()).iter().flatten().fold(0.0, |acc, v| acc.max(v.abs()))
}

fn axpy_rows(rows: &mut [Vec<f64>], scale: f64, other: &[Vec<f64>]) {
    for (r, o) in rows.iter_mut().zip(other) {
        for (x, y) in r.iter_mut().zip(o) {
            *x += scale * y;
        }
    }
}

fn diff_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> Vec<Vec<f64>> {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x - y).collect()).collect()
}

fn dot_rows(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(ra, rb)| ra.iter().zip(rb).map(|(x, y)| x * y).sum::<f64>()).sum()
}

fn max_abs_rows(a: &[Vec<f64>]) -> f64 {
    a.iter().flatten().fold(0.0, |acc, v| acc.max(v.abs()))
}
