use super::ScheduleError;
use crate::estimation::{expected_cov_update, EstimationError};
use crate::linalg::{asymmetry, max_abs, min_symmetric_eigenvalue, trace_product, Mat};

/// Slack allowed on relaxed entries and column sums.
pub const RELAXED_FEASIBILITY_TOL: f64 = 1e-9;

/// What the planner needs to know about one agent: its error price Γ, the
/// covariance dynamics and the success probability of each planned slot.
#[derive(Debug, Clone, PartialEq)]
pub struct PlanningAgent {
    pub gamma: Mat,
    pub a: Mat,
    pub c: Mat,
    pub w: Mat,
    pub v: Mat,
    /// `sigma[k]` is the success probability of plan slot `k`.
    pub sigma: Vec<f64>,
}

impl PlanningAgent {
    /// One application of the expected-covariance map with multiplier `δ·σ_k`.
    pub fn step(&self, e: &Mat, delta: f64, slot: usize) -> Result<Mat, EstimationError> {
        expected_cov_update(e, &self.a, &self.c, &self.w, &self.v, delta * self.sigma[slot])
    }

    pub fn price(&self, e: &Mat) -> f64 {
        trace_product(&self.gamma, e)
    }
}

/// The finite-horizon allocation problem posed at one time instant: plan
/// `horizon + 1` slots for every agent, at most `capacity` grants per slot.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationProblem {
    agents: Vec<PlanningAgent>,
    e_init: Vec<Mat>,
    horizon: usize,
    capacity: usize,
}

impl AllocationProblem {
    pub fn new(
        agents: Vec<PlanningAgent>,
        e_init: Vec<Mat>,
        horizon: usize,
        capacity: usize,
    ) -> Result<Self, ScheduleError> {
        let invalid = |msg: String| Err(ScheduleError::InvalidProblem(msg));
        if agents.is_empty() {
            return invalid("at least one agent is required".into());
        }
        if capacity == 0 {
            return invalid("capacity must be at least 1".into());
        }
        if e_init.len() != agents.len() {
            return invalid(format!("{} initial covariances for {} agents", e_init.len(), agents.len()));
        }
        for (i, (agent, e)) in agents.iter().zip(&e_init).enumerate() {
            let n = agent.a.nrows();
            if agent.gamma.shape() != (n, n) || e.shape() != (n, n) || agent.w.shape() != (n, n) {
                return invalid(format!("agent {i}: matrix sizes are inconsistent"));
            }
            if agent.sigma.len() < horizon + 1 {
                return invalid(format!(
                    "agent {i}: {} success probabilities for {} slots",
                    agent.sigma.len(),
                    horizon + 1
                ));
            }
            if agent.sigma.iter().any(|s| !(0.0..=1.0).contains(s)) {
                return invalid(format!("agent {i}: success probability outside [0, 1]"));
            }
            let scale = max_abs(&agent.gamma).max(1.0);
            if asymmetry(&agent.gamma) > 1e-12 * scale || min_symmetric_eigenvalue(&agent.gamma) < -1e-10 * scale {
                return invalid(format!("agent {i}: Γ is not symmetric positive semidefinite"));
            }
        }
        Ok(Self { agents, e_init, horizon, capacity })
    }

    pub fn agents(&self) -> &[PlanningAgent] {
        &self.agents
    }

    pub fn e_init(&self) -> &[Mat] {
        &self.e_init
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    /// Number of planned slots, `horizon + 1`.
    pub fn slots(&self) -> usize {
        self.horizon + 1
    }

    pub fn capacity(&self) -> usize {
        self.capacity
    }

    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }
}

/// Read access shared by binary and relaxed schedules.
pub trait ScheduleLike {
    fn num_agents(&self) -> usize;
    fn slots(&self) -> usize;
    fn weight(&self, agent: usize, slot: usize) -> f64;

    fn row(&self, agent: usize) -> Vec<f64> {
        (0..self.slots()).map(|k| self.weight(agent, k)).collect()
    }

    fn column_sum(&self, slot: usize) -> f64 {
        (0..self.num_agents()).map(|i| self.weight(i, slot)).sum()
    }
}

/// Binary allocation: `delta[i][k]` grants slot `k` to agent `i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Schedule {
    delta: Vec<Vec<bool>>,
}

impl Schedule {
    pub fn new(delta: Vec<Vec<bool>>) -> Self {
        let slots = delta.first().map_or(0, Vec::len);
        assert!(delta.iter().all(|r| r.len() == slots), "ragged schedule");
        Self { delta }
    }

    pub fn zeros(agents: usize, slots: usize) -> Self {
        Self { delta: vec![vec![false; slots]; agents] }
    }

    pub fn from_bits(rows: &[&[u8]]) -> Self {
        Self::new(rows.iter().map(|r| r.iter().map(|&b| b != 0).collect()).collect())
    }

    pub fn get(&self, agent: usize, slot: usize) -> bool {
        self.delta[agent][slot]
    }

    pub fn set(&mut self, agent: usize, slot: usize, value: bool) {
        self.delta[agent][slot] = value;
    }

    pub fn rows(&self) -> &[Vec<bool>] {
        &self.delta
    }

    pub fn column(&self, slot: usize) -> Vec<bool> {
        self.delta.iter().map(|r| r[slot]).collect()
    }

    pub fn grants(&self, agent: usize) -> usize {
        self.delta[agent].iter().filter(|&&b| b).count()
    }

    pub fn granted_in(&self, slot: usize) -> usize {
        self.delta.iter().filter(|r| r[slot]).count()
    }

    pub fn is_feasible(&self, capacity: usize) -> bool {
        (0..self.slots()).all(|k| self.granted_in(k) <= capacity)
    }

    /// Row-major (agent, then slot) bit string used for tie-breaking.
    pub fn flattened(&self) -> Vec<bool> {
        self.delta.iter().flatten().copied().collect()
    }

    /// Drops the first slot and repeats the last one.
    pub fn shifted(&self) -> Self {
        let delta = self
            .delta
            .iter()
            .map(|row| {
                let mut next: Vec<bool> = row.iter().skip(1).copied().collect();
                if let Some(&last) = row.last() {
                    next.push(last);
                }
                next
            })
            .collect();
        Self { delta }
    }
}

impl ScheduleLike for Schedule {
    fn num_agents(&self) -> usize {
        self.delta.len()
    }

    fn slots(&self) -> usize {
        self.delta.first().map_or(0, Vec::len)
    }

    fn weight(&self, agent: usize, slot: usize) -> f64 {
        if self.delta[agent][slot] {
            1.0
        } else {
            0.0
        }
    }
}

/// Continuous relaxation of [`Schedule`] with entries in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedSchedule {
    delta: Vec<Vec<f64>>,
}

impl RelaxedSchedule {
    pub fn new(delta: Vec<Vec<f64>>) -> Self {
        let slots = delta.first().map_or(0, Vec::len);
        assert!(delta.iter().all(|r| r.len() == slots), "ragged schedule");
        Self { delta }
    }

    /// Every entry equal to `min(1, capacity / agents)`.
    pub fn uniform(agents: usize, slots: usize, capacity: usize) -> Self {
        let value = (capacity as f64 / agents as f64).min(1.0);
        Self { delta: vec![vec![value; slots]; agents] }
    }

    pub fn rows(&self) -> &[Vec<f64>] {
        &self.delta
    }

    pub(crate) fn rows_mut(&mut self) -> &mut [Vec<f64>] {
        &mut self.delta
    }

    pub fn is_feasible(&self, capacity: usize) -> bool {
        let tol = RELAXED_FEASIBILITY_TOL;
        self.delta.iter().flatten().all(|&d| (-tol..=1.0 + tol).contains(&d))
            && (0..self.slots()).all(|k| self.column_sum(k) <= capacity as f64 + tol)
    }

    /// True when every entry is within `tol` of 0 or 1.
    pub fn is_integral(&self, tol: f64) -> bool {
        self.delta.iter().flatten().all(|&d| d.abs() <= tol || (d - 1.0).abs() <= tol)
    }
}

impl From<&Schedule> for RelaxedSchedule {
    fn from(s: &Schedule) -> Self {
        Self {
            delta: s.delta.iter().map(|r| r.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()).collect(),
        }
    }
}

impl ScheduleLike for RelaxedSchedule {
    fn num_agents(&self) -> usize {
        self.delta.len()
    }

    fn slots(&self) -> usize {
        self.delta.first().map_or(0, Vec::len)
    }

    fn weight(&self, agent: usize, slot: usize) -> f64 {
        self.delta[agent][slot]
    }
}

/// Single-agent value of a schedule row: `Σ_k tr(Γ E_k)` along the expected
/// covariance path started from `e_prev`. The horizon is `delta.len() - 1`.
pub fn voi(agent: &PlanningAgent, delta: &[f64], e_prev: &Mat) -> Result<f64, ScheduleError> {
    let mut e = e_prev.clone();
    let mut total = 0.0;
    for (slot, &d) in delta.iter().enumerate() {
        e = agent.step(&e, d, slot)?;
        total += agent.price(&e);
    }
    Ok(total)
}

/// Objective of the allocation problem: the sum over agents and planned
/// slots of `tr(Γ_i E_{i,k})`.
pub fn allocation_cost(p: &AllocationProblem, s: &impl ScheduleLike) -> Result<f64, ScheduleError> {
    check_schedule(p, s)?;
    let mut total = 0.0;
    for (i, agent) in p.agents().iter().enumerate() {
        total += voi(agent, &s.row(i), &p.e_init()[i])?;
    }
    Ok(total)
}

pub(crate) fn check_schedule(p: &AllocationProblem, s: &impl ScheduleLike) -> Result<(), ScheduleError> {
    if s.num_agents() != p.num_agents() || s.slots() != p.slots() {
        return Err(ScheduleError::InfeasibleSchedule(format!(
            "schedule is {}x{}, problem needs {}x{}",
            s.num_agents(),
            s.slots(),
            p.num_agents(),
            p.slots()
        )));
    }
    let tol = RELAXED_FEASIBILITY_TOL;
    for k in 0..s.slots() {
        for i in 0..s.num_agents() {
            let d = s.weight(i, k);
            if !(-tol..=1.0 + tol).contains(&d) {
                return Err(ScheduleError::InfeasibleSchedule(format!("delta[{i}][{k}] = {d} outside [0, 1]")));
            }
        }
        let used = s.column_sum(k);
        if used > p.capacity() as f64 + tol {
            return Err(ScheduleError::InfeasibleSchedule(format!(
                "slot {k} uses {used} of capacity {}",
                p.capacity()
            )));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scheduler::test_support::{random_problem, scalar_agent};
    use proptest::prelude::*;

    fn scalar_problem(gamma: f64, horizon: usize) -> AllocationProblem {
        let mut agent = scalar_agent(1.0, 1.0, 0.0, gamma, 1.0, horizon + 1);
        agent.v = Mat::zeros(1, 1);
        AllocationProblem::new(vec![agent], vec![Mat::zeros(1, 1)], horizon, 1).unwrap()
    }

    #[test]
    fn zero_price_costs_nothing() {
        let p = scalar_problem(0.0, 3);
        for bits in [[0u8, 0, 0, 0], [1, 0, 1, 0], [1, 1, 1, 1]] {
            assert_eq!(allocation_cost(&p, &Schedule::from_bits(&[&bits])).unwrap(), 0.0);
        }
    }

    #[test]
    fn hand_rolled_recursion() {
        // A = 1, W = 1, C = 1, V = 0, σ = 1, Γ = 1, E = 0, two slots.
        let p = scalar_problem(1.0, 1);
        let silent = Schedule::from_bits(&[&[0, 0]]);
        let always = Schedule::from_bits(&[&[1, 1]]);
        assert_eq!(allocation_cost(&p, &silent).unwrap(), 3.0);
        assert_eq!(allocation_cost(&p, &always).unwrap(), 0.0);
        assert_eq!(voi(&p.agents()[0], &[0.0, 0.0], &Mat::zeros(1, 1)).unwrap(), 3.0);
        assert_eq!(voi(&p.agents()[0], &[1.0, 1.0], &Mat::zeros(1, 1)).unwrap(), 0.0);
    }

    #[test]
    fn capacity_violation_is_rejected() {
        let agents = vec![scalar_agent(1.0, 1.0, 0.0, 1.0, 1.0, 2); 2];
        let p = AllocationProblem::new(agents, vec![Mat::zeros(1, 1); 2], 1, 1).unwrap();
        let s = Schedule::from_bits(&[&[1, 0], &[1, 0]]);
        assert!(matches!(allocation_cost(&p, &s), Err(ScheduleError::InfeasibleSchedule(_))));
    }

    #[test]
    fn problem_validation() {
        let agent = scalar_agent(1.0, 1.0, 0.0, 1.0, 1.0, 2);
        assert!(AllocationProblem::new(vec![agent.clone()], vec![Mat::zeros(1, 1)], 1, 0).is_err());
        assert!(AllocationProblem::new(vec![agent.clone()], vec![Mat::zeros(1, 1)], 5, 1).is_err());
        assert!(AllocationProblem::new(vec![agent], vec![], 1, 1).is_err());
    }

    #[test]
    fn shift_repeats_last_column() {
        let s = Schedule::from_bits(&[&[1, 0, 1], &[0, 1, 0]]);
        assert_eq!(s.shifted(), Schedule::from_bits(&[&[0, 1, 1], &[1, 0, 0]]));
    }

    proptest! {
        #[test]
        fn cost_decomposes_into_voi(seed in any::<u64>()) {
            let (p, s) = random_problem(seed, 3, 3);
            let total = allocation_cost(&p, &s).unwrap();
            let sum: f64 = (0..p.num_agents())
                .map(|i| voi(&p.agents()[i], &s.row(i), &p.e_init()[i]).unwrap())
                .sum();
            prop_assert!((total - sum).abs() <= 1e-12 * total.max(1.0));
        }

        #[test]
        fn flipping_a_bit_on_never_hurts(seed in any::<u64>(), agent in 0usize..3, slot in 0usize..4) {
            let (p, mut s) = random_problem(seed, 3, 3);
            let i = agent % p.num_agents();
            let slot = slot % p.slots();
            s.set(i, slot, false);
            let before = voi(&p.agents()[i], &s.row(i), &p.e_init()[i]).unwrap();
            s.set(i, slot, true);
            let after = voi(&p.agents()[i], &s.row(i), &p.e_init()[i]).unwrap();
            prop_assert!(after <= before + 1e-12 * before.max(1.0));
        }
    }
}
