use super::{Scenario, SimError};
use crate::control::stage_cost;
use crate::estimation::{predict, update_realized, FilterState};
use crate::linalg::{psd_factor, trace_product, Mat, Vector};
use crate::scheduler::{receding_horizon_step, AllocationProblem, Schedule};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

/// What one agent looked like at one step.
///
/// `delta`, `s` and `sigma` describe the transmission whose outcome is
/// already folded into `xhat` and `e`. Step 0 has no transmission.
#[derive(Debug, Clone, PartialEq)]
pub struct AgentStep {
    pub x: Vector,
    pub xhat: Vector,
    pub u: Vector,
    /// Realized posterior error covariance.
    pub e: Mat,
    pub delta: bool,
    pub s: bool,
    pub sigma: f64,
    pub stage_cost: f64,
    pub tr_gamma_e: f64,
    /// `xᵀ P x`, a one-sample estimate of `tr(P X)`.
    pub tr_p_x: f64,
}

/// Full record of one closed-loop run, indexed `[step][agent]`.
#[derive(Debug, Clone, PartialEq)]
pub struct SimTrace {
    pub scenario: String,
    pub run: u64,
    pub steps: Vec<Vec<AgentStep>>,
}

impl SimTrace {
    pub fn num_steps(&self) -> usize {
        self.steps.len()
    }

    pub fn num_agents(&self) -> usize {
        self.steps.first().map_or(0, Vec::len)
    }

    /// Total grants of each agent over the run.
    pub fn grants(&self) -> Vec<usize> {
        let mut out = vec![0; self.num_agents()];
        for row in &self.steps {
            for (i, a) in row.iter().enumerate() {
                out[i] += usize::from(a.delta);
            }
        }
        out
    }

    /// Grants at step `k`, one flag per agent.
    pub fn grant_column(&self, k: usize) -> Vec<bool> {
        self.steps[k].iter().map(|a| a.delta).collect()
    }
}

#[derive(Clone, Copy)]
enum Source {
    InitialState = 0,
    Process = 1,
    Measurement = 2,
    Channel = 3,
}

/// Independent generators per agent and noise source. The key is the pair
/// (scenario seed, run index); the stream number selects agent and source,
/// so one agent's draws do not depend on how many others exist.
struct NoiseStreams {
    streams: Vec<[ChaCha8Rng; 4]>,
}

impl NoiseStreams {
    fn new(seed: u64, run: u64, agents: usize) -> Self {
        let mut key = [0u8; 32];
        key[..8].copy_from_slice(&seed.to_le_bytes());
        key[8..16].copy_from_slice(&run.to_le_bytes());
        let streams = (0..agents as u64)
            .map(|i| {
                std::array::from_fn(|src| {
                    let mut rng = ChaCha8Rng::from_seed(key);
                    rng.set_stream(i * 4 + src as u64);
                    rng
                })
            })
            .collect();
        Self { streams }
    }

    fn gaussian(&mut self, agent: usize, source: Source, factor: &Mat) -> Vector {
        let rng = &mut self.streams[agent][source as usize];
        let z = Vector::from_fn(factor.ncols(), |_, _| rng.sample(StandardNormal));
        factor * z
    }

    fn uniform(&mut self, agent: usize) -> f64 {
        self.streams[agent][Source::Channel as usize].random()
    }
}

/// Simulates one run of the scenario. Per step `k ≥ 1`:
///
/// 1. plan from the current posteriors and take the grants for slot `k`;
/// 2. a granted packet arrives with probability `σ_{i,k}`;
/// 3. sensors measure `y = C x + v`;
/// 4. filters predict and, on arrival, correct;
/// 5. `u = -K x̂` is applied and the plant advances with fresh `w`.
///
/// Every random number is drawn whether or not it is used, which keeps the
/// streams aligned across strategies.
pub fn run_closed_loop(sc: &Scenario, run: u64) -> Result<SimTrace, SimError> {
    sc.validate()?;
    let m = sc.num_agents();
    let mut rng = NoiseStreams::new(sc.seed, run, m);
    let w_factor: Vec<Mat> = sc.agents.iter().map(|a| psd_factor(&a.noise.w)).collect();
    let v_factor: Vec<Mat> = sc.agents.iter().map(|a| psd_factor(&a.noise.v)).collect();

    let mut x: Vec<Vector> = Vec::with_capacity(m);
    let mut filters: Vec<FilterState> = Vec::with_capacity(m);
    for (i, agent) in sc.agents.iter().enumerate() {
        x.push(rng.gaussian(i, Source::InitialState, &psd_factor(&agent.noise.x0)));
        filters.push(FilterState::initial(&agent.noise));
    }
    let mut u: Vec<Vector> = sc.agents.iter().map(|a| Vector::zeros(a.sys.input_dim())).collect();
    let mut plan: Option<Schedule> = None;
    let mut steps = Vec::with_capacity(sc.steps);

    for k in 0..sc.steps {
        let mut grants = vec![false; m];
        let mut arrived = vec![false; m];
        if k > 0 {
            let problem = planning_problem(sc, &filters, k)
                .map_err(|source| SimError::Solver { run, step: k, source })?;
            let outcome = receding_horizon_step(&problem, sc.strategy, plan.as_ref(), k)
                .map_err(|source| SimError::Solver { run, step: k, source })?;
            grants = outcome.grants;
            plan = Some(outcome.plan);

            for (i, agent) in sc.agents.iter().enumerate() {
                let draw = rng.uniform(i);
                arrived[i] = grants[i] && draw < sc.sigma.sigma(i, k);
                let v = rng.gaussian(i, Source::Measurement, &v_factor[i]);
                let y = &agent.sys.c * &x[i] + v;
                let (xbar, ebar) = predict(&filters[i], &agent.sys, &u[i], &agent.noise.w);
                filters[i] = update_realized(xbar, ebar, &y, arrived[i], &agent.sys.c, &agent.noise.v)
                    .map_err(|source| SimError::Estimation { run, step: k, source })?;
            }
        }

        let mut row = Vec::with_capacity(m);
        for (i, agent) in sc.agents.iter().enumerate() {
            let d = &agent.design;
            u[i] = d.control(&filters[i].xhat);
            row.push(AgentStep {
                x: x[i].clone(),
                xhat: filters[i].xhat.clone(),
                u: u[i].clone(),
                e: filters[i].e.clone(),
                delta: grants[i],
                s: arrived[i],
                sigma: sc.sigma.sigma(i, k),
                stage_cost: stage_cost(&x[i], &u[i], &d.weights),
                tr_gamma_e: trace_product(&d.gamma, &filters[i].e),
                tr_p_x: x[i].dot(&(&d.p * &x[i])),
            });
            let w = rng.gaussian(i, Source::Process, &w_factor[i]);
            x[i] = &agent.sys.a * &x[i] + &agent.sys.b * &u[i] + w;
        }
        steps.push(row);
    }
    Ok(SimTrace { scenario: sc.name.clone(), run, steps })
}

/// The allocation problem posed at step `k`, starting from the posteriors
/// of step `k - 1` and covering slots `k..=k+N`.
pub(crate) fn planning_problem(
    sc: &Scenario,
    filters: &[FilterState],
    k: usize,
) -> Result<AllocationProblem, crate::scheduler::ScheduleError> {
    let slots = sc.horizon + 1;
    let agents = sc.agents.iter().enumerate().map(|(i, a)| a.planning_agent(sc.planning_sigma(i, k, slots))).collect();
    let e_init = filters.iter().map(|f| f.e.clone()).collect();
    AllocationProblem::new(agents, e_init, sc.horizon, sc.capacity)
}
