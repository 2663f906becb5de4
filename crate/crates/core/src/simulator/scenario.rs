use super::SimError;
use crate::control::{spectral_radius, ControllerDesign, LqrWeights, SystemMatrices};
use crate::estimation::NoiseModel;
use crate::scheduler::{PlanningAgent, Strategy};

/// One plant with its sensor noise and LQR controller.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearAgent {
    pub sys: SystemMatrices,
    pub noise: NoiseModel,
    pub design: ControllerDesign,
}

impl LinearAgent {
    /// Designs the controller from the DARE.
    pub fn lqr(sys: SystemMatrices, noise: NoiseModel, weights: LqrWeights) -> Result<Self, SimError> {
        let design = ControllerDesign::lqr(&sys, weights)?;
        Ok(Self { sys, noise, design })
    }

    pub fn state_dim(&self) -> usize {
        self.sys.state_dim()
    }

    /// The planner's view of this agent over `sigma.len()` slots.
    pub fn planning_agent(&self, sigma: Vec<f64>) -> PlanningAgent {
        PlanningAgent {
            gamma: self.design.gamma.clone(),
            a: self.sys.a.clone(),
            c: self.sys.c.clone(),
            w: self.noise.w.clone(),
            v: self.noise.v.clone(),
            sigma,
        }
    }
}

/// Probability that a granted transmission of agent `i` at step `k` arrives.
#[derive(Debug, Clone, PartialEq)]
pub enum SigmaModel {
    /// A fixed probability per agent.
    Constant(Vec<f64>),
    /// `p = floor^{d²}` with `d = cos(0.1 k + (i + 1) π / 2)`, so the
    /// probability oscillates between 1 and `floor`. `floor = e⁻¹` gives
    /// `p = exp(-d²)`.
    Distance { floor: f64 },
}

impl SigmaModel {
    pub fn perfect(agents: usize) -> Self {
        Self::Constant(vec![1.0; agents])
    }

    pub fn sigma(&self, agent: usize, step: usize) -> f64 {
        match self {
            Self::Constant(p) => p[agent],
            Self::Distance { floor } => {
                let d = (0.1 * step as f64 + (agent + 1) as f64 * std::f64::consts::FRAC_PI_2).cos();
                floor.powf(d * d)
            }
        }
    }
}

/// A complete closed-loop experiment.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub name: String,
    pub agents: Vec<LinearAgent>,
    /// Grants available per slot (γ).
    pub capacity: usize,
    /// Planning horizon N; each plan covers `N + 1` slots.
    pub horizon: usize,
    /// Simulated steps T.
    pub steps: usize,
    pub runs: usize,
    pub seed: u64,
    pub sigma: SigmaModel,
    pub strategy: Strategy,
    /// When false the planner assumes every granted packet arrives.
    pub loss_aware: bool,
}

impl Scenario {
    pub fn num_agents(&self) -> usize {
        self.agents.len()
    }

    /// Success probabilities the planner uses for slots `start..start+len`.
    pub fn planning_sigma(&self, agent: usize, start: usize, len: usize) -> Vec<f64> {
        (start..start + len)
            .map(|k| if self.loss_aware { self.sigma.sigma(agent, k) } else { 1.0 })
            .collect()
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let invalid = |msg: String| Err(SimError::InvalidScenario(msg));
        if self.agents.is_empty() {
            return invalid("at least one agent is required".into());
        }
        if self.capacity == 0 {
            return invalid("capacity must be at least 1".into());
        }
        if self.steps < self.horizon + 1 {
            return invalid(format!("steps ({}) must be at least horizon + 1 ({})", self.steps, self.horizon + 1));
        }
        if self.runs == 0 {
            return invalid("runs must be at least 1".into());
        }
        match &self.sigma {
            SigmaModel::Constant(p) => {
                if p.len() != self.agents.len() {
                    return invalid(format!("{} probabilities for {} agents", p.len(), self.agents.len()));
                }
                if let Some(bad) = p.iter().find(|p| !(0.0..=1.0).contains(*p)) {
                    return invalid(format!("success probability {bad} outside [0, 1]"));
                }
            }
            SigmaModel::Distance { floor } => {
                if !(*floor > 0.0 && *floor <= 1.0) {
                    return invalid(format!("probability floor {floor} outside (0, 1]"));
                }
            }
        }
        for (i, agent) in self.agents.iter().enumerate() {
            let n = agent.state_dim();
            let d = &agent.design;
            if agent.noise.w.nrows() != n || agent.noise.v.nrows() != agent.sys.output_dim() {
                return invalid(format!("agent {i}: noise dimensions do not match the plant"));
            }
            if d.k.shape() != (agent.sys.input_dim(), n) || d.p.shape() != (n, n) {
                return invalid(format!("agent {i}: controller dimensions do not match the plant"));
            }
            let rho = spectral_radius(&agent.sys.closed_loop(&d.k))?;
            if rho >= 1.0 {
                return invalid(format!("agent {i}: closed loop is not stable (spectral radius {rho})"));
            }
        }
        Ok(())
    }
}
