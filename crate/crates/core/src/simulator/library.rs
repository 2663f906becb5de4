//! Named scenarios built on the sampled double integrator
//! `A = [[1, 0.1], [0, 1]]`, `B = [0.005, 0.1]ᵀ` with full-state
//! measurements, `Q = I`, `R = 0.01`.

use super::{LinearAgent, Scenario, SigmaModel, SimError};
use crate::control::{LqrWeights, SystemMatrices};
use crate::estimation::NoiseModel;
use crate::linalg::{mat_from_rows, Mat};
use crate::scheduler::Strategy;

/// Probability floors of the three lossy severity levels.
pub const LOSSY_FLOORS: [(&str, f64); 3] = [("mild", 0.9), ("moderate", 0.5), ("severe", 0.1)];

/// Name and one-line description of a library entry.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ScenarioInfo {
    pub name: &'static str,
    pub description: &'static str,
}

pub fn scenario_library() -> Vec<ScenarioInfo> {
    vec![
        ScenarioInfo { name: "identical4", description: "four identical agents, γ=1, perfect channel, exhaustive" },
        ScenarioInfo {
            name: "hetero<M>",
            description: "M agents (2 ≤ M ≤ 15) with process noise spread over [0.5, 2]·10⁻², relaxed",
        },
        ScenarioInfo { name: "tuning2", description: "two agents, the second with weights scaled by a², exhaustive" },
        ScenarioInfo { name: "lossy2", description: "two agents, p = exp(-d²), d = cos(0.1k + iπ/2), relaxed" },
        ScenarioInfo { name: "lossy2-mild", description: "lossy2 with probability floor 0.9" },
        ScenarioInfo { name: "lossy2-moderate", description: "lossy2 with probability floor 0.5" },
        ScenarioInfo { name: "lossy2-severe", description: "lossy2 with probability floor 0.1" },
    ]
}

/// Builds a library scenario by name. `a` is the weight scale of the
/// tuning family and is ignored elsewhere.
pub fn build_scenario(name: &str, a: f64) -> Result<Scenario, SimError> {
    if let Some(m) = name.strip_prefix("hetero") {
        let m: usize = m.parse().map_err(|_| unknown(name))?;
        return heterogeneous(m);
    }
    match name {
        "identical4" => identical4(),
        "tuning2" => tuning2(a),
        "lossy2" => lossy2((-1.0f64).exp()),
        _ => {
            let level = name.strip_prefix("lossy2-").ok_or_else(|| unknown(name))?;
            let (_, floor) = LOSSY_FLOORS.iter().find(|(n, _)| *n == level).ok_or_else(|| unknown(name))?;
            let mut sc = lossy2(*floor)?;
            sc.name = name.to_string();
            Ok(sc)
        }
    }
}

fn unknown(name: &str) -> SimError {
    SimError::InvalidScenario(format!("unknown scenario \"{name}\""))
}

pub fn double_integrator() -> SystemMatrices {
    SystemMatrices::new(mat_from_rows(&[&[1.0, 0.1], &[0.0, 1.0]]), mat_from_rows(&[&[0.005], &[0.1]]), eye())
        .expect("consistent dimensions")
}

pub fn default_weights() -> LqrWeights {
    LqrWeights::diagonal(eye(), Mat::from_element(1, 1, 0.01)).expect("valid weights")
}

fn eye() -> Mat {
    Mat::identity(2, 2)
}

/// Double-integrator agent with `W = w·I`, `V = v·I` and `X₀ = W`.
pub fn double_integrator_agent(w: f64, v: f64, weights: LqrWeights) -> Result<LinearAgent, SimError> {
    let noise = NoiseModel::new(eye() * w, eye() * v, eye() * w)?;
    LinearAgent::lqr(double_integrator(), noise, weights)
}

fn base(name: &str, agents: Vec<LinearAgent>, strategy: Strategy) -> Scenario {
    let m = agents.len();
    Scenario {
        name: name.to_string(),
        agents,
        capacity: 1,
        horizon: 4,
        steps: 100,
        runs: 1,
        seed: 1,
        sigma: SigmaModel::perfect(m),
        strategy,
        loss_aware: true,
    }
}

pub fn identical4() -> Result<Scenario, SimError> {
    let agents = (0..4).map(|_| double_integrator_agent(1e-2, 1e-3, default_weights())).collect::<Result<_, _>>()?;
    Ok(base("identical4", agents, Strategy::Exhaustive))
}

/// `m` agents whose process noise grows linearly from `0.5·10⁻²` to `2·10⁻²`.
pub fn heterogeneous(m: usize) -> Result<Scenario, SimError> {
    if !(2..=15).contains(&m) {
        return Err(SimError::InvalidScenario(format!("hetero needs 2 to 15 agents, got {m}")));
    }
    let agents = (0..m)
        .map(|i| {
            let w = 1e-2 * (0.5 + 1.5 * i as f64 / (m - 1) as f64);
            double_integrator_agent(w, 1e-3, default_weights())
        })
        .collect::<Result<_, _>>()?;
    let mut sc = base(&format!("hetero{m}"), agents, Strategy::Relaxed);
    sc.runs = 10;
    Ok(sc)
}

/// Two identical plants; the second uses `Q₂ = a²Q₁`, `R₂ = a²R₁`, which
/// keeps the gain and scales Γ by `a²`.
pub fn tuning2(a: f64) -> Result<Scenario, SimError> {
    if !(a.is_finite() && a > 0.0) {
        return Err(SimError::InvalidScenario(format!("tuning parameter a must be positive, got {a}")));
    }
    let agents = vec![
        double_integrator_agent(1e-2, 1e-3, default_weights())?,
        double_integrator_agent(1e-2, 1e-3, default_weights().scaled(a * a))?,
    ];
    Ok(base("tuning2", agents, Strategy::Exhaustive))
}

/// Two identical plants behind a channel whose success probability
/// oscillates between 1 and `floor`, out of phase between the agents.
pub fn lossy2(floor: f64) -> Result<Scenario, SimError> {
    let agents = (0..2).map(|_| double_integrator_agent(1e-2, 1e-3, default_weights())).collect::<Result<_, _>>()?;
    let mut sc = base("lossy2", agents, Strategy::Relaxed);
    sc.sigma = SigmaModel::Distance { floor };
    sc.horizon = 5;
    sc.runs = 100;
    Ok(sc)
}
