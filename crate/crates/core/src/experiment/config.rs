use crate::control::{LqrWeights, SystemMatrices};
use crate::estimation::NoiseModel;
use crate::linalg::Mat;
use crate::scheduler::Strategy;
use crate::simulator::{build_scenario, LinearAgent, Scenario, SigmaModel};
use serde::Deserialize;
use serde_json::Value;
use std::path::PathBuf;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse { line: usize, column: usize, message: String },
    #[error("{field}: {message}")]
    Validation { field: String, message: String },
}

impl ConfigError {
    fn invalid(field: &str, message: impl Into<String>) -> Self {
        Self::Validation { field: field.to_string(), message: message.into() }
    }
}

const KEYS: [&str; 12] =
    ["scenario", "strategy", "N", "gamma", "a", "seed", "runs", "steps", "loss_aware", "floor", "out", "emit_traces"];

/// A single value or a list of values.
#[derive(Debug, Clone, Deserialize)]
#[serde(untagged)]
enum OneOrMany<T> {
    One(T),
    Many(Vec<T>),
}

impl<T> OneOrMany<T> {
    fn into_vec(self) -> Vec<T> {
        match self {
            Self::One(v) => vec![v],
            Self::Many(v) => v,
        }
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConfig {
    scenario: Value,
    strategy: OneOrMany<Strategy>,
    #[serde(rename = "N")]
    horizons: Option<OneOrMany<usize>>,
    gamma: Option<OneOrMany<usize>>,
    a: Option<OneOrMany<f64>>,
    seed: Option<u64>,
    runs: Option<usize>,
    steps: Option<usize>,
    loss_aware: Option<OneOrMany<bool>>,
    floor: Option<f64>,
    out: Option<PathBuf>,
    emit_traces: Option<bool>,
}

/// Scenario selection: a library name or a full inline definition.
#[derive(Debug, Clone, PartialEq)]
pub enum ScenarioSpec {
    Named(String),
    Inline(Box<Scenario>),
}

/// Validated experiment description. Every parameter point of the
/// Cartesian product `a × γ × N × strategy × loss_aware` becomes one row.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub scenario: ScenarioSpec,
    pub strategies: Vec<Strategy>,
    pub horizons: Vec<usize>,
    pub capacities: Vec<usize>,
    pub a_values: Vec<f64>,
    pub loss_aware: Vec<bool>,
    pub seed: u64,
    pub runs: Option<usize>,
    pub steps: Option<usize>,
    /// Probability floor replacing that of a distance-driven channel.
    pub floor: Option<f64>,
    pub out: PathBuf,
    pub emit_traces: bool,
    /// SHA-256 of the canonical JSON form of the input.
    pub hash: String,
}

/// Parses and validates a JSON configuration.
pub fn parse_config(text: &str) -> Result<RunConfig, ConfigError> {
    let value: Value = serde_json::from_str(text).map_err(|e| ConfigError::Parse {
        line: e.line(),
        column: e.column(),
        message: e.to_string(),
    })?;
    let object = value.as_object().ok_or_else(|| ConfigError::invalid("config", "expected a JSON object"))?;
    if let Some(key) = object.keys().find(|k| !KEYS.contains(&k.as_str())) {
        return Err(ConfigError::invalid(key, "unknown key"));
    }
    let raw: RawConfig =
        serde_json::from_value(value.clone()).map_err(|e| ConfigError::invalid("config", e.to_string()))?;
    let hash = crate::experiment::sha256_hex(value.to_string().as_bytes());

    let scenario = match raw.scenario {
        Value::String(name) => ScenarioSpec::Named(name),
        inline @ Value::Object(_) => {
            let def: InlineScenario =
                serde_json::from_value(inline).map_err(|e| ConfigError::invalid("scenario", e.to_string()))?;
            ScenarioSpec::Inline(Box::new(def.build()?))
        }
        _ => return Err(ConfigError::invalid("scenario", "expected a name or an object")),
    };

    let cfg = RunConfig {
        scenario,
        strategies: raw.strategy.into_vec(),
        horizons: raw.horizons.map_or_else(Vec::new, OneOrMany::into_vec),
        capacities: raw.gamma.map_or_else(Vec::new, OneOrMany::into_vec),
        a_values: raw.a.map_or(vec![1.0], OneOrMany::into_vec),
        loss_aware: raw.loss_aware.map_or(vec![true], OneOrMany::into_vec),
        seed: raw.seed.unwrap_or(1),
        runs: raw.runs,
        steps: raw.steps,
        floor: raw.floor,
        out: raw.out.unwrap_or_else(|| PathBuf::from("results")),
        emit_traces: raw.emit_traces.unwrap_or(false),
        hash,
    };
    cfg.validate()?;
    Ok(cfg)
}

impl RunConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let sweeps = [
            ("strategy", self.strategies.is_empty()),
            ("N", self.horizons.is_empty()),
            ("gamma", self.capacities.is_empty()),
            ("a", self.a_values.is_empty()),
            ("loss_aware", self.loss_aware.is_empty()),
        ];
        if let Some((field, _)) = sweeps.iter().find(|(_, empty)| *empty) {
            return Err(ConfigError::invalid(field, "empty sweep"));
        }
        if self.capacities.contains(&0) {
            return Err(ConfigError::invalid("gamma", "capacity must be at least 1"));
        }
        if let Some(a) = self.a_values.iter().find(|a| !(a.is_finite() && **a > 0.0)) {
            return Err(ConfigError::invalid("a", format!("tuning parameter must be positive, got {a}")));
        }
        if self.runs == Some(0) {
            return Err(ConfigError::invalid("runs", "must be at least 1"));
        }
        if let Some(floor) = self.floor {
            if !(floor > 0.0 && floor <= 1.0) {
                return Err(ConfigError::invalid("floor", format!("must lie in (0, 1], got {floor}")));
            }
        }
        if self.out.is_file() {
            return Err(ConfigError::invalid("out", format!("{} is a file", self.out.display())));
        }

        let base = self.base_scenario(self.a_values[0])?;
        if self.a_values.len() > 1 && !base.name.starts_with("tuning") {
            return Err(ConfigError::invalid("a", "a sweep only applies to tuning scenarios"));
        }
        if self.floor.is_some() && !matches!(base.sigma, SigmaModel::Distance { .. }) {
            return Err(ConfigError::invalid("floor", "the scenario has no distance-driven channel"));
        }
        for &n in &self.horizons {
            let sc = self.scenario_at(self.a_values[0], self.capacities[0], n, self.strategies[0], true)?;
            sc.validate().map_err(|e| ConfigError::invalid("N", e.to_string()))?;
        }
        Ok(())
    }

    /// The scenario with every override applied except the sweep variables.
    pub fn base_scenario(&self, a: f64) -> Result<Scenario, ConfigError> {
        let mut sc = match &self.scenario {
            ScenarioSpec::Named(name) => {
                build_scenario(name, a).map_err(|e| ConfigError::invalid("scenario", e.to_string()))?
            }
            ScenarioSpec::Inline(sc) => (**sc).clone(),
        };
        sc.seed = self.seed;
        if let Some(runs) = self.runs {
            sc.runs = runs;
        }
        if let Some(steps) = self.steps {
            sc.steps = steps;
        }
        if let (Some(floor), SigmaModel::Distance { .. }) = (self.floor, &sc.sigma) {
            sc.sigma = SigmaModel::Distance { floor };
        }
        Ok(sc)
    }

    /// The scenario at one parameter point of the sweep.
    pub fn scenario_at(
        &self,
        a: f64,
        capacity: usize,
        horizon: usize,
        strategy: Strategy,
        loss_aware: bool,
    ) -> Result<Scenario, ConfigError> {
        let mut sc = self.base_scenario(a)?;
        sc.capacity = capacity;
        sc.horizon = horizon;
        sc.strategy = strategy;
        sc.loss_aware = loss_aware;
        Ok(sc)
    }
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InlineAgent {
    #[serde(rename = "A")]
    a: Vec<Vec<f64>>,
    #[serde(rename = "B")]
    b: Vec<Vec<f64>>,
    #[serde(rename = "C")]
    c: Option<Vec<Vec<f64>>>,
    #[serde(rename = "Q")]
    q: Vec<Vec<f64>>,
    #[serde(rename = "R")]
    r: Vec<Vec<f64>>,
    #[serde(rename = "S")]
    s: Option<Vec<Vec<f64>>>,
    #[serde(rename = "W")]
    w: Vec<Vec<f64>>,
    #[serde(rename = "V")]
    v: Vec<Vec<f64>>,
    #[serde(rename = "X0")]
    x0: Option<Vec<Vec<f64>>>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields, rename_all = "lowercase")]
enum InlineSigma {
    Constant(Vec<f64>),
    Distance { floor: f64 },
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct InlineScenario {
    name: String,
    agents: Vec<InlineAgent>,
    sigma: Option<InlineSigma>,
    steps: Option<usize>,
    runs: Option<usize>,
}

fn matrix(field: &str, rows: &[Vec<f64>]) -> Result<Mat, ConfigError> {
    let ncols = rows.first().map_or(0, Vec::len);
    if rows.is_empty() || ncols == 0 || rows.iter().any(|r| r.len() != ncols) {
        return Err(ConfigError::invalid(field, "expected a non-empty rectangular matrix"));
    }
    Ok(Mat::from_fn(rows.len(), ncols, |i, j| rows[i][j]))
}

impl InlineScenario {
    fn build(self) -> Result<Scenario, ConfigError> {
        if self.agents.is_empty() {
            return Err(ConfigError::invalid("scenario.agents", "at least one agent is required"));
        }
        let m = self.agents.len();
        let agents = self
            .agents
            .into_iter()
            .enumerate()
            .map(|(i, spec)| {
                let field = format!("scenario.agents[{i}]");
                let bad = |e: &dyn std::fmt::Display| ConfigError::invalid(&field, e.to_string());
                let a = matrix(&format!("{field}.A"), &spec.a)?;
                let n = a.nrows();
                let c = spec.c.as_deref().map_or_else(|| Ok(Mat::identity(n, n)), |c| matrix(&format!("{field}.C"), c))?;
                let sys = SystemMatrices::new(a, matrix(&format!("{field}.B"), &spec.b)?, c).map_err(|e| bad(&e))?;
                let q = matrix(&format!("{field}.Q"), &spec.q)?;
                let r = matrix(&format!("{field}.R"), &spec.r)?;
                let s = match &spec.s {
                    Some(s) => matrix(&format!("{field}.S"), s)?,
                    None => Mat::zeros(r.nrows(), q.nrows()),
                };
                let weights = LqrWeights::new(q, r, s).map_err(|e| bad(&e))?;
                let w = matrix(&format!("{field}.W"), &spec.w)?;
                let x0 = spec.x0.as_deref().map_or_else(|| Ok(w.clone()), |x| matrix(&format!("{field}.X0"), x))?;
                let noise = NoiseModel::new(w, matrix(&format!("{field}.V"), &spec.v)?, x0).map_err(|e| bad(&e))?;
                LinearAgent::lqr(sys, noise, weights).map_err(|e| bad(&e))
            })
            .collect::<Result<Vec<_>, _>>()?;
        let sigma = match self.sigma {
            None => SigmaModel::perfect(m),
            Some(InlineSigma::Constant(p)) => SigmaModel::Constant(p),
            Some(InlineSigma::Distance { floor }) => SigmaModel::Distance { floor },
        };
        Ok(Scenario {
            name: self.name,
            agents,
            capacity: 1,
            horizon: 1,
            steps: self.steps.unwrap_or(100),
            runs: self.runs.unwrap_or(1),
            seed: 1,
            sigma,
            strategy: Strategy::Baseline,
            loss_aware: true,
        })
    }
}
