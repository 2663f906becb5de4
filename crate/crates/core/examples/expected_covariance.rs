// How the planner's covariance forecast reacts to the transmission weight
// `δσ`, and how it compares with the realized filter.

use wncs::estimation::{expected_cov_step, CovState};
use wncs::linalg::trace_product;
use wncs::simulator::{double_integrator_agent, default_weights};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let agent = double_integrator_agent(1e-2, 1e-3, default_weights())?;
    let gamma = &agent.design.gamma;

    for sigma in [1.0, 0.7, 0.3, 0.0] {
        let mut e = CovState(agent.noise.x0.clone());
        let mut prices = Vec::new();
        for _ in 0..6 {
            e = expected_cov_step(&e, 1.0, sigma, &agent.sys, &agent.noise)?;
            prices.push(trace_product(gamma, e.matrix()));
        }
        let row: Vec<String> = prices.iter().map(|p| format!("{p:.5}")).collect();
        println!("σ = {sigma:.1}: tr(ΓE) = {}", row.join("  "));
    }

    // Fractional weights interpolate linearly between silence and a sure
    // transmission for a fixed prior.
    let prior = CovState(agent.noise.x0.clone());
    let silent = expected_cov_step(&prior, 0.0, 1.0, &agent.sys, &agent.noise)?;
    let sent = expected_cov_step(&prior, 1.0, 1.0, &agent.sys, &agent.noise)?;
    let half = expected_cov_step(&prior, 0.5, 1.0, &agent.sys, &agent.noise)?;
    let midpoint = (silent.matrix() + sent.matrix()) * 0.5;
    println!("affine in δ: deviation {:.2e}", (half.matrix() - midpoint).amax());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
