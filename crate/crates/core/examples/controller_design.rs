// LQR design for the sampled double integrator, the error price Γ, and the
// inverse problem of recovering weights from a given gain.

use wncs::control::{dare_residuals, lqr_from_gain, solve_dare, spectral_radius, ControllerDesign};
use wncs::simulator::{default_weights, double_integrator};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let sys = double_integrator();
    let weights = default_weights();
    let design = ControllerDesign::lqr(&sys, weights.clone())?;
    let (riccati, gain) = dare_residuals(&sys, &weights, &design.p, &design.k);
    println!("K = {:.6}", design.k);
    println!("P = {:.6}", design.p);
    println!("Γ = {:.6}", design.gamma);
    println!("residuals: Riccati {riccati:.2e}, gain {gain:.2e}");
    println!("closed-loop spectral radius {:.6}", spectral_radius(&sys.closed_loop(&design.k))?);

    // Any stabilizing gain is LQR-optimal for Q = KᵀK, R = I, S = K.
    let inverse = lqr_from_gain(&sys, &design.k)?;
    let (_, recovered) = solve_dare(&sys, &inverse)?;
    println!("gain recovered from inverse weights, error {:.2e}", (&recovered - &design.k).amax());
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
