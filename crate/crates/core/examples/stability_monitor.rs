// Checks the mean-square bound `limsup E{xᵀPx} ≤ ν/(1-α)` on four agents
// served by the fixed rotation.

use wncs::scheduler::Strategy;
use wncs::simulator::{identical4, lsp_bound_monitor, simulate_runs, LspBound};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut sc = identical4()?;
    sc.strategy = Strategy::Baseline;
    sc.runs = 20;

    let bound = LspBound::for_scenario(&sc, None)?;
    println!("α = {:.4}, μ = {:.4}, ν = {:.4}, bound = {:.4}", bound.alpha, bound.mu, bound.nu, bound.bound);

    let report = lsp_bound_monitor(&simulate_runs(&sc)?, bound, 10);
    for w in &report.windows {
        let flag = if w.flagged { "  exceeds" } else { "" };
        println!("steps {:>3}..{:<3} mean Σ xᵀPx = {:.4}{flag}", w.start, w.end, w.mean);
    }
    println!(
        "empirical limsup {:.4}, margin {:.4}, runs inside {:.0}%",
        report.empirical_limsup,
        report.margin,
        100.0 * report.fraction_inside
    );
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
