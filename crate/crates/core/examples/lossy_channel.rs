// Two agents orbiting a base station: when one is close the other is far.
// Planning with the true success probabilities is compared with planning
// as if the channel were perfect and with plain alternation.
//
// Pass the number of Monte Carlo runs as the first argument (default 20).

use wncs::scheduler::Strategy;
use wncs::simulator::{build_scenario, monte_carlo, MCStats, SimError};

fn evaluate(name: &str, strategy: Strategy, loss_aware: bool, runs: usize) -> Result<MCStats, SimError> {
    let mut sc = build_scenario(name, 1.0)?;
    sc.strategy = strategy;
    sc.loss_aware = loss_aware;
    sc.runs = runs;
    monte_carlo(&sc)
}

pub fn lossy_comparison(runs: usize) -> Result<(), Box<dyn std::error::Error>> {
    for name in ["lossy2-mild", "lossy2-moderate", "lossy2-severe"] {
        let baseline = evaluate(name, Strategy::Baseline, true, runs)?;
        let aware = evaluate(name, Strategy::Relaxed, true, runs)?;
        let unaware = evaluate(name, Strategy::Relaxed, false, runs)?;
        println!(
            "{name:<16} J/J_baseline: loss-aware {:.3} ± {:.3}, loss-unaware {:.3} ± {:.3}",
            aware.relative_to(&baseline),
            aware.j_stderr / baseline.j_mean,
            unaware.relative_to(&baseline),
            unaware.j_stderr / baseline.j_mean,
        );
    }
    Ok(())
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    lossy_comparison(4)
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let runs = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(20);
    lossy_comparison(runs)
}
