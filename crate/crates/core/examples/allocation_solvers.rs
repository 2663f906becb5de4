// The four schedulers on one allocation problem: three agents, one grant
// per slot, a five-slot plan.

use wncs::scheduler::{
    allocation_cost, baseline_round_robin, round_schedule, solve_exhaustive, solve_greedy_voi, solve_relaxed,
    AllocationProblem, RelaxedSchedule, Schedule,
};
use wncs::simulator::{default_weights, double_integrator_agent};

fn show(name: &str, s: &Schedule, cost: f64) {
    println!("{name:<10} cost {cost:.6}");
    for (i, row) in s.rows().iter().enumerate() {
        let bits: String = row.iter().map(|&b| if b { '1' } else { '.' }).collect();
        println!("  agent {i}: {bits}");
    }
}

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let horizon = 4;
    let mut agents = Vec::new();
    let mut e_init = Vec::new();
    for (w, sigma) in [(0.5e-2, 1.0), (1e-2, 0.8), (2e-2, 0.5)] {
        let agent = double_integrator_agent(w, 1e-3, default_weights())?;
        e_init.push(agent.noise.w.clone());
        agents.push(agent.planning_agent(vec![sigma; horizon + 1]));
    }
    let p = AllocationProblem::new(agents, e_init, horizon, 1)?;

    let (exact, exact_cost) = solve_exhaustive(&p)?;
    show("exhaustive", &exact, exact_cost);

    let (greedy, greedy_cost) = solve_greedy_voi(&p)?;
    show("greedy", &greedy, greedy_cost);

    let (relaxed, relaxed_cost) = solve_relaxed(&p, &RelaxedSchedule::uniform(3, horizon + 1, 1))?;
    let rounded = round_schedule(&relaxed, 1);
    println!("relaxed lower bound {relaxed_cost:.6}");
    show("rounded", &rounded, allocation_cost(&p, &rounded)?);

    let baseline = baseline_round_robin(3, 1, horizon, 0);
    show("baseline", &baseline, allocation_cost(&p, &baseline)?);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
