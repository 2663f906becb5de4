// Four identical agents sharing one slot. The receding-horizon exhaustive
// planner settles into a round robin.

use wncs::simulator::{closed_loop_cost, identical4, run_closed_loop};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let mut sc = identical4()?;
    sc.steps = 40;
    let trace = run_closed_loop(&sc, 0)?;

    let served: String = (1..trace.num_steps())
        .map(|k| match trace.grant_column(k).iter().position(|&g| g) {
            Some(i) => char::from(b'0' + i as u8),
            None => '-',
        })
        .collect();
    println!("agent served at steps 1..{}: {served}", trace.num_steps() - 1);
    println!("grants per agent: {:?}", trace.grants());

    let cost = closed_loop_cost(&trace);
    println!("J = {:.6}, Σ tr(ΓE) = {:.6}", cost.j, cost.trace_cost);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
