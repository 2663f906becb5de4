// Scaling the second agent's LQR weights by `a²` leaves its gain unchanged
// but makes its estimation error `a²` times as expensive, so it is served
// more often.

use wncs::simulator::{monte_carlo, tuning2};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    println!("{:>4} {:>8} {:>8} {:>8}", "a", "grants1", "grants2", "r");
    for a in [1.0, 2.0, 4.0, 8.0] {
        let mut sc = tuning2(a)?;
        sc.steps = 60;
        let stats = monte_carlo(&sc)?;
        let r = stats.grant_ratio.unwrap_or(f64::NAN);
        println!("{a:>4} {:>8} {:>8} {r:>8.3}", stats.grants_mean[0], stats.grants_mean[1]);
    }
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    run_example()
}
