// A configuration-driven sweep, the same path the `wncs run` command takes.
//
// With a path argument the named JSON configuration is run as is;
// otherwise a reduced tuning sweep is written to a temporary directory.

use std::fs;
use wncs::experiment::{parse_config, run_experiment};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let dir = tempfile::tempdir()?;
    let mut cfg = parse_config(include_str!("configs/tuning2.json"))?;
    cfg.out = dir.path().to_path_buf();
    cfg.steps = Some(40);
    run_experiment(&cfg)?;
    print!("{}", fs::read_to_string(dir.path().join("results.csv"))?);
    Ok(())
}

fn main() -> Result<(), Box<dyn std::error::Error>> {
    match std::env::args().nth(1) {
        Some(path) => {
            let cfg = parse_config(&fs::read_to_string(path)?)?;
            run_experiment(&cfg)?;
            print!("{}", fs::read_to_string(cfg.out.join("results.csv"))?);
            Ok(())
        }
        None => run_example(),
    }
}
