// Monte Carlo check of the risk limit on a small election with a wrong
// reported outcome.

use std::error::Error;

use marrop_audit::simulate::outcome_oracle;
use marrop_audit::{fixtures, plant_errors, simulate, SimulationConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let election = fixtures::desk();
    let config = SimulationConfig {
        races: vec![],
        risk_limit: 0.25,
        planned_draws: 40,
        trials: 2000,
        seed: 7,
        bound_decimals: None,
    };
    for race in ["X", "Y"] {
        let truth = plant_errors(&election, race, 1.05, 4, 11)?;
        let oracle = outcome_oracle(&election, &truth)?;
        println!("race {race} flipped: E = {:.4}, outcomes all correct: {}", oracle.total_marrop, oracle.all_correct);
        let report = simulate(&election, &truth, &config)?;
        print!("{report}");
        println!("within alpha + 3 sigma ({:.4}): {}\n", report.risk_band(), report.certify_rate <= report.risk_band());
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
