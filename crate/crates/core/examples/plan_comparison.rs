// Independent (FWER and PCER) audits against one simultaneous audit.
//
// `cargo run --example plan_comparison [ALPHA] [HYPOTHESIS]`, e.g. `0.25 5x0.04`.

use std::error::Error;

use marrop_audit::planner::{Columns, PlanOptions};
use marrop_audit::{compare_plans, fixtures, TaintHypothesis};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    run(0.25, "5x0.04".parse()?)
}

fn run(alpha: f64, hypothesis: TaintHypothesis) -> Result<(), Box<dyn Error>> {

    let election = fixtures::cartoon();
    let options = PlanOptions {
        bound_decimals: Some(4),
        ..PlanOptions::default()
    };
    let plan = compare_plans(&election, alpha, &hypothesis, &options)?;
    print!("{}", plan.render(Columns::Both));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let mut args = std::env::args().skip(1);
    let result = match (args.next(), args.next()) {
        (None, _) => run_example(),
        (Some(a), h) => a
            .parse::<f64>()
            .map_err(Box::<dyn Error>::from)
            .and_then(|a| Ok((a, h.as_deref().unwrap_or("5x0.04").parse::<TaintHypothesis>()?)))
            .and_then(|(a, h)| run(a, h)),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
