mod validate_election {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/validate_election.rs"));
}

mod error_bounds {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/error_bounds.rs"));
}

mod ppeb_draws {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/ppeb_draws.rs"));
}

mod kaplan_markov {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/kaplan_markov.rs"));
}

mod plan_comparison {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/plan_comparison.rs"));
}

mod live_session {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/live_session.rs"));
}

mod risk_simulation {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/risk_simulation.rs"));
}

mod csv_roundtrip {
    include!(concat!(env!("CARGO_MANIFEST_DIR"), "/examples/csv_roundtrip.rs"));
}


#[test]
fn validate_election_runs() {
    validate_election::run_example().expect("validate_election example should run");
}

#[test]
fn error_bounds_runs() {
    error_bounds::run_example().expect("error_bounds example should run");
}

#[test]
fn ppeb_draws_runs() {
    ppeb_draws::run_example().expect("ppeb_draws example should run");
}

#[test]
fn kaplan_markov_runs() {
    kaplan_markov::run_example().expect("kaplan_markov example should run");
}

#[test]
fn plan_comparison_runs() {
    plan_comparison::run_example().expect("plan_comparison example should run");
}

#[test]
fn live_session_runs() {
    live_session::run_example().expect("live_session example should run");
}

#[test]
fn risk_simulation_runs() {
    risk_simulation::run_example().expect("risk_simulation example should run");
}

#[test]
fn csv_roundtrip_runs() {
    csv_roundtrip::run_example().expect("csv_roundtrip example should run");
}
