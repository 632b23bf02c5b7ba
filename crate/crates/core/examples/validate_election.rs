// Loads an election from its CSV bundle and prints a summary.
//
// `cargo run --example validate_election [DIR]` (default: the bundled cartoon).

use std::error::Error;
use std::path::PathBuf;

use marrop_audit::io::load_election_dir;

pub fn run_example() -> Result<(), Box<dyn Error>> {
    run(PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/cartoon"))
}

fn run(dir: PathBuf) -> Result<(), Box<dyn Error>> {
    let election = load_election_dir(&dir)?;

    let ballots: u64 = election.batches().iter().map(|b| b.total_ballots).sum();
    println!("{} batches, {} ballots, digest {}", election.batches().len(), ballots, &election.digest()[..16]);
    for (r, race) in election.races().iter().enumerate() {
        let outcome = election.outcome(r);
        let present = election.batches().iter().filter(|b| b.contains_race(r)).count();
        let winners: Vec<&str> = outcome.winners.iter().map(|&k| election.candidate_id(k)).collect();
        println!(
            "race {}: on {} batches, winners {:?}, smallest margin {}",
            race.race_id,
            present,
            winners,
            election.smallest_margin(r)
        );
        for (w, l, m) in election.pairs(r) {
            println!("  {} over {}: {}", election.candidate_id(w), election.candidate_id(l), m);
        }
    }
    Ok(())
}

#[allow(dead_code)]
fn main() {
    let result = match std::env::args().nth(1) {
        Some(dir) => run(PathBuf::from(dir)),
        None => run_example(),
    };
    if let Err(e) = result {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
