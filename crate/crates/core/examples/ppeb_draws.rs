// Seeded PPEB draws and the inclusion probabilities behind them.

use std::collections::BTreeMap;
use std::error::Error;

use marrop_audit::sampler::{draw, expected_distinct_batches};
use marrop_audit::{fixtures, inclusion_probability, ErrorBoundTable, RaceSet};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let election = fixtures::cartoon();
    let table = ErrorBoundTable::compute(&election, &RaceSet::all(&election)).published(4);
    let seq = draw(&table, 36, 20)?;

    let mut seen: BTreeMap<&str, usize> = BTreeMap::new();
    for b in &seq.draws {
        *seen.entry(b.as_str()).or_default() += 1;
    }
    println!("seed {}: 36 draws, {} distinct batches", seq.seed, seen.len());
    for (i, b) in seq.draws.iter().enumerate().take(8) {
        println!("  draw {:2}: {b}", i + 1);
    }
    println!(
        "expected distinct batches for n=36: {:.3}",
        expected_distinct_batches(&table, 36)
    );

    // the prefix of a longer sequence is the shorter one
    let longer = draw(&table, 50, 20)?;
    assert_eq!(longer.draws[..36], seq.draws[..]);

    for id in ["P001-IP", "P001-VBM", "P200-IP"] {
        let u = table.bound_for(id).ok_or("missing batch")?;
        println!("{id}: u = {u:.4}, P(in sample of 36) = {:.4}", inclusion_probability(u, table.total(), 36));
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
