// Per-batch error bounds and the total bound U for each audited race set.

use std::error::Error;

use marrop_audit::{batch_marrop, fixtures, ErrorBoundTable, HandCount, RaceSet};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let election = fixtures::cartoon();
    let all = RaceSet::all(&election);
    let table = ErrorBoundTable::compute(&election, &all);

    // one precinct from each race composition, both batch kinds
    println!("batch     races   u_p");
    for precinct in [1, 71, 141, 171] {
        for kind in ["IP", "VBM"] {
            let id = format!("P{precinct:03}-{kind}");
            let b = election.batch(&id).ok_or("missing batch")?;
            let races: String = b.races_present().map(|r| election.races()[r].race_id.as_str()).collect();
            println!("{id:9} {races:7} {:.4}", table.bound_for(&id).unwrap_or(0.0));
        }
    }

    println!("U (all races) = {:.4}", table.total());
    println!("U (published at 4 decimals) = {:.4}", table.published(4).total());
    for r in 0..election.races().len() {
        let t = ErrorBoundTable::compute(&election, &RaceSet::single(&election, r));
        println!("U_{} = {:.4}", election.races()[r].race_id, t.total());
    }

    // a count that moves 10 votes from A's winner to its loser in P001-IP
    let p = election.batch_position("P001-IP").ok_or("missing batch")?;
    let mut hand: HandCount = election.reported_hand_count(p);
    *hand.actual_votes.get_mut("A-W").ok_or("no A-W")? -= 10;
    *hand.actual_votes.get_mut("A-L").ok_or("no A-L")? += 10;
    let e = batch_marrop(&election, &hand, &all)?;
    println!("P001-IP with 10 votes moved: e_p = {e:.6}, taint = {:.5}", e / table.bound(p));
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
