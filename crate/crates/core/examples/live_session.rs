// A full session: open, enter hand counts, persist, reload, decide.
//
// The first five counted batches each overstate race A's margin by the
// number of votes that gives a taint close to 0.04.

use std::error::Error;

use marrop_audit::io::{load_session, save_session};
use marrop_audit::{fixtures, AuditSession, SessionConfig};

pub fn run_example() -> Result<(), Box<dyn Error>> {
    let election = fixtures::cartoon();
    let config = SessionConfig {
        races: vec![],
        risk_limit: 0.25,
        seed: 20,
        planned_draws: 36,
        bound_decimals: Some(4),
    };
    let mut session = AuditSession::open(&election, &config)?;
    println!("U = {:.4}, {} draws planned", session.total_bound(), session.draws().len());

    let mut overstated = 0;
    while let Some((j, batch)) = session.next_pending().map(|(j, b)| (j, b.to_string())) {
        let p = election.batch_position(&batch).ok_or("unknown batch")?;
        let mut hand = election.reported_hand_count(p);
        if overstated < 5 {
            let u = session.bounds().bound(p);
            let margin = election.pairwise_margin("A-W", "A-L")? as f64;
            let k = (0.04 * u * margin).round() as u64;
            *hand.actual_votes.get_mut("A-W").ok_or("no A-W")? -= k;
            overstated += 1;
        }
        session.record_batch(&election, &hand)?;
        let rec = session.records().last().ok_or("no record")?;
        if j <= 6 || session.next_pending().is_none() {
            println!("draw {j:2} {batch:9} taint {:.5}  P {:.4}", rec.taint, session.current_p());
        }
    }

    let saved = save_session(&session);
    let reloaded = load_session(&saved)?;
    assert_eq!(reloaded, session);
    let (batches, ballots) = reloaded.counted(&election);
    println!("counted {batches} batches ({ballots} ballots)");
    println!("{}", reloaded.decision_line());
    Ok(())
}

#[allow(dead_code)]
fn main() {
    if let Err(e) = run_example() {
        eprintln!("error: {e}");
        std::process::exit(1);
    }
}
