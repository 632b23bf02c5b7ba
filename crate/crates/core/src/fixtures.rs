//! Built-in elections used by the examples and tests.

use std::collections::BTreeMap;

use crate::election::{BatchInput, Election, ElectionInput, RaceSpec};

fn two_candidate_race(id: &str) -> RaceSpec {
    RaceSpec {
        race_id: id.to_string(),
        allowed_votes: 1,
        candidate_ids: vec![format!("{id}-W"), format!("{id}-L")],
    }
}

/// The three-race county-sized illustration, as raw input.
///
/// 200 precincts, each split into an in-precinct batch (`Pnnn-IP`, 400
/// ballots) and a vote-by-mail batch (`Pnnn-VBM`, 200 ballots). Race A is on
/// every ballot; precincts 71-140 also carry race B, 141-170 race C and
/// 171-200 both B and C. Per-batch results are uniform: per 100 ballots,
/// A reports 50 / 45, B 50 / 40 and C 50 / 35.
pub fn cartoon_input() -> ElectionInput {
    let races = vec![
        two_candidate_race("A"),
        two_candidate_race("B"),
        two_candidate_race("C"),
    ];
    let loser_share = [("A", 45u64), ("B", 40), ("C", 35)];
    let mut batches = Vec::with_capacity(400);
    for precinct in 1..=200u32 {
        let mut present = vec!["A"];
        if (71..=140).contains(&precinct) || precinct >= 171 {
            present.push("B");
        }
        if precinct >= 141 {
            present.push("C");
        }
        for (kind, ballots) in [("IP", 400u64), ("VBM", 200)] {
            let mut reported = BTreeMap::new();
            for (race, loser) in loser_share.iter().filter(|(r, _)| present.contains(r)) {
                reported.insert(format!("{race}-W"), ballots / 2);
                reported.insert(format!("{race}-L"), ballots * loser / 100);
            }
            batches.push(BatchInput {
                batch_id: format!("P{precinct:03}-{kind}"),
                total_ballots: ballots,
                races: present.iter().map(|r| (r.to_string(), Some(ballots))).collect(),
                reported_votes: reported,
            });
        }
    }
    ElectionInput { races, batches }
}

pub fn cartoon() -> Election {
    Election::validate(&cartoon_input()).expect("cartoon fixture is valid")
}

/// A 20-batch desk-scale election: race X on every batch, race Y on the
/// first eight. Batches hold 100 ballots.
pub fn desk_input() -> ElectionInput {
    let races = vec![two_candidate_race("X"), two_candidate_race("Y")];
    let batches = (1..=20u64)
        .map(|i| {
            let mut races = BTreeMap::from([("X".to_string(), None)]);
            let mut reported = BTreeMap::from([
                ("X-W".to_string(), 52 + i % 5),
                ("X-L".to_string(), 40 + i % 3),
            ]);
            if i <= 8 {
                races.insert("Y".to_string(), None);
                reported.insert("Y-W".to_string(), 50 + i % 4);
                reported.insert("Y-L".to_string(), 41 + i % 2);
            }
            BatchInput {
                batch_id: format!("D{i:02}"),
                total_ballots: 100,
                races,
                reported_votes: reported,
            }
        })
        .collect();
    ElectionInput { races, batches }
}

pub fn desk() -> Election {
    Election::validate(&desk_input()).expect("desk fixture is valid")
}
