//! JSON shapes served to the console.

use std::collections::BTreeMap;

use marrop_audit::{AuditSession, Election, Projection, SessionStatus, TaintRecord};
use serde::Serialize;

#[derive(Debug, Serialize)]
pub struct CandidateView {
    pub candidate_id: String,
    pub total: u64,
}

#[derive(Debug, Serialize)]
pub struct MarginView {
    pub winner: String,
    pub loser: String,
    pub margin: u64,
}

#[derive(Debug, Serialize)]
pub struct RaceView {
    pub race_id: String,
    pub allowed_votes: u32,
    pub batch_count: usize,
    pub candidates: Vec<CandidateView>,
    pub winners: Vec<String>,
    pub losers: Vec<String>,
    pub margins: Vec<MarginView>,
    pub smallest_margin: u64,
}

#[derive(Debug, Serialize)]
pub struct BatchView {
    pub batch_id: String,
    pub total_ballots: u64,
    /// Ballot cap per race on the batch.
    pub caps: BTreeMap<String, u64>,
}

#[derive(Debug, Serialize)]
pub struct ElectionSummary {
    pub election_id: String,
    pub digest: String,
    pub batch_count: usize,
    pub race_count: usize,
    pub total_ballots: u64,
    pub races: Vec<RaceView>,
    pub batches: Vec<BatchView>,
}

impl ElectionSummary {
    pub fn new(election_id: &str, e: &Election) -> ElectionSummary {
        let ids = |ks: &[usize]| ks.iter().map(|&k| e.candidate_id(k).to_string()).collect();
        let races = e
            .races()
            .iter()
            .enumerate()
            .map(|(r, race)| {
                let o = e.outcome(r);
                RaceView {
                    race_id: race.race_id.clone(),
                    allowed_votes: race.allowed_votes,
                    batch_count: e.batches().iter().filter(|b| b.contains_race(r)).count(),
                    candidates: e
                        .race_candidates(r)
                        .map(|k| CandidateView {
                            candidate_id: e.candidate_id(k).to_string(),
                            total: e.total(k),
                        })
                        .collect(),
                    winners: ids(&o.winners),
                    losers: ids(&o.losers),
                    margins: e
                        .pairs(r)
                        .map(|(w, l, m)| MarginView {
                            winner: e.candidate_id(w).to_string(),
                            loser: e.candidate_id(l).to_string(),
                            margin: m,
                        })
                        .collect(),
                    smallest_margin: e.smallest_margin(r),
                }
            })
            .collect();
        let batches = e
            .batches()
            .iter()
            .map(|b| BatchView {
                batch_id: b.batch_id.clone(),
                total_ballots: b.total_ballots,
                caps: b
                    .races_present()
                    .map(|r| (e.races()[r].race_id.clone(), b.ballot_cap(r).unwrap_or(b.total_ballots)))
                    .collect(),
            })
            .collect();
        ElectionSummary {
            election_id: election_id.to_string(),
            digest: e.digest(),
            batch_count: e.batches().len(),
            race_count: e.races().len(),
            total_ballots: e.batches().iter().map(|b| b.total_ballots).sum(),
            races,
            batches,
        }
    }
}

#[derive(Debug, Serialize)]
pub struct DrawView {
    pub draw_index: u64,
    pub batch_id: String,
    pub bound: f64,
    pub recorded: bool,
}

#[derive(Debug, Serialize)]
pub struct EntryCandidate {
    pub candidate_id: String,
    pub reported: u64,
}

#[derive(Debug, Serialize)]
pub struct EntryRace {
    pub race_id: String,
    pub allowed_votes: u32,
    pub cap: u64,
    pub candidates: Vec<EntryCandidate>,
}

/// What the count-entry form needs for the next pending draw.
#[derive(Debug, Serialize)]
pub struct PendingEntry {
    pub draw_index: u64,
    pub batch_id: String,
    pub bound: f64,
    pub total_ballots: u64,
    pub races: Vec<EntryRace>,
}

#[derive(Debug, Serialize)]
pub struct Decision {
    pub status: SessionStatus,
    pub line: String,
    pub escalation_recommended: bool,
    pub can_certify: bool,
}

#[derive(Debug, Serialize)]
pub struct SessionView {
    pub risk_limit: f64,
    pub seed: u64,
    pub audited_races: Vec<String>,
    pub bound_decimals: Option<u32>,
    pub total_bound: f64,
    pub planned_draws: usize,
    pub current_p: f64,
    pub status: SessionStatus,
    pub draws: Vec<DrawView>,
    pub records: Vec<TaintRecord>,
    pub next_pending: Option<PendingEntry>,
}

#[derive(Debug, Serialize)]
pub struct SessionResource {
    pub session_id: String,
    pub election_id: String,
    pub version: u64,
    pub session: SessionView,
    pub decision: Decision,
    pub projections: Projection,
}

impl SessionResource {
    pub fn new(session_id: &str, election_id: &str, version: u64, s: &AuditSession, e: &Election) -> SessionResource {
        let recorded = s.records().len();
        let next_pending = s.next_pending().and_then(|(j, b)| {
            let batch = e.batch(b)?;
            let p = e.batch_position(b)?;
            Some(PendingEntry {
                draw_index: j,
                batch_id: b.to_string(),
                bound: s.bounds().bound_for(b)?,
                total_ballots: batch.total_ballots,
                races: batch
                    .races_present()
                    .map(|r| EntryRace {
                        race_id: e.races()[r].race_id.clone(),
                        allowed_votes: e.races()[r].allowed_votes,
                        cap: batch.ballot_cap(r).unwrap_or(batch.total_ballots),
                        candidates: e
                            .race_candidates(r)
                            .map(|k| EntryCandidate {
                                candidate_id: e.candidate_id(k).to_string(),
                                reported: e.batches()[p].reported(k),
                            })
                            .collect(),
                    })
                    .collect(),
            })
        });
        SessionResource {
            session_id: session_id.to_string(),
            election_id: election_id.to_string(),
            version,
            session: SessionView {
                risk_limit: s.risk_limit(),
                seed: s.seed(),
                audited_races: s.bounds().audited_races().to_vec(),
                bound_decimals: s.bounds().decimals(),
                total_bound: s.total_bound(),
                planned_draws: s.planned_draws(),
                current_p: s.current_p(),
                status: s.status(),
                draws: s
                    .draws()
                    .iter()
                    .enumerate()
                    .map(|(i, b)| DrawView {
                        draw_index: i as u64 + 1,
                        batch_id: b.clone(),
                        bound: s.bounds().bound_for(b).unwrap_or(0.0),
                        recorded: i < recorded,
                    })
                    .collect(),
                records: s.records().to_vec(),
                next_pending,
            },
            decision: Decision {
                status: s.status(),
                line: s.decision_line(),
                escalation_recommended: s.escalation_recommended(),
                can_certify: s.status() == SessionStatus::Certifiable,
            },
            projections: s.projection(e),
        }
    }
}
