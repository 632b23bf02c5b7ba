//! Election structure, reported results and their validation.
//!
//! An [`Election`] is built from an [`ElectionInput`] by [`Election::validate`]
//! and is immutable afterwards. Validation derives candidate totals, the
//! apparent winner and loser sets of each race, and the pairwise margins used
//! to normalise every discrepancy.
//!
//! Batches are kept in canonical order (sorted by batch id). Candidates of a
//! race absent from a batch are not stored; their reported and actual votes
//! read as zero.

use std::collections::{BTreeMap, HashMap, HashSet};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ElectionError {
    #[error("duplicate {kind} id `{id}`")]
    DuplicateId { kind: &'static str, id: String },
    #[error("race `{race}` allows {allowed} votes but has {candidates} candidates; no losers exist")]
    TooFewCandidates {
        race: String,
        allowed: u32,
        candidates: usize,
    },
    #[error("race `{0}` must allow at least one vote")]
    NoAllowedVotes(String),
    #[error("unknown {kind} `{id}`")]
    UnknownReference { kind: &'static str, id: String },
    #[error("batch `{batch}`: {votes} votes for `{candidate}` exceed the ballot cap {cap}")]
    CandidateCapExceeded {
        batch: String,
        candidate: String,
        votes: u64,
        cap: u64,
    },
    #[error("batch `{batch}`: race `{race}` has {votes} votes, more than {allowed} x {cap} ballots allow")]
    RaceVotesExceeded {
        batch: String,
        race: String,
        votes: u64,
        allowed: u32,
        cap: u64,
    },
    #[error("batch `{batch}`: ballot cap {cap} for race `{race}` exceeds the batch total {total}")]
    CapAboveBatchTotal {
        batch: String,
        race: String,
        cap: u64,
        total: u64,
    },
    #[error("batch `{batch}`: no vote count for candidate `{candidate}`")]
    MissingVotes { batch: String, candidate: String },
    #[error("batch `{batch}`: candidate `{candidate}` belongs to race `{race}`, which is not on this batch")]
    RaceNotInBatch {
        batch: String,
        candidate: String,
        race: String,
    },
    #[error("race `{0}` does not appear in any batch")]
    RaceAbsentEverywhere(String),
    #[error("race `{race}`: tie at the winner boundary between `{winner}` and `{loser}` ({votes} votes each)")]
    TieAtBoundary {
        race: String,
        winner: String,
        loser: String,
        votes: u64,
    },
    #[error("`{0}` and `{1}` are not candidates in the same race")]
    NotSameRace(String, String),
    #[error("`{winner}` / `{loser}` is not an apparent winner / loser pair")]
    NotWinnerLoserPair { winner: String, loser: String },
    #[error("hand count for batch `{batch}`: {reason}")]
    HandCountInvalid { batch: String, reason: String },
}

/// One race: its candidates in canonical order and the number of votes a
/// voter may cast (also the number of seats).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RaceSpec {
    pub race_id: String,
    pub allowed_votes: u32,
    pub candidate_ids: Vec<String>,
}

/// Unvalidated batch description.
///
/// `races` maps each race on the batch's ballots to its ballot cap; `None`
/// means "use `total_ballots`".
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BatchInput {
    pub batch_id: String,
    pub total_ballots: u64,
    pub races: BTreeMap<String, Option<u64>>,
    pub reported_votes: BTreeMap<String, u64>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ElectionInput {
    pub races: Vec<RaceSpec>,
    pub batches: Vec<BatchInput>,
}

/// A validated batch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BatchSpec {
    pub batch_id: String,
    pub total_ballots: u64,
    /// Ballot cap per race index, `None` when the race is not on the batch.
    caps: Vec<Option<u64>>,
    /// Reported votes per candidate index; zero for absent races.
    reported: Vec<u64>,
}

impl BatchSpec {
    pub fn contains_race(&self, race: usize) -> bool {
        self.caps[race].is_some()
    }

    pub fn ballot_cap(&self, race: usize) -> Option<u64> {
        self.caps[race]
    }

    pub fn reported(&self, candidate: usize) -> u64 {
        self.reported[candidate]
    }

    /// Race indices present on this batch.
    pub fn races_present(&self) -> impl Iterator<Item = usize> + '_ {
        self.caps
            .iter()
            .enumerate()
            .filter_map(|(r, c)| c.map(|_| r))
    }
}

/// Apparent winners and losers of a race, as candidate indices, winners in
/// descending order of total.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RaceOutcome {
    pub winners: Vec<usize>,
    pub losers: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Election {
    races: Vec<RaceSpec>,
    batches: Vec<BatchSpec>,
    candidate_ids: Vec<String>,
    candidate_race: Vec<usize>,
    candidate_index: HashMap<String, usize>,
    race_index: HashMap<String, usize>,
    batch_index: HashMap<String, usize>,
    /// First candidate index of each race; candidates of a race are contiguous.
    race_offsets: Vec<usize>,
    totals: Vec<u64>,
    outcomes: Vec<RaceOutcome>,
}

impl Election {
    /// Checks `input` and derives totals, winners and margins.
    pub fn validate(input: &ElectionInput) -> Result<Election, ElectionError> {
        let mut race_index = HashMap::new();
        let mut candidate_index = HashMap::new();
        let mut candidate_ids = Vec::new();
        let mut candidate_race = Vec::new();
        let mut race_offsets = Vec::new();

        for (r, race) in input.races.iter().enumerate() {
            if race_index.insert(race.race_id.clone(), r).is_some() {
                return Err(ElectionError::DuplicateId {
                    kind: "race",
                    id: race.race_id.clone(),
                });
            }
            if race.allowed_votes == 0 {
                return Err(ElectionError::NoAllowedVotes(race.race_id.clone()));
            }
            if race.candidate_ids.len() <= race.allowed_votes as usize {
                return Err(ElectionError::TooFewCandidates {
                    race: race.race_id.clone(),
                    allowed: race.allowed_votes,
                    candidates: race.candidate_ids.len(),
                });
            }
            race_offsets.push(candidate_ids.len());
            for c in &race.candidate_ids {
                if candidate_index.insert(c.clone(), candidate_ids.len()).is_some() {
                    return Err(ElectionError::DuplicateId {
                        kind: "candidate",
                        id: c.clone(),
                    });
                }
                candidate_ids.push(c.clone());
                candidate_race.push(r);
            }
        }

        let mut sorted: Vec<&BatchInput> = input.batches.iter().collect();
        sorted.sort_by(|a, b| a.batch_id.cmp(&b.batch_id));

        let mut batches = Vec::with_capacity(sorted.len());
        let mut batch_index = HashMap::new();
        let mut race_seen = vec![false; input.races.len()];
        let mut totals = vec![0u64; candidate_ids.len()];

        for raw in sorted {
            if batch_index.insert(raw.batch_id.clone(), batches.len()).is_some() {
                return Err(ElectionError::DuplicateId {
                    kind: "batch",
                    id: raw.batch_id.clone(),
                });
            }
            let mut caps = vec![None; input.races.len()];
            for (race_id, cap) in &raw.races {
                let r = *race_index
                    .get(race_id)
                    .ok_or_else(|| ElectionError::UnknownReference {
                        kind: "race",
                        id: race_id.clone(),
                    })?;
                let cap = cap.unwrap_or(raw.total_ballots);
                if cap > raw.total_ballots {
                    return Err(ElectionError::CapAboveBatchTotal {
                        batch: raw.batch_id.clone(),
                        race: race_id.clone(),
                        cap,
                        total: raw.total_ballots,
                    });
                }
                caps[r] = Some(cap);
                race_seen[r] = true;
            }

            let mut reported = vec![0u64; candidate_ids.len()];
            for (cand, &votes) in &raw.reported_votes {
                let k = *candidate_index
                    .get(cand)
                    .ok_or_else(|| ElectionError::UnknownReference {
                        kind: "candidate",
                        id: cand.clone(),
                    })?;
                let r = candidate_race[k];
                let cap = caps[r].ok_or_else(|| ElectionError::RaceNotInBatch {
                    batch: raw.batch_id.clone(),
                    candidate: cand.clone(),
                    race: input.races[r].race_id.clone(),
                })?;
                if votes > cap {
                    return Err(ElectionError::CandidateCapExceeded {
                        batch: raw.batch_id.clone(),
                        candidate: cand.clone(),
                        votes,
                        cap,
                    });
                }
                reported[k] = votes;
            }

            for (r, race) in input.races.iter().enumerate() {
                let Some(cap) = caps[r] else { continue };
                let mut sum = 0u64;
                for c in &race.candidate_ids {
                    if !raw.reported_votes.contains_key(c) {
                        return Err(ElectionError::MissingVotes {
                            batch: raw.batch_id.clone(),
                            candidate: c.clone(),
                        });
                    }
                    sum += reported[candidate_index[c]];
                }
                if sum > u64::from(race.allowed_votes) * cap {
                    return Err(ElectionError::RaceVotesExceeded {
                        batch: raw.batch_id.clone(),
                        race: race.race_id.clone(),
                        votes: sum,
                        allowed: race.allowed_votes,
                        cap,
                    });
                }
            }

            for (t, v) in totals.iter_mut().zip(&reported) {
                *t += v;
            }
            batches.push(BatchSpec {
                batch_id: raw.batch_id.clone(),
                total_ballots: raw.total_ballots,
                caps,
                reported,
            });
        }

        if let Some(r) = race_seen.iter().position(|seen| !seen) {
            return Err(ElectionError::RaceAbsentEverywhere(
                input.races[r].race_id.clone(),
            ));
        }

        let outcomes = input
            .races
            .iter()
            .enumerate()
            .map(|(r, race)| derive_winners(race, race_offsets[r], &totals, &candidate_ids))
            .collect::<Result<Vec<_>, _>>()?;

        Ok(Election {
            races: input.races.clone(),
            batches,
            candidate_ids,
            candidate_race,
            candidate_index,
            race_index,
            batch_index,
            race_offsets,
            totals,
            outcomes,
        })
    }

    /// The raw input this election was validated from, in canonical order.
    pub fn to_input(&self) -> ElectionInput {
        let batches = self
            .batches
            .iter()
            .map(|b| BatchInput {
                batch_id: b.batch_id.clone(),
                total_ballots: b.total_ballots,
                races: b
                    .races_present()
                    .map(|r| (self.races[r].race_id.clone(), b.caps[r]))
                    .collect(),
                reported_votes: b
                    .races_present()
                    .flat_map(|r| self.race_candidates(r))
                    .map(|k| (self.candidate_ids[k].clone(), b.reported[k]))
                    .collect(),
            })
            .collect();
        ElectionInput {
            races: self.races.clone(),
            batches,
        }
    }

    /// SHA-256 of the canonical input, hex encoded. Sessions store it to
    /// refuse hand counts against a different election.
    pub fn digest(&self) -> String {
        let canonical = serde_json::to_vec(&self.to_input()).expect("election input serializes");
        hex::encode(Sha256::digest(&canonical))
    }

    pub fn races(&self) -> &[RaceSpec] {
        &self.races
    }

    pub fn batches(&self) -> &[BatchSpec] {
        &self.batches
    }

    pub fn batch(&self, batch_id: &str) -> Option<&BatchSpec> {
        self.batch_index.get(batch_id).map(|&i| &self.batches[i])
    }

    pub fn batch_position(&self, batch_id: &str) -> Option<usize> {
        self.batch_index.get(batch_id).copied()
    }

    pub fn race_position(&self, race_id: &str) -> Option<usize> {
        self.race_index.get(race_id).copied()
    }

    pub fn candidate_position(&self, candidate_id: &str) -> Option<usize> {
        self.candidate_index.get(candidate_id).copied()
    }

    pub fn candidate_id(&self, k: usize) -> &str {
        &self.candidate_ids[k]
    }

    pub fn candidate_race(&self, k: usize) -> usize {
        self.candidate_race[k]
    }

    /// Candidate indices of race `r`.
    pub fn race_candidates(&self, r: usize) -> std::ops::Range<usize> {
        let start = self.race_offsets[r];
        start..start + self.races[r].candidate_ids.len()
    }

    pub fn num_candidates(&self) -> usize {
        self.candidate_ids.len()
    }

    /// Reported total V_k.
    pub fn total(&self, k: usize) -> u64 {
        self.totals[k]
    }

    pub fn outcome(&self, r: usize) -> &RaceOutcome {
        &self.outcomes[r]
    }

    /// Winner/loser index pairs of race `r` with their reported margin.
    pub fn pairs(&self, r: usize) -> impl Iterator<Item = (usize, usize, u64)> + '_ {
        let o = &self.outcomes[r];
        o.winners.iter().flat_map(move |&w| {
            o.losers
                .iter()
                .map(move |&l| (w, l, self.totals[w] - self.totals[l]))
        })
    }

    /// The reported margin V_w - V_l of an apparent winner over an apparent
    /// loser of the same race.
    pub fn pairwise_margin(&self, winner: &str, loser: &str) -> Result<u64, ElectionError> {
        let unknown = |id: &str| ElectionError::UnknownReference {
            kind: "candidate",
            id: id.to_string(),
        };
        let w = self.candidate_position(winner).ok_or_else(|| unknown(winner))?;
        let l = self.candidate_position(loser).ok_or_else(|| unknown(loser))?;
        let r = self.candidate_race[w];
        if self.candidate_race[l] != r {
            return Err(ElectionError::NotSameRace(winner.into(), loser.into()));
        }
        let o = &self.outcomes[r];
        if !o.winners.contains(&w) || !o.losers.contains(&l) {
            return Err(ElectionError::NotWinnerLoserPair {
                winner: winner.into(),
                loser: loser.into(),
            });
        }
        Ok(self.totals[w] - self.totals[l])
    }

    /// Smallest reported margin in race `r`: lowest winner over highest loser.
    pub fn smallest_margin(&self, r: usize) -> u64 {
        let o = &self.outcomes[r];
        let w = *o.winners.last().expect("race has winners");
        let l = o.losers[0];
        self.totals[w] - self.totals[l]
    }

    /// Checks a hand count against this election and returns actual votes per
    /// candidate index (zero outside the batch's races).
    pub fn resolve_hand_count(&self, hand: &HandCount) -> Result<(usize, Vec<u64>), ElectionError> {
        let invalid = |reason: String| ElectionError::HandCountInvalid {
            batch: hand.batch_id.clone(),
            reason,
        };
        let p = self
            .batch_position(&hand.batch_id)
            .ok_or_else(|| ElectionError::UnknownReference {
                kind: "batch",
                id: hand.batch_id.clone(),
            })?;
        let batch = &self.batches[p];
        let mut actual = vec![0u64; self.num_candidates()];
        let mut seen = HashSet::new();
        for (cand, &votes) in &hand.actual_votes {
            let k = self
                .candidate_position(cand)
                .ok_or_else(|| invalid(format!("unknown candidate `{cand}`")))?;
            let r = self.candidate_race[k];
            let cap = batch.caps[r].ok_or_else(|| {
                invalid(format!(
                    "candidate `{cand}` is in race `{}`, which is not on this batch",
                    self.races[r].race_id
                ))
            })?;
            if votes > cap {
                return Err(invalid(format!(
                    "{votes} votes for `{cand}` exceed the ballot cap {cap}"
                )));
            }
            actual[k] = votes;
            seen.insert(k);
        }
        for r in batch.races_present() {
            let cap = batch.caps[r].unwrap_or(0);
            let mut sum = 0;
            for k in self.race_candidates(r) {
                if !seen.contains(&k) {
                    return Err(invalid(format!(
                        "no count for candidate `{}`",
                        self.candidate_ids[k]
                    )));
                }
                sum += actual[k];
            }
            let allowed = u64::from(self.races[r].allowed_votes);
            if sum > allowed * cap {
                return Err(invalid(format!(
                    "race `{}` has {sum} votes, more than {allowed} x {cap} ballots allow",
                    self.races[r].race_id
                )));
            }
        }
        Ok((p, actual))
    }

    /// A hand count equal to the reported votes of a batch.
    pub fn reported_hand_count(&self, p: usize) -> HandCount {
        let batch = &self.batches[p];
        HandCount {
            batch_id: batch.batch_id.clone(),
            actual_votes: batch
                .races_present()
                .flat_map(|r| self.race_candidates(r))
                .map(|k| (self.candidate_ids[k].clone(), batch.reported[k]))
                .collect(),
        }
    }

    /// Number of voting possibilities in a batch for the given races:
    /// the sum of ballot caps of those races present.
    pub fn vote_capacity(&self, p: usize, races: &RaceSet) -> u64 {
        let batch = &self.batches[p];
        races
            .indices()
            .filter_map(|r| batch.caps[r])
            .sum()
    }

    /// Resolves race ids to a [`RaceSet`]; an empty list selects every race.
    pub fn race_set<S: AsRef<str>>(&self, ids: &[S]) -> Result<RaceSet, ElectionError> {
        if ids.is_empty() {
            return Ok(RaceSet::all(self));
        }
        let mut members = vec![false; self.races.len()];
        for id in ids {
            let r = self
                .race_position(id.as_ref())
                .ok_or_else(|| ElectionError::UnknownReference {
                    kind: "race",
                    id: id.as_ref().to_string(),
                })?;
            members[r] = true;
        }
        Ok(RaceSet { members })
    }

    pub fn race_ids(&self, races: &RaceSet) -> Vec<String> {
        races
            .indices()
            .map(|r| self.races[r].race_id.clone())
            .collect()
    }
}

/// Winners are the `allowed_votes` candidates with the highest totals.
fn derive_winners(
    race: &RaceSpec,
    offset: usize,
    totals: &[u64],
    ids: &[String],
) -> Result<RaceOutcome, ElectionError> {
    let mut order: Vec<usize> = (offset..offset + race.candidate_ids.len()).collect();
    // stable: ties keep canonical order, only the boundary tie is an error
    order.sort_by(|&a, &b| totals[b].cmp(&totals[a]));
    let seats = race.allowed_votes as usize;
    let (last_w, first_l) = (order[seats - 1], order[seats]);
    if totals[last_w] == totals[first_l] {
        return Err(ElectionError::TieAtBoundary {
            race: race.race_id.clone(),
            winner: ids[last_w].clone(),
            loser: ids[first_l].clone(),
            votes: totals[last_w],
        });
    }
    let losers = order.split_off(seats);
    Ok(RaceOutcome {
        winners: order,
        losers,
    })
}

/// A subset of an election's races, by race index.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct RaceSet {
    members: Vec<bool>,
}

impl RaceSet {
    pub fn all(election: &Election) -> RaceSet {
        RaceSet {
            members: vec![true; election.races.len()],
        }
    }

    pub fn single(election: &Election, r: usize) -> RaceSet {
        let mut members = vec![false; election.races.len()];
        members[r] = true;
        RaceSet { members }
    }

    pub fn contains(&self, r: usize) -> bool {
        self.members.get(r).copied().unwrap_or(false)
    }

    pub fn indices(&self) -> impl Iterator<Item = usize> + '_ {
        self.members
            .iter()
            .enumerate()
            .filter_map(|(r, &m)| m.then_some(r))
    }

    pub fn len(&self) -> usize {
        self.members.iter().filter(|&&m| m).count()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Votes found by hand in one batch, per candidate of the races on it.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HandCount {
    pub batch_id: String,
    pub actual_votes: BTreeMap<String, u64>,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn race(id: &str, f: u32, cands: &[&str]) -> RaceSpec {
        RaceSpec {
            race_id: id.into(),
            allowed_votes: f,
            candidate_ids: cands.iter().map(|c| c.to_string()).collect(),
        }
    }

    fn batch(id: &str, total: u64, races: &[(&str, Option<u64>)], votes: &[(&str, u64)]) -> BatchInput {
        BatchInput {
            batch_id: id.into(),
            total_ballots: total,
            races: races.iter().map(|(r, c)| (r.to_string(), *c)).collect(),
            reported_votes: votes.iter().map(|(c, v)| (c.to_string(), *v)).collect(),
        }
    }

    fn one_race(votes: &[(&str, u64)], f: u32) -> ElectionInput {
        let cands: Vec<&str> = votes.iter().map(|(c, _)| *c).collect();
        ElectionInput {
            races: vec![race("R", f, &cands)],
            batches: vec![batch("b1", 100, &[("R", None)], votes)],
        }
    }

    #[test]
    fn single_batch_within_caps() {
        let e = Election::validate(&one_race(&[("x", 60), ("y", 30)], 1)).unwrap();
        assert_eq!(e.batches().len(), 1);
        assert_eq!(e.pairwise_margin("x", "y").unwrap(), 30);
        assert_eq!(e.batches()[0].ballot_cap(0), Some(100));
    }

    #[test]
    fn cap_violation() {
        let input = ElectionInput {
            races: vec![race("A", 1, &["w", "l"])],
            batches: vec![batch("b", 400, &[("A", Some(400))], &[("w", 401), ("l", 0)])],
        };
        assert!(matches!(
            Election::validate(&input),
            Err(ElectionError::CandidateCapExceeded { votes: 401, cap: 400, .. })
        ));
    }

    #[test]
    fn multi_seat_winners() {
        let e = Election::validate(&one_race(&[("a", 8), ("b", 10), ("c", 1), ("d", 5)], 2)).unwrap();
        let o = e.outcome(0);
        let names: Vec<&str> = o.winners.iter().map(|&k| e.candidate_id(k)).collect();
        assert_eq!(names, ["b", "a"]);
        assert_eq!(o.losers.len(), 2);
        assert_eq!(e.smallest_margin(0), 3);
    }

    #[test]
    fn boundary_tie() {
        assert!(matches!(
            Election::validate(&one_race(&[("a", 10), ("b", 10)], 1)),
            Err(ElectionError::TieAtBoundary { votes: 10, .. })
        ));
        // ties away from the boundary are fine
        Election::validate(&one_race(&[("a", 10), ("b", 3), ("c", 3)], 1)).unwrap();
    }

    #[test]
    fn margin_errors() {
        let input = ElectionInput {
            races: vec![race("A", 1, &["a1", "a2"]), race("B", 1, &["b1", "b2"])],
            batches: vec![batch(
                "p",
                10,
                &[("A", None), ("B", None)],
                &[("a1", 5), ("a2", 3), ("b1", 4), ("b2", 2)],
            )],
        };
        let e = Election::validate(&input).unwrap();
        assert!(matches!(e.pairwise_margin("a1", "b2"), Err(ElectionError::NotSameRace(..))));
        assert!(matches!(
            e.pairwise_margin("a2", "a1"),
            Err(ElectionError::NotWinnerLoserPair { .. })
        ));
    }

    #[test]
    fn structural_errors() {
        let mut input = one_race(&[("x", 1), ("y", 0)], 1);
        input.races[0].candidate_ids.push("x".into());
        assert!(matches!(
            Election::validate(&input),
            Err(ElectionError::DuplicateId { kind: "candidate", .. })
        ));

        let input = ElectionInput {
            races: vec![race("A", 1, &["a1", "a2"]), race("B", 1, &["b1", "b2"])],
            batches: vec![batch("p", 10, &[("A", None)], &[("a1", 5), ("a2", 3)])],
        };
        assert_eq!(
            Election::validate(&input),
            Err(ElectionError::RaceAbsentEverywhere("B".into()))
        );

        let input = one_race(&[("x", 1)], 1);
        assert!(matches!(
            Election::validate(&input),
            Err(ElectionError::TooFewCandidates { .. })
        ));

        let mut input = one_race(&[("x", 5), ("y", 1)], 1);
        input.batches[0].reported_votes.remove("y");
        assert!(matches!(Election::validate(&input), Err(ElectionError::MissingVotes { .. })));

        let mut input = one_race(&[("x", 70), ("y", 50)], 1);
        input.batches[0].races.insert("R".into(), Some(100));
        assert!(matches!(
            Election::validate(&input),
            Err(ElectionError::RaceVotesExceeded { votes: 120, .. })
        ));
    }

    #[test]
    fn hand_count_checks() {
        let e = Election::validate(&one_race(&[("x", 60), ("y", 30)], 1)).unwrap();
        let mut h = e.reported_hand_count(0);
        assert!(e.resolve_hand_count(&h).is_ok());
        h.actual_votes.insert("y".into(), 101);
        assert!(e.resolve_hand_count(&h).is_err());
        h.actual_votes.remove("y");
        assert!(e.resolve_hand_count(&h).is_err());
    }

    #[test]
    fn revalidation_is_identity() {
        let input = ElectionInput {
            races: vec![race("A", 1, &["a1", "a2"]), race("B", 1, &["b1", "b2"])],
            batches: vec![
                batch("q", 10, &[("A", None), ("B", Some(8))], &[("a1", 5), ("a2", 3), ("b1", 4), ("b2", 2)]),
                batch("p", 10, &[("A", Some(10))], &[("a1", 5), ("a2", 3)]),
            ],
        };
        let e = Election::validate(&input).unwrap();
        let again = Election::validate(&e.to_input()).unwrap();
        assert_eq!(e, again);
        assert_eq!(e.batches()[0].batch_id, "p");
    }
}
