#![allow(dead_code)]

use std::collections::BTreeMap;

use marrop_audit::{BatchInput, Election, ElectionInput, HandCount, RaceSpec};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Votes for `candidates` under a cap of `cap` ballots with `allowed` votes
/// per ballot: each candidate at most `cap`, the sum at most `allowed * cap`.
pub fn valid_votes(rng: &mut ChaCha20Rng, candidates: usize, cap: u64, allowed: u32) -> Vec<u64> {
    let mut v: Vec<u64> = (0..candidates).map(|_| rng.random_range(0..=cap)).collect();
    let limit = allowed as u64 * cap;
    while v.iter().sum::<u64>() > limit {
        let i = rng.random_range(0..candidates);
        v[i] = v[i].saturating_sub(1 + v[i] / 4);
    }
    v
}

/// A random valid election. Retries until validation succeeds (boundary
/// ties are the usual reason to retry).
pub fn random_election(rng: &mut ChaCha20Rng, batches: usize, races: usize, max_candidates: usize) -> Election {
    loop {
        let specs: Vec<RaceSpec> = (0..races)
            .map(|r| {
                let n = rng.random_range(2..=max_candidates.max(2));
                RaceSpec {
                    race_id: format!("R{r}"),
                    allowed_votes: if n > 2 && rng.random_bool(0.3) { 2 } else { 1 },
                    candidate_ids: (0..n).map(|k| format!("R{r}-c{k}")).collect(),
                }
            })
            .collect();
        let mut inputs = Vec::new();
        for p in 0..batches {
            let total = rng.random_range(1..=60u64);
            let mut b = BatchInput {
                batch_id: format!("b{p:02}"),
                total_ballots: total,
                races: BTreeMap::new(),
                reported_votes: BTreeMap::new(),
            };
            for (r, spec) in specs.iter().enumerate() {
                if r != p % races && rng.random_bool(0.4) {
                    continue;
                }
                let cap = if rng.random_bool(0.5) { total } else { rng.random_range(0..=total) };
                b.races.insert(spec.race_id.clone(), Some(cap));
                let v = valid_votes(rng, spec.candidate_ids.len(), cap, spec.allowed_votes);
                for (c, x) in spec.candidate_ids.iter().zip(v) {
                    b.reported_votes.insert(c.clone(), x);
                }
            }
            inputs.push(b);
        }
        if let Ok(e) = Election::validate(&ElectionInput {
            races: specs,
            batches: inputs,
        }) {
            if (0..races).all(|r| e.smallest_margin(r) > 0) {
                return e;
            }
        }
    }
}

/// A random valid hand count for batch `p`.
pub fn random_hand(rng: &mut ChaCha20Rng, e: &Election, p: usize) -> HandCount {
    let batch = &e.batches()[p];
    let mut actual = BTreeMap::new();
    for r in batch.races_present() {
        let cap = batch.ballot_cap(r).unwrap_or(batch.total_ballots);
        let range = e.race_candidates(r);
        let v = valid_votes(rng, range.len(), cap, e.races()[r].allowed_votes);
        for (k, x) in range.zip(v) {
            actual.insert(e.candidate_id(k).to_string(), x);
        }
    }
    HandCount {
        batch_id: batch.batch_id.clone(),
        actual_votes: actual,
    }
}

pub fn random_truth(rng: &mut ChaCha20Rng, e: &Election) -> Vec<HandCount> {
    (0..e.batches().len()).map(|p| random_hand(rng, e, p)).collect()
}

pub fn shuffled_input(rng: &mut ChaCha20Rng, e: &Election) -> ElectionInput {
    let mut input = e.to_input();
    input.batches.shuffle(rng);
    input
}

/// Kaplan-Markov P by direct evaluation of every prefix product.
pub fn km_direct(taints: &[f64], total_bound: f64) -> f64 {
    let mut best = f64::INFINITY;
    for j in 1..=taints.len() {
        let prod: f64 = taints[..j]
            .iter()
            .map(|t| (1.0 - 1.0 / total_bound) / (1.0 - t))
            .product();
        best = best.min(prod);
    }
    best.min(1.0)
}

pub mod checks {
    use super::*;
    use marrop_audit::simulate::{outcome_oracle, TrueTallySet};
    use marrop_audit::{batch_marrop, km_pvalue, total_marrop, ErrorBoundTable, RaceSet};

    /// e_p <= u_p for a random batch of a random election, over all races
    /// and over a random subset.
    pub fn marrop_below_bound(seed: u64) -> Result<(), String> {
        let mut rng = rng(seed);
        let batches = rng.random_range(1..=6);
        let races = rng.random_range(1..=3);
        let e = random_election(&mut rng, batches, races, 4);
        let p = rng.random_range(0..batches);
        let hand = random_hand(&mut rng, &e, p);
        let subset: Vec<String> = e
            .races()
            .iter()
            .filter(|_| rng.random_bool(0.5))
            .map(|r| r.race_id.clone())
            .collect();
        for audited in [RaceSet::all(&e), e.race_set(&subset).map_err(|x| x.to_string())?] {
            let table = ErrorBoundTable::compute(&e, &audited);
            let ep = batch_marrop(&e, &hand, &audited).map_err(|x| x.to_string())?;
            if ep > table.bound(p) + 1e-12 {
                return Err(format!("seed {seed}: e_p {ep} > u_p {}", table.bound(p)));
            }
        }
        Ok(())
    }

    /// E >= (V_wl - A_wl) / V_wl for every race and reported winner/loser
    /// pair, with actual margins summed straight from the hand counts.
    pub fn total_dominates_pairs(seed: u64) -> Result<(), String> {
        let mut rng = rng(seed);
        let e = random_election(&mut rng, 5, 2, 3);
        let truth = random_truth(&mut rng, &e);
        let big_e = total_marrop(&e, &truth, &RaceSet::all(&e)).map_err(|x| x.to_string())?;
        for r in 0..e.races().len() {
            for (w, l, _) in e.pairs(r) {
                let (wid, lid) = (e.candidate_id(w), e.candidate_id(l));
                let reported: i64 = e.batches().iter().map(|b| b.reported(w) as i64 - b.reported(l) as i64).sum();
                let actual: i64 = truth
                    .iter()
                    .map(|h| {
                        h.actual_votes.get(wid).copied().unwrap_or(0) as i64
                            - h.actual_votes.get(lid).copied().unwrap_or(0) as i64
                    })
                    .sum();
                let share = (reported - actual) as f64 / reported as f64;
                if share > big_e + 1e-9 {
                    return Err(format!("seed {seed}: pair {wid}/{lid} overstated by {share} > E = {big_e}"));
                }
            }
        }
        Ok(())
    }

    /// One race, two candidates, four batches with the given caps and
    /// reported (winner, loser) counts. Every possible hand count is tried;
    /// returns (instances checked, instances with E < 1).
    pub fn exhaustive_implication(caps: [u64; 4], reported: [(u64, u64); 4]) -> Result<(u64, u64), String> {
        let input = ElectionInput {
            races: vec![RaceSpec {
                race_id: "R".into(),
                allowed_votes: 1,
                candidate_ids: vec!["w".into(), "l".into()],
            }],
            batches: (0..4)
                .map(|p| BatchInput {
                    batch_id: format!("b{p}"),
                    total_ballots: caps[p],
                    races: [("R".to_string(), Some(caps[p]))].into(),
                    reported_votes: [("w".to_string(), reported[p].0), ("l".to_string(), reported[p].1)].into(),
                })
                .collect(),
        };
        let e = Election::validate(&input).map_err(|x| x.to_string())?;
        let options: Vec<Vec<(u64, u64)>> = caps
            .iter()
            .map(|&c| (0..=c).flat_map(|w| (0..=c - w).map(move |l| (w, l))).collect())
            .collect();
        let (mut checked, mut below) = (0, 0);
        for a in &options[0] {
            for b in &options[1] {
                for c in &options[2] {
                    for d in &options[3] {
                        let hand_counts = [a, b, c, d]
                            .iter()
                            .enumerate()
                            .map(|(p, &&(w, l))| HandCount {
                                batch_id: format!("b{p}"),
                                actual_votes: [("w".to_string(), w), ("l".to_string(), l)].into(),
                            })
                            .collect();
                        let o = outcome_oracle(&e, &TrueTallySet { hand_counts }).map_err(|x| x.to_string())?;
                        checked += 1;
                        if o.below_one {
                            below += 1;
                            if !o.all_correct {
                                return Err(format!("E = {} < 1 with a wrong outcome: {:?}", o.total_marrop, [a, b, c, d]));
                            }
                        }
                    }
                }
            }
        }
        Ok((checked, below))
    }

    /// P is the prefix minimum (never increases with more draws), matches
    /// direct evaluation, and never decreases when one taint increases.
    pub fn km_monotone(seed: u64) -> Result<(), String> {
        let mut rng = rng(seed);
        let total = rng.random_range(1.5..60.0);
        let n = rng.random_range(1..=60);
        let mut taints: Vec<f64> = (0..n)
            .map(|_| if rng.random_bool(0.6) { 0.0 } else { rng.random_range(-0.3..0.95) })
            .collect();
        let mut last = 1.0;
        for m in 1..=n {
            let p = km_pvalue(&taints[..m], total).map_err(|x| x.to_string())?;
            if p > last {
                return Err(format!("seed {seed}: P rose from {last} to {p} at draw {m}"));
            }
            let direct = km_direct(&taints[..m], total);
            if (p - direct).abs() > 1e-12 * direct.max(1e-300) {
                return Err(format!("seed {seed}: P {p} differs from direct {direct}"));
            }
            last = p;
        }
        let before = km_pvalue(&taints, total).map_err(|x| x.to_string())?;
        let i = rng.random_range(0..n);
        taints[i] += rng.random_range(0.0..(0.99 - taints[i]).max(0.0) + 1e-9);
        let taints_up: Vec<f64> = taints.iter().map(|t| t.min(0.99)).collect();
        let after = km_pvalue(&taints_up, total).map_err(|x| x.to_string())?;
        if after < before {
            return Err(format!("seed {seed}: raising taint {i} lowered P from {before} to {after}"));
        }
        Ok(())
    }
}
