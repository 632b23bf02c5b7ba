//! PPEB sampling: independent draws with replacement, each selecting batch
//! `p` with probability `u_p / U`, and the expected workload of such samples.
//!
//! # Reproducibility
//!
//! Draws come from ChaCha20 (`rand_chacha::ChaCha20Rng`) seeded with
//! `seed_from_u64(seed)`, stream 0. Each draw takes one `next_u64()`, keeps
//! its top 53 bits as a uniform `x` in `[0, 1)`, and selects the first batch
//! (in canonical batch-id order) whose cumulative bound exceeds `x * U`.
//! A sequence of `n` draws is always the first `n` draws of the same stream,
//! so extending a sample keeps its prefix.

use rand_chacha::ChaCha20Rng;
use rand_core::{RngCore, SeedableRng};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Election, RaceSet};
use crate::marrop::ErrorBoundTable;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SampleError {
    #[error("every error bound is zero; there is nothing to sample")]
    AllBoundsZero,
}

/// Ordered batch ids drawn by PPEB from one seed.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DrawSequence {
    pub seed: u64,
    pub draws: Vec<String>,
}

/// Inverse-CDF sampler over a bound table.
#[derive(Debug, Clone)]
pub struct PpebSampler {
    cumulative: Vec<f64>,
    last_positive: usize,
}

impl PpebSampler {
    pub fn new(bounds: &ErrorBoundTable) -> Result<PpebSampler, SampleError> {
        let mut acc = 0.0;
        let cumulative: Vec<f64> = bounds
            .bounds()
            .iter()
            .map(|&u| {
                acc += u.max(0.0);
                acc
            })
            .collect();
        let last_positive = bounds
            .bounds()
            .iter()
            .rposition(|&u| u > 0.0)
            .ok_or(SampleError::AllBoundsZero)?;
        Ok(PpebSampler {
            cumulative,
            last_positive,
        })
    }

    /// Position of the next drawn batch.
    pub fn sample<R: RngCore>(&self, rng: &mut R) -> usize {
        let x = (rng.next_u64() >> 11) as f64 * (1.0 / (1u64 << 53) as f64);
        let target = x * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .partition_point(|&c| c <= target)
            .min(self.last_positive)
    }
}

/// The generator behind [`draw`].
pub fn audit_rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

/// Batch positions of the first `n` draws for `seed`.
pub fn draw_positions(bounds: &ErrorBoundTable, n: usize, seed: u64) -> Result<Vec<usize>, SampleError> {
    let sampler = PpebSampler::new(bounds)?;
    let mut rng = audit_rng(seed);
    Ok((0..n).map(|_| sampler.sample(&mut rng)).collect())
}

/// `n` PPEB draws with replacement.
pub fn draw(bounds: &ErrorBoundTable, n: usize, seed: u64) -> Result<DrawSequence, SampleError> {
    let draws = draw_positions(bounds, n, seed)?
        .into_iter()
        .map(|p| bounds.batch_ids()[p].clone())
        .collect();
    Ok(DrawSequence { seed, draws })
}

/// Chance that a batch with bound `u` appears at least once in `n` draws.
pub fn inclusion_probability(u: f64, total: f64, n: u64) -> f64 {
    if n == 0 || u <= 0.0 {
        return 0.0;
    }
    1.0 - (1.0 - u / total).powf(n as f64)
}

/// Expected counts of distinct batches, ballots and votes audited.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Workload {
    pub batches: f64,
    pub ballots: f64,
    pub votes: f64,
}

pub fn expected_distinct_batches(bounds: &ErrorBoundTable, n: u64) -> f64 {
    bounds
        .bounds()
        .iter()
        .map(|&u| inclusion_probability(u, bounds.total(), n))
        .sum()
}

pub fn expected_ballots(election: &Election, bounds: &ErrorBoundTable, n: u64) -> f64 {
    election
        .batches()
        .iter()
        .zip(bounds.bounds())
        .map(|(b, &u)| b.total_ballots as f64 * inclusion_probability(u, bounds.total(), n))
        .sum()
}

/// Each drawn batch contributes the ballot caps of the audited races on it.
pub fn expected_votes(election: &Election, bounds: &ErrorBoundTable, n: u64) -> f64 {
    let audited = bounds
        .race_set(election)
        .expect("bound table races belong to this election");
    bounds
        .bounds()
        .iter()
        .enumerate()
        .map(|(p, &u)| election.vote_capacity(p, &audited) as f64 * inclusion_probability(u, bounds.total(), n))
        .sum()
}

pub fn expected_workload(election: &Election, bounds: &ErrorBoundTable, n: u64) -> Workload {
    Workload {
        batches: expected_distinct_batches(bounds, n),
        ballots: expected_ballots(election, bounds, n),
        votes: expected_votes(election, bounds, n),
    }
}

/// Combined workload of several independent audits, each with its own bound
/// table and draw count.
///
/// A batch is counted once for batches and ballots if any audit draws it.
/// Votes are counted per audited race: race `X`'s cap on batch `p` counts
/// when audit `X` draws `p`, so one audit counting a race never covers
/// another audit's race.
pub fn expected_combined_independent(election: &Election, audits: &[(&ErrorBoundTable, u64)]) -> Workload {
    let race_sets: Vec<RaceSet> = audits
        .iter()
        .map(|(b, _)| b.race_set(election).expect("bound table races belong to this election"))
        .collect();
    let mut out = Workload::default();
    for (p, batch) in election.batches().iter().enumerate() {
        let mut missed = 1.0;
        let mut votes = 0.0;
        for ((bounds, n), races) in audits.iter().zip(&race_sets) {
            let inclusion = inclusion_probability(bounds.bound(p), bounds.total(), *n);
            missed *= 1.0 - inclusion;
            votes += election.vote_capacity(p, races) as f64 * inclusion;
        }
        out.batches += 1.0 - missed;
        out.ballots += batch.total_ballots as f64 * (1.0 - missed);
        out.votes += votes;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fixtures::cartoon;
    use crate::marrop::total_error_bound;

    fn table(bounds: &[f64]) -> ErrorBoundTable {
        ErrorBoundTable::from_parts(
            vec!["R".into()],
            (0..bounds.len()).map(|i| format!("b{i}")).collect(),
            bounds.to_vec(),
            None,
        )
    }

    #[test]
    fn deterministic_given_seed() {
        let t = table(&[1.0, 2.0, 0.0, 3.0]);
        assert_eq!(draw(&t, 50, 9).unwrap(), draw(&t, 50, 9).unwrap());
        assert_ne!(draw(&t, 50, 9).unwrap(), draw(&t, 50, 10).unwrap());
        let long = draw(&t, 80, 9).unwrap();
        assert_eq!(long.draws[..50], draw(&t, 50, 9).unwrap().draws[..]);
    }

    #[test]
    fn zero_bounds_never_drawn() {
        let t = table(&[0.0, 1.0, 0.0, 0.0, 2.0, 0.0]);
        let seq = draw_positions(&t, 20_000, 1).unwrap();
        assert!(seq.iter().all(|&p| p == 1 || p == 4));
        assert_eq!(draw(&table(&[0.0, 0.0]), 1, 1), Err(SampleError::AllBoundsZero));
    }

    fn frequency_check(bounds: &[f64]) {
        let t = table(bounds);
        let n = 100_000;
        let mut counts = vec![0u64; bounds.len()];
        for p in draw_positions(&t, n, 2024).unwrap() {
            counts[p] += 1;
        }
        for (c, u) in counts.iter().zip(bounds) {
            let q = u / t.total();
            let sigma = (n as f64 * q * (1.0 - q)).sqrt();
            assert!((*c as f64 - n as f64 * q).abs() <= 3.0 * sigma, "{counts:?}");
        }
    }

    #[test]
    fn equal_bounds_frequencies() {
        frequency_check(&[1.0; 4]);
    }

    #[test]
    fn unequal_bounds_frequencies() {
        frequency_check(&[1.0, 3.0]);
    }

    #[test]
    fn inclusion_edges() {
        assert_eq!(inclusion_probability(0.3, 2.0, 0), 0.0);
        assert_eq!(inclusion_probability(2.0, 2.0, 1), 1.0);
        assert_eq!(inclusion_probability(2.0, 2.0, 7), 1.0);
        let e = cartoon();
        let t = total_error_bound(&e, &RaceSet::all(&e));
        let u = t.bound_for("P200-IP").unwrap();
        let expected = 1.0 - (1.0 - u / t.total()).powi(36);
        assert!((inclusion_probability(u, t.total(), 36) - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_draws_zero_work() {
        let e = cartoon();
        let t = total_error_bound(&e, &RaceSet::all(&e));
        assert_eq!(expected_workload(&e, &t, 0), Workload::default());
    }

    #[test]
    fn single_audit_combination_reduces() {
        let e = cartoon();
        let t = total_error_bound(&e, &e.race_set(&["B"]).unwrap());
        let combined = expected_combined_independent(&e, &[(&t, 17)]);
        let single = expected_workload(&e, &t, 17);
        assert!((combined.batches - single.batches).abs() < 1e-9);
        assert!((combined.ballots - single.ballots).abs() < 1e-9);
        assert!((combined.votes - single.votes).abs() < 1e-9);
    }

    #[test]
    fn distinct_batches_monotone_and_bounded() {
        let e = cartoon();
        let t = total_error_bound(&e, &RaceSet::all(&e));
        let mut prev = 0.0;
        for n in [0, 1, 5, 36, 100, 1000, 100_000] {
            let d = expected_distinct_batches(&t, n);
            assert!(d >= prev && d <= 400.0 + 1e-9);
            prev = d;
        }
    }
}
