//! Relative overstatement of pairwise margins, per-batch MARROP, error
//! bounds and taints.
//!
//! For a winner `w` and loser `l` of race `r` with reported margin `V_wl`,
//! the relative overstatement in batch `p` is
//!
//! ```text
//! e_pwl = ((v_wp - v_lp) - (a_wp - a_lp)) / V_wl
//! ```
//!
//! when race `r` is on the batch and zero otherwise. The batch MARROP `e_p`
//! is the largest `e_pwl` over the audited races and their winner/loser
//! pairs, and the error bound `u_p` replaces the actual votes by their
//! extreme values `a_wp = 0`, `a_lp = b_rp`. Understatements stay signed.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Election, ElectionError, HandCount, RaceSet};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum MarropError {
    #[error("hand count is for batch `{found}`, expected `{expected}`")]
    HandCountBatchMismatch { expected: String, found: String },
    #[error("batch `{0}` has a zero error bound and cannot be tainted")]
    ZeroBoundBatch(String),
    #[error("batch `{batch}`: observed MARROP {marrop} exceeds the bound {bound}")]
    TaintAboveOne {
        batch: String,
        marrop: f64,
        bound: f64,
    },
    #[error("no hand count for batch `{0}`")]
    MissingBatches(String),
    #[error("unknown batch `{0}`")]
    UnknownBatch(String),
    #[error("error bound table does not match this election")]
    TableMismatch,
    #[error(transparent)]
    Election(#[from] ElectionError),
}

/// Error bounds `u_p` for every batch and their total `U`, restricted to a
/// set of audited races.
///
/// Bounds may be *published* at a fixed number of decimal places
/// ([`ErrorBoundTable::published`]); the total is then the sum of the
/// published values, which is what sampling and the P-value use.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorBoundTable {
    audited_races: Vec<String>,
    batch_ids: Vec<String>,
    bounds: Vec<f64>,
    total: f64,
    decimals: Option<u32>,
}

impl ErrorBoundTable {
    /// Bounds of every batch of `election` for the races in `audited`.
    pub fn compute(election: &Election, audited: &RaceSet) -> ErrorBoundTable {
        let bounds: Vec<f64> = (0..election.batches().len())
            .map(|p| batch_error_bound(election, p, audited))
            .collect();
        ErrorBoundTable::from_parts(
            election.race_ids(audited),
            election.batches().iter().map(|b| b.batch_id.clone()).collect(),
            bounds,
            None,
        )
    }

    /// Rebuilds a table from stored parts; the total is recomputed.
    pub fn from_parts(
        audited_races: Vec<String>,
        batch_ids: Vec<String>,
        bounds: Vec<f64>,
        decimals: Option<u32>,
    ) -> ErrorBoundTable {
        assert_eq!(batch_ids.len(), bounds.len());
        let total = bounds.iter().sum();
        ErrorBoundTable {
            audited_races,
            batch_ids,
            bounds,
            total,
            decimals,
        }
    }

    /// The table with every bound rounded half away from zero to `decimals`
    /// places, as a published bound table would list them.
    ///
    /// Rounding to nearest can place a published bound slightly below the
    /// exact one; [`taint`] reports [`MarropError::TaintAboveOne`] if an
    /// observed MARROP ever exceeds its published bound.
    pub fn published(&self, decimals: u32) -> ErrorBoundTable {
        let scale = 10f64.powi(decimals as i32);
        let bounds = self.bounds.iter().map(|u| (u * scale).round() / scale).collect();
        ErrorBoundTable::from_parts(
            self.audited_races.clone(),
            self.batch_ids.clone(),
            bounds,
            Some(decimals),
        )
    }

    pub fn audited_races(&self) -> &[String] {
        &self.audited_races
    }

    pub fn batch_ids(&self) -> &[String] {
        &self.batch_ids
    }

    /// `u_p` by batch position.
    pub fn bounds(&self) -> &[f64] {
        &self.bounds
    }

    pub fn bound(&self, p: usize) -> f64 {
        self.bounds[p]
    }

    pub fn bound_for(&self, batch_id: &str) -> Option<f64> {
        self.position(batch_id).map(|p| self.bounds[p])
    }

    pub fn position(&self, batch_id: &str) -> Option<usize> {
        self.batch_ids
            .binary_search_by(|b| b.as_str().cmp(batch_id))
            .ok()
    }

    /// `U`.
    pub fn total(&self) -> f64 {
        self.total
    }

    pub fn decimals(&self) -> Option<u32> {
        self.decimals
    }

    pub fn len(&self) -> usize {
        self.bounds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.bounds.is_empty()
    }

    /// Checks that the table was built for `election`'s batches.
    pub fn check_matches(&self, election: &Election) -> Result<(), MarropError> {
        let same = self.batch_ids.len() == election.batches().len()
            && self
                .batch_ids
                .iter()
                .zip(election.batches())
                .all(|(a, b)| *a == b.batch_id);
        if same {
            Ok(())
        } else {
            Err(MarropError::TableMismatch)
        }
    }

    pub fn race_set(&self, election: &Election) -> Result<RaceSet, MarropError> {
        Ok(election.race_set(&self.audited_races)?)
    }
}

/// `e_pwl` for a winner/loser pair of any race.
pub fn relative_overstatement(
    election: &Election,
    hand: &HandCount,
    winner: &str,
    loser: &str,
) -> Result<f64, MarropError> {
    let margin = election.pairwise_margin(winner, loser)?;
    let (p, actual) = election.resolve_hand_count(hand)?;
    let w = election.candidate_position(winner).expect("checked by margin");
    let l = election.candidate_position(loser).expect("checked by margin");
    Ok(overstatement(election, p, &actual, w, l, margin))
}

fn overstatement(election: &Election, p: usize, actual: &[u64], w: usize, l: usize, margin: u64) -> f64 {
    let batch = &election.batches()[p];
    if !batch.contains_race(election.candidate_race(w)) {
        return 0.0;
    }
    let reported = batch.reported(w) as i64 - batch.reported(l) as i64;
    let found = actual[w] as i64 - actual[l] as i64;
    (reported - found) as f64 / margin as f64
}

/// Observed discrepancy of one batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchDiscrepancy {
    pub batch_id: String,
    /// `e_pwl` keyed by `(winner, loser)`, for audited races on the batch.
    pub overstatements: BTreeMap<(String, String), f64>,
    /// `e_p`.
    pub batch_marrop: f64,
}

/// Every `e_pwl` of a batch for the audited races, and their maximum.
pub fn batch_discrepancy(
    election: &Election,
    hand: &HandCount,
    audited: &RaceSet,
) -> Result<BatchDiscrepancy, MarropError> {
    let (p, actual) = election.resolve_hand_count(hand)?;
    let batch = &election.batches()[p];
    let mut overstatements = BTreeMap::new();
    let mut batch_marrop = 0.0f64;
    let mut any = false;
    for r in audited.indices().filter(|&r| batch.contains_race(r)) {
        for (w, l, margin) in election.pairs(r) {
            let e = overstatement(election, p, &actual, w, l, margin);
            batch_marrop = if any { batch_marrop.max(e) } else { e };
            any = true;
            overstatements.insert(
                (election.candidate_id(w).to_string(), election.candidate_id(l).to_string()),
                e,
            );
        }
    }
    Ok(BatchDiscrepancy {
        batch_id: hand.batch_id.clone(),
        overstatements,
        batch_marrop,
    })
}

/// `e_p` for resolved actual votes; 0 when no audited race is on the batch.
pub(crate) fn marrop_of(election: &Election, p: usize, actual: &[u64], audited: &RaceSet) -> f64 {
    let batch = &election.batches()[p];
    let mut best: Option<f64> = None;
    for r in audited.indices() {
        // an audited race missing from the batch contributes exactly 0
        if !batch.contains_race(r) {
            best = Some(best.map_or(0.0, |b| b.max(0.0)));
            continue;
        }
        for (w, l, margin) in election.pairs(r) {
            let e = overstatement(election, p, actual, w, l, margin);
            best = Some(best.map_or(e, |b| b.max(e)));
        }
    }
    best.unwrap_or(0.0)
}

/// `e_p`: the largest relative overstatement over the audited races.
pub fn batch_marrop(election: &Election, hand: &HandCount, audited: &RaceSet) -> Result<f64, MarropError> {
    let (p, actual) = election.resolve_hand_count(hand)?;
    Ok(marrop_of(election, p, &actual, audited))
}

/// `u_p` for the batch at position `p`.
pub fn batch_error_bound(election: &Election, p: usize, audited: &RaceSet) -> f64 {
    let batch = &election.batches()[p];
    let mut bound = 0.0f64;
    for r in audited.indices() {
        let Some(cap) = batch.ballot_cap(r) else { continue };
        for (w, l, margin) in election.pairs(r) {
            let slack = batch.reported(w) as i64 - batch.reported(l) as i64 + cap as i64;
            bound = bound.max(slack as f64 / margin as f64);
        }
    }
    bound
}

/// Builds the bound table; shorthand for [`ErrorBoundTable::compute`].
pub fn total_error_bound(election: &Election, audited: &RaceSet) -> ErrorBoundTable {
    ErrorBoundTable::compute(election, audited)
}

/// `tau_p = e_p / u_p`.
pub fn taint(election: &Election, hand: &HandCount, bounds: &ErrorBoundTable) -> Result<f64, MarropError> {
    bounds.check_matches(election)?;
    let audited = bounds.race_set(election)?;
    let (p, actual) = election.resolve_hand_count(hand)?;
    taint_of(election, p, &actual, &audited, bounds)
}

pub(crate) fn taint_of(
    election: &Election,
    p: usize,
    actual: &[u64],
    audited: &RaceSet,
    bounds: &ErrorBoundTable,
) -> Result<f64, MarropError> {
    let u = bounds.bound(p);
    let batch_id = &election.batches()[p].batch_id;
    if u <= 0.0 {
        return Err(MarropError::ZeroBoundBatch(batch_id.clone()));
    }
    let e = marrop_of(election, p, actual, audited);
    if e > u {
        return Err(MarropError::TaintAboveOne {
            batch: batch_id.clone(),
            marrop: e,
            bound: u,
        });
    }
    Ok(e / u)
}

/// `E = sum_p e_p` over a complete set of hand counts.
pub fn total_marrop(election: &Election, hands: &[HandCount], audited: &RaceSet) -> Result<f64, MarropError> {
    let mut by_batch: Vec<Option<Vec<u64>>> = vec![None; election.batches().len()];
    for hand in hands {
        let (p, actual) = election.resolve_hand_count(hand)?;
        by_batch[p] = Some(actual);
    }
    let mut total = 0.0;
    for (p, actual) in by_batch.iter().enumerate() {
        let actual = actual
            .as_ref()
            .ok_or_else(|| MarropError::MissingBatches(election.batches()[p].batch_id.clone()))?;
        total += marrop_of(election, p, actual, audited);
    }
    Ok(total)
}

/// Checks that a hand count is for the expected batch.
pub fn expect_batch(hand: &HandCount, expected: &str) -> Result<(), MarropError> {
    if hand.batch_id == expected {
        Ok(())
    } else {
        Err(MarropError::HandCountBatchMismatch {
            expected: expected.to_string(),
            found: hand.batch_id.clone(),
        })
    }
}
