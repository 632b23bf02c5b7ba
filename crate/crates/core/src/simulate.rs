//! Monte Carlo check that the audit limits risk.
//!
//! A [`TrueTallySet`] fixes what a full hand count would find in every batch.
//! [`simulate`] runs many independent PPEB audits against that truth and
//! counts how often they certify. When some outcome is wrong, the certify
//! rate estimates the audit's risk and should not exceed the risk limit.
//!
//! Trial `i` draws from ChaCha20 seeded with the master seed on stream `i`,
//! so trial 0 replays the draws of a live session opened with that seed and
//! results do not depend on how trials are scheduled across threads.

use std::fmt;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Zero};
use rand_chacha::ChaCha20Rng;
use rand_core::SeedableRng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Election, ElectionError, HandCount, RaceSet};
use crate::kaplan_markov::{KaplanMarkov, KmError};
use crate::marrop::{self, ErrorBoundTable, MarropError};
use crate::sampler::{PpebSampler, SampleError};

/// Two-sided 99% normal quantile.
const Z99: f64 = 2.575_829_303_548_900_4;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimulationError {
    #[error("no hand count for batch `{0}`")]
    MissingBatches(String),
    #[error("overstatement of {needed} votes cannot be planted; the chosen batches hold at most {capacity}")]
    BudgetInfeasible { needed: u64, capacity: u64 },
    #[error("race has {available} batches; cannot spread errors over {requested}")]
    SpreadTooLarge { requested: usize, available: usize },
    #[error("overstatement budget {0} is negative or not finite")]
    BadBudget(f64),
    #[error("at least one trial is required")]
    NoTrials,
    #[error("risk limit {0} is not in (0, 1)")]
    InvalidRiskLimit(f64),
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Marrop(#[from] MarropError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Km(#[from] KmError),
}

/// Ground-truth votes for every batch, in canonical batch order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrueTallySet {
    pub hand_counts: Vec<HandCount>,
}

impl TrueTallySet {
    /// Truth equal to the reported results.
    pub fn reported(election: &Election) -> TrueTallySet {
        TrueTallySet {
            hand_counts: (0..election.batches().len())
                .map(|p| election.reported_hand_count(p))
                .collect(),
        }
    }

    /// Actual votes per batch position and candidate index.
    fn resolve(&self, election: &Election) -> Result<Vec<Vec<u64>>, SimulationError> {
        let mut actual: Vec<Option<Vec<u64>>> = vec![None; election.batches().len()];
        for hand in &self.hand_counts {
            let (p, votes) = election.resolve_hand_count(hand)?;
            actual[p] = Some(votes);
        }
        actual
            .into_iter()
            .enumerate()
            .map(|(p, a)| a.ok_or_else(|| SimulationError::MissingBatches(election.batches()[p].batch_id.clone())))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceTruth {
    pub race_id: String,
    /// Smallest actual margin `A_wl` over the race's apparent winner/loser pairs.
    pub min_actual_margin: i64,
    pub outcome_correct: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutcomeReport {
    pub races: Vec<RaceTruth>,
    /// `E`, over all races.
    pub total_marrop: f64,
    /// `E < 1`, decided in exact rational arithmetic so that an `E` of
    /// exactly 1 is never rounded below it.
    pub below_one: bool,
    pub all_correct: bool,
    /// `E < 1` implies every outcome is correct.
    pub implication_holds: bool,
}

/// Which apparent outcomes a full hand count would confirm, computed from
/// actual totals, together with `E`.
pub fn outcome_oracle(election: &Election, truth: &TrueTallySet) -> Result<OutcomeReport, SimulationError> {
    let actual = truth.resolve(election)?;
    let mut totals = vec![0i64; election.num_candidates()];
    for votes in &actual {
        for (t, v) in totals.iter_mut().zip(votes) {
            *t += *v as i64;
        }
    }
    let races: Vec<RaceTruth> = election
        .races()
        .iter()
        .enumerate()
        .map(|(r, race)| {
            let o = election.outcome(r);
            let min_actual_margin = o
                .winners
                .iter()
                .flat_map(|&w| o.losers.iter().map(move |&l| (w, l)))
                .map(|(w, l)| totals[w] - totals[l])
                .min()
                .expect("races have winners and losers");
            RaceTruth {
                race_id: race.race_id.clone(),
                min_actual_margin,
                outcome_correct: min_actual_margin > 0,
            }
        })
        .collect();

    let mut total_marrop = 0.0;
    let mut exact = BigRational::zero();
    for (p, batch) in election.batches().iter().enumerate() {
        let mut batch_max: Option<(f64, BigRational)> = None;
        let mut offer = |e: f64, q: BigRational| {
            if batch_max.as_ref().is_none_or(|(_, m)| q > *m) {
                batch_max = Some((e, q));
            }
        };
        for r in 0..election.races().len() {
            if !batch.contains_race(r) {
                offer(0.0, BigRational::zero());
                continue;
            }
            for (w, l, margin) in election.pairs(r) {
                let reported = batch.reported(w) as i64 - batch.reported(l) as i64;
                let found = actual[p][w] as i64 - actual[p][l] as i64;
                let e = (reported - found) as f64 / margin as f64;
                offer(e, BigRational::new(BigInt::from(reported - found), BigInt::from(margin)));
            }
        }
        if let Some((e, q)) = batch_max {
            total_marrop += e;
            exact += q;
        }
    }

    let below_one = exact < BigRational::one();
    let all_correct = races.iter().all(|r| r.outcome_correct);
    Ok(OutcomeReport {
        races,
        total_marrop,
        below_one,
        all_correct,
        implication_holds: !below_one || all_correct,
    })
}

/// Moves or removes votes in one batch to overstate the `w` over `l`
/// margin by up to `want` votes; returns the overstatement achieved.
fn overstate(votes: &mut [u64], race: std::ops::Range<usize>, w: usize, l: usize, cap: u64, allowed: u64, want: u64) -> u64 {
    let mut left = want;
    // winner -> loser counts twice
    let moved = (left / 2).min(votes[w]).min(cap - votes[l]);
    votes[w] -= moved;
    votes[l] += moved;
    left -= 2 * moved;
    // winner -> undervote
    let dropped = left.min(votes[w]);
    votes[w] -= dropped;
    left -= dropped;
    // undervote -> loser
    let used: u64 = votes[race].iter().sum();
    let added = left.min(cap - votes[l]).min(allowed * cap - used);
    votes[l] += added;
    left -= added;
    want - left
}

/// Plants errors that overstate `race_id`'s smallest margin by `budget`
/// (relative to that margin, rounded to whole votes), spread over `spread`
/// randomly chosen batches carrying the race. A budget of 1 brings the race
/// to an exact tie; anything above flips it.
pub fn plant_errors(
    election: &Election,
    race_id: &str,
    budget: f64,
    spread: usize,
    seed: u64,
) -> Result<TrueTallySet, SimulationError> {
    if !(budget >= 0.0 && budget.is_finite()) {
        return Err(SimulationError::BadBudget(budget));
    }
    let r = election
        .race_position(race_id)
        .ok_or_else(|| ElectionError::UnknownReference {
            kind: "race",
            id: race_id.to_string(),
        })?;
    let outcome = election.outcome(r);
    let w = *outcome.winners.last().expect("race has winners");
    let l = outcome.losers[0];
    let margin = election.smallest_margin(r);
    let needed = (budget * margin as f64).round() as u64;

    let mut truth = TrueTallySet::reported(election);
    if needed == 0 {
        return Ok(truth);
    }

    let mut carrying: Vec<usize> = (0..election.batches().len())
        .filter(|&p| election.batches()[p].contains_race(r))
        .collect();
    if spread == 0 || spread > carrying.len() {
        return Err(SimulationError::SpreadTooLarge {
            requested: spread,
            available: carrying.len(),
        });
    }
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    for i in (1..carrying.len()).rev() {
        let j = (rand_core::RngCore::next_u64(&mut rng) % (i as u64 + 1)) as usize;
        carrying.swap(i, j);
    }
    let mut chosen = carrying[..spread].to_vec();
    chosen.sort_unstable();

    let allowed = u64::from(election.races()[r].allowed_votes);
    let mut votes: Vec<Vec<u64>> = chosen
        .iter()
        .map(|&p| {
            let b = &election.batches()[p];
            (0..election.num_candidates()).map(|k| b.reported(k)).collect()
        })
        .collect();
    let capacity: u64 = chosen
        .iter()
        .zip(&votes)
        .map(|(&p, v)| {
            let cap = election.batches()[p].ballot_cap(r).expect("race on batch");
            overstate(&mut v.clone(), election.race_candidates(r), w, l, cap, allowed, u64::MAX / 4)
        })
        .sum();
    if capacity < needed {
        return Err(SimulationError::BudgetInfeasible { needed, capacity });
    }

    // even shares first, then top up wherever room is left
    let share = needed / spread as u64;
    let mut extra = needed % spread as u64;
    let mut left = needed;
    for (&p, v) in chosen.iter().zip(votes.iter_mut()) {
        let cap = election.batches()[p].ballot_cap(r).expect("race on batch");
        let want = share + u64::from(extra > 0);
        extra = extra.saturating_sub(1);
        left -= overstate(v, election.race_candidates(r), w, l, cap, allowed, want);
    }
    for (&p, v) in chosen.iter().zip(votes.iter_mut()) {
        if left == 0 {
            break;
        }
        let cap = election.batches()[p].ballot_cap(r).expect("race on batch");
        left -= overstate(v, election.race_candidates(r), w, l, cap, allowed, left);
    }
    debug_assert_eq!(left, 0);

    for (&p, v) in chosen.iter().zip(&votes) {
        let hand = &mut truth.hand_counts[p];
        for k in election.race_candidates(r) {
            hand.actual_votes.insert(election.candidate_id(k).to_string(), v[k]);
        }
    }
    Ok(truth)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    /// Audited races; empty means all.
    pub races: Vec<String>,
    pub risk_limit: f64,
    pub planned_draws: usize,
    pub trials: u64,
    pub seed: u64,
    pub bound_decimals: Option<u32>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DrawSummary {
    pub min: u64,
    pub mean: f64,
    pub max: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimulationReport {
    pub trials: u64,
    pub certify_count: u64,
    pub certify_rate: f64,
    /// Wilson score interval at 99%.
    pub interval_99: (f64, f64),
    pub risk_limit: f64,
    pub planned_draws: usize,
    pub total_bound: f64,
    /// Draws used per trial (up to certification or the full sample).
    pub draws_used: DrawSummary,
    pub truth: OutcomeReport,
}

impl SimulationReport {
    /// `alpha + 3 sigma` for the binomial certify count under rate `alpha`.
    pub fn risk_band(&self) -> f64 {
        let a = self.risk_limit;
        a + 3.0 * (a * (1.0 - a) / self.trials as f64).sqrt()
    }
}

impl fmt::Display for SimulationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let wrong: Vec<&str> = self
            .truth
            .races
            .iter()
            .filter(|r| !r.outcome_correct)
            .map(|r| r.race_id.as_str())
            .collect();
        writeln!(f, "trials:        {}", self.trials)?;
        writeln!(f, "risk limit:    {}", self.risk_limit)?;
        writeln!(f, "U:             {:.4}", self.total_bound)?;
        writeln!(f, "planned draws: {}", self.planned_draws)?;
        writeln!(
            f,
            "truth:         E = {:.4}; wrong outcomes: {}",
            self.truth.total_marrop,
            if wrong.is_empty() { "none".to_string() } else { wrong.join(", ") }
        )?;
        writeln!(
            f,
            "certified:     {} / {} = {:.4} (99% interval {:.4} - {:.4})",
            self.certify_count, self.trials, self.certify_rate, self.interval_99.0, self.interval_99.1
        )?;
        writeln!(
            f,
            "draws used:    min {} mean {:.2} max {}",
            self.draws_used.min, self.draws_used.mean, self.draws_used.max
        )
    }
}

fn wilson(successes: u64, trials: u64) -> (f64, f64) {
    let n = trials as f64;
    let p = successes as f64 / n;
    let z2 = Z99 * Z99;
    let centre = (p + z2 / (2.0 * n)) / (1.0 + z2 / n);
    let half = Z99 * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / (1.0 + z2 / n);
    ((centre - half).max(0.0), (centre + half).min(1.0))
}

#[derive(Clone, Copy)]
struct Tally {
    certified: u64,
    draws_sum: u64,
    draws_min: u64,
    draws_max: u64,
}

impl Tally {
    fn one(certified: bool, draws: u64) -> Tally {
        Tally {
            certified: u64::from(certified),
            draws_sum: draws,
            draws_min: draws,
            draws_max: draws,
        }
    }

    fn merge(self, other: Tally) -> Tally {
        Tally {
            certified: self.certified + other.certified,
            draws_sum: self.draws_sum + other.draws_sum,
            draws_min: self.draws_min.min(other.draws_min),
            draws_max: self.draws_max.max(other.draws_max),
        }
    }

    fn empty() -> Tally {
        Tally {
            certified: 0,
            draws_sum: 0,
            draws_min: u64::MAX,
            draws_max: 0,
        }
    }
}

pub fn simulate(election: &Election, truth: &TrueTallySet, config: &SimulationConfig) -> Result<SimulationReport, SimulationError> {
    let audited = election.race_set(&config.races)?;
    let mut bounds = ErrorBoundTable::compute(election, &audited);
    if let Some(d) = config.bound_decimals {
        bounds = bounds.published(d);
    }
    simulate_with_bounds(election, truth, &bounds, config)
}

/// Runs the trials against a given bound table (`config.races` and
/// `config.bound_decimals` are ignored).
pub fn simulate_with_bounds(
    election: &Election,
    truth: &TrueTallySet,
    bounds: &ErrorBoundTable,
    config: &SimulationConfig,
) -> Result<SimulationReport, SimulationError> {
    if config.trials == 0 {
        return Err(SimulationError::NoTrials);
    }
    let alpha = config.risk_limit;
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(SimulationError::InvalidRiskLimit(alpha));
    }
    bounds.check_matches(election)?;
    let audited: RaceSet = bounds.race_set(election)?;
    let outcome = outcome_oracle(election, truth)?;
    let actual = truth.resolve(election)?;

    let tally = if bounds.total() < 1.0 {
        Tally {
            certified: config.trials,
            draws_sum: 0,
            draws_min: 0,
            draws_max: 0,
        }
    } else {
        KaplanMarkov::new(bounds.total())?;
        let taints: Vec<f64> = (0..election.batches().len())
            .map(|p| {
                if bounds.bound(p) > 0.0 {
                    marrop::taint_of(election, p, &actual[p], &audited, bounds)
                } else {
                    Ok(0.0)
                }
            })
            .collect::<Result<_, _>>()?;
        let sampler = PpebSampler::new(bounds)?;
        let n = config.planned_draws;
        (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let mut rng = ChaCha20Rng::seed_from_u64(config.seed);
                rng.set_stream(trial);
                let mut km = KaplanMarkov::new(bounds.total()).expect("checked above");
                for _ in 0..n {
                    let p = sampler.sample(&mut rng);
                    if km.push(taints[p]).expect("taints checked") < alpha {
                        return Tally::one(true, km.draws());
                    }
                }
                Tally::one(false, km.draws())
            })
            .reduce(Tally::empty, Tally::merge)
    };

    Ok(SimulationReport {
        trials: config.trials,
        certify_count: tally.certified,
        certify_rate: tally.certified as f64 / config.trials as f64,
        interval_99: wilson(tally.certified, config.trials),
        risk_limit: alpha,
        planned_draws: config.planned_draws,
        total_bound: bounds.total(),
        draws_used: DrawSummary {
            min: tally.draws_min,
            mean: tally.draws_sum as f64 / config.trials as f64,
            max: tally.draws_max,
        },
        truth: outcome,
    })
}
