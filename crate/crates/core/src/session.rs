//! Live audit session: draw list, hand counts as they arrive, the running
//! Kaplan-Markov P-value and the stop/continue decision.
//!
//! ```text
//! awaiting-counts --record--> awaiting-counts | certifiable | exhausted
//! certifiable --record--> certifiable
//! exhausted --extend draws--> awaiting-counts
//! awaiting-counts | exhausted --escalate--> escalate-full-count
//! ```
//!
//! `certifiable` and `escalate-full-count` are terminal: neither can be
//! escalated or extended. A certifiable session still takes counts for the
//! draws already planned, since P never increases. A batch drawn more
//! than once is counted once; later draws of it are recorded automatically
//! from the stored hand count.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Election, ElectionError, HandCount, RaceSet};
use crate::kaplan_markov::{KaplanMarkov, KmError};
use crate::marrop::{self, ErrorBoundTable, MarropError};
use crate::sampler::{self, SampleError, Workload};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("risk limit {0} is not in (0, 1)")]
    InvalidRiskLimit(f64),
    #[error("hand count is for batch `{found}`, but the next draw is `{expected}`")]
    WrongBatch { expected: String, found: String },
    #[error("no draw is awaiting a hand count")]
    NoPendingDraw,
    #[error("session is already {0}")]
    AlreadyTerminal(SessionStatus),
    #[error("seed {given} does not match the session seed {session}")]
    SeedMismatch { given: u64, session: u64 },
    #[error("cannot shrink the draw list from {current} to {requested}")]
    CannotShrink { current: usize, requested: usize },
    #[error("session was opened on a different election")]
    ElectionMismatch,
    #[error("invalid hand count: {0}")]
    HandCount(MarropError),
    #[error(transparent)]
    Election(#[from] ElectionError),
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Km(#[from] KmError),
}

impl From<MarropError> for SessionError {
    fn from(e: MarropError) -> Self {
        SessionError::HandCount(e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SessionStatus {
    AwaitingCounts,
    Certifiable,
    Exhausted,
    EscalateFullCount,
}

impl SessionStatus {
    pub fn is_terminal(self) -> bool {
        matches!(self, SessionStatus::Certifiable | SessionStatus::EscalateFullCount)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            SessionStatus::AwaitingCounts => "awaiting-counts",
            SessionStatus::Certifiable => "certifiable",
            SessionStatus::Exhausted => "exhausted",
            SessionStatus::EscalateFullCount => "escalate-full-count",
        }
    }
}

impl fmt::Display for SessionStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One recorded draw.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaintRecord {
    /// 1-based.
    pub draw_index: u64,
    pub batch_id: String,
    pub observed_marrop: f64,
    pub bound: f64,
    pub taint: f64,
}

/// Workload figures for a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Projection {
    /// Expectations for the full planned draw list.
    pub planned: Workload,
    pub counted_batches: usize,
    pub counted_ballots: u64,
    pub remaining_draws: u64,
    pub remaining_batches: f64,
    pub remaining_ballots: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    /// Audited race ids; empty audits every race.
    pub races: Vec<String>,
    pub risk_limit: f64,
    pub seed: u64,
    pub planned_draws: usize,
    /// Publish bounds rounded to this many decimals before sampling.
    pub bound_decimals: Option<u32>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AuditSession {
    pub(crate) risk_limit: f64,
    pub(crate) seed: u64,
    pub(crate) election_digest: String,
    pub(crate) bounds: ErrorBoundTable,
    pub(crate) draws: Vec<String>,
    pub(crate) hand_counts: BTreeMap<String, HandCount>,
    pub(crate) records: Vec<TaintRecord>,
    pub(crate) current_p: f64,
    pub(crate) status: SessionStatus,
}

impl AuditSession {
    /// Computes bounds, draws the sample and starts awaiting counts.
    pub fn open(election: &Election, config: &SessionConfig) -> Result<AuditSession, SessionError> {
        let audited = election.race_set(&config.races)?;
        let mut bounds = ErrorBoundTable::compute(election, &audited);
        if let Some(d) = config.bound_decimals {
            bounds = bounds.published(d);
        }
        AuditSession::open_with_bounds(election, bounds, config)
    }

    /// Opens a session on a given bound table (`config.races` and
    /// `config.bound_decimals` are ignored). If the total bound is below 1
    /// no outcome can be wrong and the session is certifiable with no draws.
    pub fn open_with_bounds(
        election: &Election,
        bounds: ErrorBoundTable,
        config: &SessionConfig,
    ) -> Result<AuditSession, SessionError> {
        let alpha = config.risk_limit;
        if !(alpha > 0.0 && alpha < 1.0) {
            return Err(SessionError::InvalidRiskLimit(alpha));
        }
        bounds.check_matches(election)?;
        bounds.race_set(election)?;
        let mut session = AuditSession {
            risk_limit: alpha,
            seed: config.seed,
            election_digest: election.digest(),
            bounds,
            draws: Vec::new(),
            hand_counts: BTreeMap::new(),
            records: Vec::new(),
            current_p: 1.0,
            status: SessionStatus::AwaitingCounts,
        };
        if session.bounds.total() < 1.0 {
            session.current_p = 0.0;
            session.status = SessionStatus::Certifiable;
            return Ok(session);
        }
        // U == 1 exactly has no Kaplan-Markov P-value
        KaplanMarkov::new(session.bounds.total())?;
        session.draws = sampler::draw(&session.bounds, config.planned_draws, config.seed)?.draws;
        session.refresh_status();
        Ok(session)
    }

    pub fn risk_limit(&self) -> f64 {
        self.risk_limit
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn election_digest(&self) -> &str {
        &self.election_digest
    }

    pub fn bounds(&self) -> &ErrorBoundTable {
        &self.bounds
    }

    pub fn total_bound(&self) -> f64 {
        self.bounds.total()
    }

    pub fn draws(&self) -> &[String] {
        &self.draws
    }

    pub fn planned_draws(&self) -> usize {
        self.draws.len()
    }

    pub fn records(&self) -> &[TaintRecord] {
        &self.records
    }

    pub fn hand_counts(&self) -> &BTreeMap<String, HandCount> {
        &self.hand_counts
    }

    pub fn current_p(&self) -> f64 {
        self.current_p
    }

    pub fn status(&self) -> SessionStatus {
        self.status
    }

    /// 1-based index and batch of the next draw awaiting a count. A
    /// certifiable session still accepts the rest of its planned draws.
    pub fn next_pending(&self) -> Option<(u64, &str)> {
        if !matches!(self.status, SessionStatus::AwaitingCounts | SessionStatus::Certifiable) {
            return None;
        }
        self.draws
            .get(self.records.len())
            .map(|b| (self.records.len() as u64 + 1, b.as_str()))
    }

    /// True when sampling can no longer certify without more draws: the draw
    /// list is exhausted, or a taint of 1 froze the P-value.
    pub fn escalation_recommended(&self) -> bool {
        match self.status {
            SessionStatus::Exhausted => true,
            SessionStatus::AwaitingCounts => self.records.iter().any(|r| r.taint >= 1.0),
            _ => false,
        }
    }

    /// Recomputes P from the stored records.
    pub fn replay_p(&self) -> Result<f64, KmError> {
        if self.bounds.total() < 1.0 {
            return Ok(0.0);
        }
        let mut km = KaplanMarkov::new(self.bounds.total())?;
        for r in &self.records {
            km.push(r.taint)?;
        }
        Ok(km.p_value())
    }

    fn check_election(&self, election: &Election) -> Result<(), SessionError> {
        if election.digest() != self.election_digest {
            return Err(SessionError::ElectionMismatch);
        }
        Ok(())
    }

    /// Records the hand count for the next pending draw.
    pub fn record_batch(&mut self, election: &Election, hand: &HandCount) -> Result<(), SessionError> {
        self.check_election(election)?;
        if self.status == SessionStatus::EscalateFullCount {
            return Err(SessionError::AlreadyTerminal(self.status));
        }
        let (_, expected) = self.next_pending().ok_or(SessionError::NoPendingDraw)?;
        if hand.batch_id != expected {
            return Err(SessionError::WrongBatch {
                expected: expected.to_string(),
                found: hand.batch_id.clone(),
            });
        }
        let audited = self.bounds.race_set(election)?;
        let record = self.taint_record(election, &audited, hand)?;
        self.hand_counts.insert(hand.batch_id.clone(), hand.clone());
        self.records.push(record);
        self.refresh_status();
        self.advance_repeats(election, &audited)
    }

    fn taint_record(&self, election: &Election, audited: &RaceSet, hand: &HandCount) -> Result<TaintRecord, SessionError> {
        let (p, actual) = election
            .resolve_hand_count(hand)
            .map_err(|e| SessionError::HandCount(e.into()))?;
        let taint = marrop::taint_of(election, p, &actual, audited, &self.bounds)?;
        let observed = crate::marrop::marrop_of(election, p, &actual, audited);
        Ok(TaintRecord {
            draw_index: self.records.len() as u64 + 1,
            batch_id: hand.batch_id.clone(),
            observed_marrop: observed,
            bound: self.bounds.bound(p),
            taint,
        })
    }

    /// Records pending draws of batches that were already counted.
    fn advance_repeats(&mut self, election: &Election, audited: &RaceSet) -> Result<(), SessionError> {
        while let Some((_, batch)) = self.next_pending() {
            let Some(hand) = self.hand_counts.get(batch) else { break };
            let record = self.taint_record(election, audited, hand)?;
            self.records.push(record);
            self.refresh_status();
        }
        Ok(())
    }

    fn refresh_status(&mut self) {
        self.current_p = self.replay_p().expect("bounds and taints were checked on entry");
        self.status = if self.current_p < self.risk_limit {
            SessionStatus::Certifiable
        } else if self.records.len() >= self.draws.len() {
            SessionStatus::Exhausted
        } else {
            SessionStatus::AwaitingCounts
        };
    }

    /// Extends the draw list to `total` draws from the session's stream.
    pub fn extend_draws(&mut self, election: &Election, total: usize, seed: u64) -> Result<(), SessionError> {
        self.check_election(election)?;
        if self.status.is_terminal() {
            return Err(SessionError::AlreadyTerminal(self.status));
        }
        if seed != self.seed {
            return Err(SessionError::SeedMismatch {
                given: seed,
                session: self.seed,
            });
        }
        if total < self.draws.len() {
            return Err(SessionError::CannotShrink {
                current: self.draws.len(),
                requested: total,
            });
        }
        let extended = sampler::draw(&self.bounds, total, self.seed)?.draws;
        debug_assert_eq!(extended[..self.draws.len()], self.draws[..]);
        self.draws = extended;
        self.refresh_status();
        let audited = self.bounds.race_set(election)?;
        self.advance_repeats(election, &audited)
    }

    /// Abandons sampling for a full hand count.
    pub fn escalate(&mut self) -> Result<(), SessionError> {
        if self.status.is_terminal() {
            return Err(SessionError::AlreadyTerminal(self.status));
        }
        self.status = SessionStatus::EscalateFullCount;
        Ok(())
    }

    /// Planned and remaining workload. Remaining figures are expectations
    /// over the draws not yet recorded, counting only batches that have no
    /// hand count yet.
    pub fn projection(&self, election: &Election) -> Projection {
        let n = self.draws.len() as u64;
        let remaining = self.draws.len().saturating_sub(self.records.len()) as u64;
        let (counted_batches, counted_ballots) = self.counted(election);
        let total = self.bounds.total();
        let mut out = Projection {
            planned: if total > 0.0 {
                sampler::expected_workload(election, &self.bounds, n)
            } else {
                Workload::default()
            },
            counted_batches,
            counted_ballots,
            remaining_draws: remaining,
            remaining_batches: 0.0,
            remaining_ballots: 0.0,
        };
        if total > 0.0 {
            for (p, batch) in election.batches().iter().enumerate() {
                if self.hand_counts.contains_key(&batch.batch_id) {
                    continue;
                }
                let q = sampler::inclusion_probability(self.bounds.bound(p), total, remaining);
                out.remaining_batches += q;
                out.remaining_ballots += q * batch.total_ballots as f64;
            }
        }
        out
    }

    /// Distinct batches counted so far and their ballots.
    pub fn counted(&self, election: &Election) -> (usize, u64) {
        let ballots = self
            .hand_counts
            .keys()
            .filter_map(|b| election.batch(b))
            .map(|b| b.total_ballots)
            .sum();
        (self.hand_counts.len(), ballots)
    }

    /// One-line decision, e.g. `certifiable, P=0.198 < 0.25`.
    pub fn decision_line(&self) -> String {
        let p = self.current_p;
        let a = self.risk_limit;
        match self.status {
            SessionStatus::Certifiable => format!("certifiable, P={p:.3} < {a}"),
            SessionStatus::AwaitingCounts if self.escalation_recommended() => {
                format!("keep counting, P={p:.3} >= {a}; a taint of 1 was observed, escalation to a full hand count is recommended")
            }
            SessionStatus::AwaitingCounts => format!("keep counting, P={p:.3} >= {a}"),
            SessionStatus::Exhausted => {
                format!("exhausted, P={p:.3} >= {a}; draw more batches or escalate to a full hand count")
            }
            SessionStatus::EscalateFullCount => format!("escalate-full-count, P={p:.3}; full hand count required"),
        }
    }
}
