//! Simultaneous batch-level risk-limiting audits of overlapping races.
//!
//! One sample of batches, drawn with probability proportional to an error
//! bound, audits every selected race at once. Discrepancies are summarised
//! per batch by the maximum across-race relative overstatement of pairwise
//! margins (MARROP), and the evidence is measured with the Kaplan-Markov
//! P-value.
//!
//! ```
//! use marrop_audit::{fixtures, ErrorBoundTable, RaceSet};
//!
//! let election = fixtures::cartoon();
//! let table = ErrorBoundTable::compute(&election, &RaceSet::all(&election));
//! assert!((table.total() - 22.716_666).abs() < 1e-5);
//! ```

// `!(x < 1.0)` is used on purpose: it also rejects NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod election;
pub mod fixtures;
pub mod io;
pub mod kaplan_markov;
pub mod marrop;
pub mod planner;
pub mod sampler;
pub mod session;
pub mod simulate;

pub use election::{BatchInput, BatchSpec, Election, ElectionError, ElectionInput, HandCount, RaceSet, RaceSpec};
pub use kaplan_markov::{km_pvalue, KaplanMarkov, KmError};
pub use marrop::{batch_error_bound, batch_marrop, relative_overstatement, taint, total_marrop, ErrorBoundTable, MarropError};
pub use planner::{compare_plans, fwer_split, minimal_draws, PlanComparison, PlanError, TaintHypothesis};
pub use sampler::{draw, expected_workload, inclusion_probability, PpebSampler, Workload};
pub use session::{AuditSession, Projection, SessionConfig, SessionError, SessionStatus, TaintRecord};
pub use simulate::{plant_errors, simulate, SimulationConfig, SimulationReport};
