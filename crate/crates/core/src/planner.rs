//! Sample-size planning and workload comparison between one simultaneous
//! MARROP audit and independent per-race audits.
//!
//! Plans assume a [`TaintHypothesis`]: a fixed multiset of nonzero taints
//! that the audit will see, with every other draw clean. The hypothesized
//! taints are placed first in the sequence; the minimal sample is the
//! shortest one whose Kaplan-Markov P-value falls below the risk limit.
//!
//! Independent audits are compared under two multiplicity conventions:
//! familywise (each race gets `1 - (1 - alpha)^(1/R)`) and per-comparison
//! (each race gets `alpha`).

use std::fmt::{self, Write as _};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{Election, ElectionError, RaceSet};
use crate::kaplan_markov::{KaplanMarkov, KmError};
use crate::marrop::ErrorBoundTable;
use crate::sampler::{expected_combined_independent, expected_workload, Workload};

pub const DEFAULT_SCAN_CEILING: u64 = 1_000_000;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PlanError {
    #[error("risk limit {0} is not in (0, 1)")]
    InvalidRiskLimit(f64),
    #[error("hypothesized taint {0} is not below 1")]
    TaintNotBelowOne(f64),
    #[error("P-value stays at or above {alpha} for every sample up to {ceiling} draws")]
    Unattainable { alpha: f64, ceiling: u64 },
    #[error("bad taint hypothesis `{0}`; expected COUNTxVALUE[,COUNTxVALUE...], e.g. 5x0.04")]
    BadHypothesis(String),
    #[error(transparent)]
    Km(#[from] KmError),
    #[error(transparent)]
    Election(#[from] ElectionError),
}

/// Hypothesized nonzero taints, as `(value, count)` pairs.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct TaintHypothesis {
    pub pattern: Vec<(f64, u64)>,
}

impl TaintHypothesis {
    pub fn new(pattern: Vec<(f64, u64)>) -> Result<TaintHypothesis, PlanError> {
        if let Some(&(v, _)) = pattern.iter().find(|(v, _)| !(*v < 1.0)) {
            return Err(PlanError::TaintNotBelowOne(v));
        }
        Ok(TaintHypothesis { pattern })
    }

    /// No nonzero taints at all.
    pub fn clean() -> TaintHypothesis {
        TaintHypothesis::default()
    }

    pub fn taint_count(&self) -> u64 {
        self.pattern.iter().map(|(_, c)| c).sum()
    }

    /// The hypothesized taints in planning order.
    pub fn taints(&self) -> impl Iterator<Item = f64> + '_ {
        self.pattern
            .iter()
            .flat_map(|&(v, c)| std::iter::repeat_n(v, c as usize))
    }

    /// The first `n` taints of the planning sequence (zeros after the
    /// hypothesized ones).
    pub fn sequence(&self, n: usize) -> Vec<f64> {
        self.taints().chain(std::iter::repeat(0.0)).take(n).collect()
    }
}

impl FromStr for TaintHypothesis {
    type Err = PlanError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || PlanError::BadHypothesis(s.to_string());
        let s = s.trim();
        if s.is_empty() || s == "0" {
            return Ok(TaintHypothesis::clean());
        }
        let pattern = s
            .split(',')
            .map(|part| {
                let (count, value) = part.trim().split_once(['x', 'X']).ok_or_else(bad)?;
                let count: u64 = count.trim().parse().map_err(|_| bad())?;
                let value: f64 = value.trim().parse().map_err(|_| bad())?;
                Ok((value, count))
            })
            .collect::<Result<Vec<_>, PlanError>>()?;
        TaintHypothesis::new(pattern)
    }
}

impl fmt::Display for TaintHypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.pattern.is_empty() {
            return f.write_str("0");
        }
        let parts: Vec<String> = self.pattern.iter().map(|(v, c)| format!("{c}x{v}")).collect();
        f.write_str(&parts.join(","))
    }
}

/// Smallest number of draws for which the hypothesis yields `P < alpha`.
pub fn minimal_draws(
    total_bound: f64,
    alpha: f64,
    hypothesis: &TaintHypothesis,
    ceiling: u64,
) -> Result<u64, PlanError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PlanError::InvalidRiskLimit(alpha));
    }
    let mut km = KaplanMarkov::new(total_bound)?;
    for t in hypothesis.taints() {
        if !(t < 1.0) {
            return Err(PlanError::TaintNotBelowOne(t));
        }
        km.push(t)?;
    }
    loop {
        if km.draws() > 0 && km.p_value() < alpha {
            return Ok(km.draws());
        }
        if km.draws() >= ceiling {
            return Err(PlanError::Unattainable { alpha, ceiling });
        }
        km.push(0.0)?;
    }
}

/// Per-race risk that keeps the familywise error rate at `alpha` across
/// `races` independent audits.
pub fn fwer_split(alpha: f64, races: u32) -> f64 {
    1.0 - (1.0 - alpha).powf(1.0 / f64::from(races))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum RiskAccounting {
    Fwer,
    Pcer,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum PlanScope {
    Simultaneous { races: Vec<String> },
    Independent { race: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AuditPlan {
    pub scope: PlanScope,
    pub accounting: RiskAccounting,
    pub risk_limit: f64,
    pub total_bound: f64,
    pub draws: u64,
    pub workload: Workload,
}

impl AuditPlan {
    /// Workload of `draws` PPEB draws on `bounds`.
    pub fn at_draws(
        election: &Election,
        bounds: &ErrorBoundTable,
        scope: PlanScope,
        accounting: RiskAccounting,
        risk_limit: f64,
        draws: u64,
    ) -> AuditPlan {
        AuditPlan {
            scope,
            accounting,
            risk_limit,
            total_bound: bounds.total(),
            draws,
            workload: expected_workload(election, bounds, draws),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlanOptions {
    /// Races to audit; empty means all.
    pub races: Vec<String>,
    /// Publish bounds at this many decimals before planning.
    pub bound_decimals: Option<u32>,
    pub ceiling: u64,
}

impl Default for PlanOptions {
    fn default() -> Self {
        PlanOptions {
            races: Vec::new(),
            bound_decimals: None,
            ceiling: DEFAULT_SCAN_CEILING,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RaceComparison {
    pub race_id: String,
    pub total_bound: f64,
    pub fwer: AuditPlan,
    pub pcer: AuditPlan,
}

/// Independent FWER and PCER audits per race, their combined workloads, and
/// the simultaneous MARROP audit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanComparison {
    pub alpha: f64,
    pub split_alpha: f64,
    pub hypothesis: TaintHypothesis,
    pub races: Vec<RaceComparison>,
    pub fwer_all: Workload,
    pub pcer_all: Workload,
    pub marrop: AuditPlan,
}

/// Bound table for `races`, published at `decimals` if given.
pub fn bound_table(election: &Election, races: &RaceSet, decimals: Option<u32>) -> ErrorBoundTable {
    let table = ErrorBoundTable::compute(election, races);
    match decimals {
        Some(d) => table.published(d),
        None => table,
    }
}

pub fn compare_plans(
    election: &Election,
    alpha: f64,
    hypothesis: &TaintHypothesis,
    options: &PlanOptions,
) -> Result<PlanComparison, PlanError> {
    if !(alpha > 0.0 && alpha < 1.0) {
        return Err(PlanError::InvalidRiskLimit(alpha));
    }
    let audited = election.race_set(&options.races)?;
    let split_alpha = fwer_split(alpha, audited.len() as u32);

    let mut races = Vec::new();
    let mut tables = Vec::new();
    for r in audited.indices() {
        let table = bound_table(election, &RaceSet::single(election, r), options.bound_decimals);
        let race_id = election.races()[r].race_id.clone();
        let plan = |accounting, risk| -> Result<AuditPlan, PlanError> {
            let n = minimal_draws(table.total(), risk, hypothesis, options.ceiling)?;
            Ok(AuditPlan::at_draws(
                election,
                &table,
                PlanScope::Independent { race: race_id.clone() },
                accounting,
                risk,
                n,
            ))
        };
        let fwer = plan(RiskAccounting::Fwer, split_alpha)?;
        let pcer = plan(RiskAccounting::Pcer, alpha)?;
        races.push(RaceComparison {
            race_id: race_id.clone(),
            total_bound: table.total(),
            fwer,
            pcer,
        });
        tables.push(table);
    }

    let combined = |pick: fn(&RaceComparison) -> u64| {
        let audits: Vec<(&ErrorBoundTable, u64)> = tables.iter().zip(&races).map(|(t, rc)| (t, pick(rc))).collect();
        expected_combined_independent(election, &audits)
    };
    let fwer_all = combined(|rc| rc.fwer.draws);
    let pcer_all = combined(|rc| rc.pcer.draws);

    let table = bound_table(election, &audited, options.bound_decimals);
    let n = minimal_draws(table.total(), alpha, hypothesis, options.ceiling)?;
    let marrop = AuditPlan::at_draws(
        election,
        &table,
        PlanScope::Simultaneous {
            races: election.race_ids(&audited),
        },
        RiskAccounting::Fwer,
        alpha,
        n,
    );

    Ok(PlanComparison {
        alpha,
        split_alpha,
        hypothesis: hypothesis.clone(),
        races,
        fwer_all,
        pcer_all,
        marrop,
    })
}

/// Which risk-accounting columns to render.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Columns {
    Both,
    Fwer,
    Pcer,
}

struct Row<'a> {
    label: &'a str,
    total_bound: Option<f64>,
    fwer: Option<(Option<u64>, Workload)>,
    pcer: Option<(Option<u64>, Workload)>,
}

impl PlanComparison {
    fn rows(&self) -> Vec<Row<'_>> {
        let mut rows: Vec<Row> = self
            .races
            .iter()
            .map(|rc| Row {
                label: &rc.race_id,
                total_bound: Some(rc.total_bound),
                fwer: Some((Some(rc.fwer.draws), rc.fwer.workload)),
                pcer: Some((Some(rc.pcer.draws), rc.pcer.workload)),
            })
            .collect();
        rows.push(Row {
            label: "all",
            total_bound: None,
            fwer: Some((None, self.fwer_all)),
            pcer: Some((None, self.pcer_all)),
        });
        rows.push(Row {
            label: "MARROP",
            total_bound: Some(self.marrop.total_bound),
            fwer: Some((Some(self.marrop.draws), self.marrop.workload)),
            pcer: None,
        });
        rows
    }

    /// CSV with one row per race, then `all` and `MARROP`.
    pub fn to_csv(&self, columns: Columns) -> String {
        let mut header = vec!["race", "U"];
        let fwer_cols = ["fwer_n", "fwer_batches", "fwer_ballots", "fwer_votes"];
        let pcer_cols = ["pcer_n", "pcer_batches", "pcer_ballots", "pcer_votes"];
        if columns != Columns::Pcer {
            header.extend(fwer_cols);
        }
        if columns != Columns::Fwer {
            header.extend(pcer_cols);
        }
        let mut out = header.join(",");
        out.push('\n');
        let cells = |cell: Option<(Option<u64>, Workload)>| -> Vec<String> {
            match cell {
                Some((n, w)) => vec![
                    n.map(|n| n.to_string()).unwrap_or_default(),
                    format!("{:.2}", w.batches),
                    format!("{:.2}", w.ballots),
                    format!("{:.2}", w.votes),
                ],
                None => vec![String::new(); 4],
            }
        };
        for row in self.rows() {
            let mut fields = vec![
                row.label.to_string(),
                row.total_bound.map(|u| format!("{u:.3}")).unwrap_or_default(),
            ];
            if columns != Columns::Pcer {
                fields.extend(cells(row.fwer));
            }
            if columns != Columns::Fwer {
                fields.extend(cells(row.pcer));
            }
            out.push_str(&fields.join(","));
            out.push('\n');
        }
        out
    }

    /// Aligned plain-text table.
    pub fn render(&self, columns: Columns) -> String {
        let mut out = String::new();
        let _ = writeln!(
            out,
            "alpha = {}  FWER per-race risk = {:.4}  taint hypothesis = {}",
            self.alpha, self.split_alpha, self.hypothesis
        );
        let group = |name: &str| format!("| {name:^42} ");
        let mut head = format!("{:<8} {:>8} ", "", "");
        let mut sub = format!("{:<8} {:>8} ", "Race", "U");
        let sub_cols = format!("| {:>5} {:>8} {:>12} {:>12} ", "n", "batches", "ballots", "votes");
        if columns != Columns::Pcer {
            head += &group("FWER");
            sub += &sub_cols;
        }
        if columns != Columns::Fwer {
            head += &group("PCER");
            sub += &sub_cols;
        }
        let _ = writeln!(out, "{}", head.trim_end());
        let _ = writeln!(out, "{}", sub.trim_end());
        let _ = writeln!(out, "{}", "-".repeat(sub.trim_end().len()));
        let cell = |c: Option<(Option<u64>, Workload)>| match c {
            Some((n, w)) => format!(
                "| {:>5} {:>8.2} {:>12.2} {:>12.2} ",
                n.map(|n| n.to_string()).unwrap_or_default(),
                w.batches,
                w.ballots,
                w.votes
            ),
            None => format!("| {:>5} {:>8} {:>12} {:>12} ", "", "", "", ""),
        };
        for row in self.rows() {
            let mut line = format!(
                "{:<8} {:>8} ",
                row.label,
                row.total_bound.map(|u| format!("{u:.3}")).unwrap_or_default()
            );
            if columns != Columns::Pcer {
                line += &cell(row.fwer);
            }
            if columns != Columns::Fwer {
                line += &cell(row.pcer);
            }
            let _ = writeln!(out, "{}", line.trim_end());
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kaplan_markov::km_pvalue;

    fn five() -> TaintHypothesis {
        "5x0.04".parse().unwrap()
    }

    /// Independent scan: evaluate the full P-value for every n.
    fn scan(total: f64, alpha: f64, h: &TaintHypothesis) -> u64 {
        let k = h.taint_count() as usize;
        (k.max(1)..10_000)
            .find(|&n| km_pvalue(&h.sequence(n), total).unwrap() < alpha)
            .unwrap() as u64
    }

    #[test]
    fn parses_hypotheses() {
        let h: TaintHypothesis = "5x0.04, 2x0.1".parse().unwrap();
        assert_eq!(h.pattern, vec![(0.04, 5), (0.1, 2)]);
        assert_eq!(h.taint_count(), 7);
        assert_eq!(h.to_string(), "5x0.04,2x0.1");
        assert!("5*0.04".parse::<TaintHypothesis>().is_err());
        assert!(matches!("1x1.0".parse::<TaintHypothesis>(), Err(PlanError::TaintNotBelowOne(_))));
        assert_eq!("0".parse::<TaintHypothesis>().unwrap(), TaintHypothesis::clean());
    }

    #[test]
    fn worked_minimal_draws() {
        for (u, a, n) in [(22.718, 0.25, 36), (21.0, 0.25, 33), (11.0, 0.0914, 28)] {
            assert_eq!(minimal_draws(u, a, &five(), DEFAULT_SCAN_CEILING).unwrap(), n);
            assert_eq!(scan(u, a, &five()), n);
        }
    }

    #[test]
    fn unattainable_under_ceiling() {
        assert!(matches!(
            minimal_draws(1000.0, 0.01, &five(), 100),
            Err(PlanError::Unattainable { .. })
        ));
    }

    #[test]
    fn splits() {
        assert!((fwer_split(0.25, 3) - 0.09144).abs() < 1e-5);
        assert!((1.0 - fwer_split(0.25, 3) - 0.909).abs() < 1e-3);
        assert!((fwer_split(0.1, 1) - 0.1).abs() < 1e-15);
        assert!((fwer_split(0.25, 2) - 0.13397).abs() < 1e-5);
        for r in 1..10 {
            for a in [0.01, 0.05, 0.25, 0.5] {
                assert!(((1.0 - fwer_split(a, r)).powi(r as i32) - (1.0 - a)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn one_race_fwer_equals_pcer() {
        let e = crate::fixtures::cartoon();
        let opts = PlanOptions {
            races: vec!["A".into()],
            ..PlanOptions::default()
        };
        let cmp = compare_plans(&e, 0.25, &five(), &opts).unwrap();
        let rc = &cmp.races[0];
        assert_eq!(rc.fwer.draws, rc.pcer.draws);
        assert_eq!(rc.fwer.workload, rc.pcer.workload);
        assert_eq!(rc.pcer.draws, 33);
        assert_eq!(cmp.marrop.draws, 33);
    }

    #[test]
    fn renders_table() {
        let e = crate::fixtures::cartoon();
        let cmp = compare_plans(&e, 0.25, &five(), &PlanOptions::default()).unwrap();
        let text = cmp.render(Columns::Both);
        assert!(text.contains("MARROP"));
        let csv = cmp.to_csv(Columns::Pcer);
        assert!(csv.starts_with("race,U,pcer_n,"));
        assert_eq!(csv.lines().count(), 1 + 3 + 2);
    }
}
