//! Election CSV bundles, hand-count CSVs and the session document.
//!
//! An election directory holds five CSV files with exact headers:
//!
//! | file                 | header                           |
//! |----------------------|----------------------------------|
//! | `races.csv`          | `race_id,allowed_votes`          |
//! | `candidates.csv`     | `candidate_id,race_id`           |
//! | `batches.csv`        | `batch_id,total_ballots`         |
//! | `batch_races.csv`    | `batch_id,race_id,ballot_cap`    |
//! | `reported_votes.csv` | `batch_id,candidate_id,votes`    |
//!
//! An empty `ballot_cap` defaults to the batch's `total_ballots`. Candidate
//! order within a race follows `candidates.csv`. Hand counts use the
//! `reported_votes.csv` layout.
//!
//! Sessions are versioned JSON. P-values, taints and bounds are written as
//! decimal strings in Rust's shortest round-trip form, so a saved session
//! reloads bit for bit.

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io::{Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::election::{BatchInput, Election, ElectionError, ElectionInput, HandCount, RaceSpec};
use crate::marrop::ErrorBoundTable;
use crate::session::{AuditSession, SessionStatus, TaintRecord};

pub const SESSION_SCHEMA_VERSION: u32 = 1;
pub const SESSION_FILE: &str = "session.json";

pub const RACES_FILE: &str = "races.csv";
pub const CANDIDATES_FILE: &str = "candidates.csv";
pub const BATCHES_FILE: &str = "batches.csv";
pub const BATCH_RACES_FILE: &str = "batch_races.csv";
pub const REPORTED_VOTES_FILE: &str = "reported_votes.csv";

const RACES_HEADER: &[&str] = &["race_id", "allowed_votes"];
const CANDIDATES_HEADER: &[&str] = &["candidate_id", "race_id"];
const BATCHES_HEADER: &[&str] = &["batch_id", "total_ballots"];
const BATCH_RACES_HEADER: &[&str] = &["batch_id", "race_id", "ballot_cap"];
const VOTES_HEADER: &[&str] = &["batch_id", "candidate_id", "votes"];

#[derive(Debug, Error)]
pub enum FormatError {
    #[error("{file}:{line}:{column}: {message}")]
    Parse {
        file: String,
        line: u64,
        column: usize,
        message: String,
    },
    #[error("{file}:{line}: unknown {kind} `{id}`")]
    UnknownReference {
        file: String,
        line: u64,
        kind: &'static str,
        id: String,
    },
    #[error("invalid election: {0}")]
    Validation(#[from] ElectionError),
    #[error("session schema version {found} is not supported (expected {expected})")]
    SchemaVersionMismatch { found: u32, expected: u32 },
    #[error("corrupt session document: {0}")]
    CorruptDocument(String),
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

/// The five CSV sources of an election.
pub struct ElectionFiles<R> {
    pub races: R,
    pub candidates: R,
    pub batches: R,
    pub batch_races: R,
    pub reported_votes: R,
}

struct Table {
    file: String,
    rows: Vec<(u64, csv::StringRecord)>,
}

impl Table {
    fn read<R: Read>(file: &str, source: R, header: &[&str]) -> Result<Table, FormatError> {
        let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(source);
        let parse = |line: u64, column: usize, message: String| FormatError::Parse {
            file: file.to_string(),
            line,
            column,
            message,
        };
        let found = reader
            .headers()
            .map_err(|e| parse(1, 1, e.to_string()))?
            .clone();
        if found.iter().ne(header.iter().copied()) {
            return Err(parse(
                1,
                1,
                format!("expected header `{}`, found `{}`", header.join(","), found.iter().collect::<Vec<_>>().join(",")),
            ));
        }
        let mut rows = Vec::new();
        for record in reader.records() {
            let record = record.map_err(|e| {
                let line = e.position().map_or(0, |p| p.line());
                parse(line, 1, e.to_string())
            })?;
            let line = record.position().map_or(0, |p| p.line());
            rows.push((line, record));
        }
        Ok(Table {
            file: file.to_string(),
            rows,
        })
    }

    fn parse_error(&self, line: u64, column: usize, message: String) -> FormatError {
        FormatError::Parse {
            file: self.file.clone(),
            line,
            column,
            message,
        }
    }

    fn count(&self, line: u64, record: &csv::StringRecord, column: usize) -> Result<u64, FormatError> {
        let raw = &record[column];
        raw.parse()
            .map_err(|_| self.parse_error(line, column + 1, format!("`{raw}` is not a nonnegative integer")))
    }

    fn unknown(&self, line: u64, kind: &'static str, id: &str) -> FormatError {
        FormatError::UnknownReference {
            file: self.file.clone(),
            line,
            kind,
            id: id.to_string(),
        }
    }
}

/// Parses and validates an election from its five CSV sources.
pub fn load_election<R: Read>(files: ElectionFiles<R>) -> Result<Election, FormatError> {
    let races_t = Table::read(RACES_FILE, files.races, RACES_HEADER)?;
    let cands_t = Table::read(CANDIDATES_FILE, files.candidates, CANDIDATES_HEADER)?;
    let batches_t = Table::read(BATCHES_FILE, files.batches, BATCHES_HEADER)?;
    let links_t = Table::read(BATCH_RACES_FILE, files.batch_races, BATCH_RACES_HEADER)?;
    let votes_t = Table::read(REPORTED_VOTES_FILE, files.reported_votes, VOTES_HEADER)?;

    let mut races = Vec::new();
    let mut race_pos = HashMap::new();
    for (line, rec) in &races_t.rows {
        let allowed = races_t.count(*line, rec, 1)?;
        let allowed = u32::try_from(allowed)
            .map_err(|_| races_t.parse_error(*line, 2, "allowed_votes is too large".into()))?;
        race_pos.insert(rec[0].to_string(), races.len());
        races.push(RaceSpec {
            race_id: rec[0].to_string(),
            allowed_votes: allowed,
            candidate_ids: Vec::new(),
        });
    }
    for (line, rec) in &cands_t.rows {
        let r = *race_pos
            .get(&rec[1])
            .ok_or_else(|| cands_t.unknown(*line, "race", &rec[1]))?;
        races[r].candidate_ids.push(rec[0].to_string());
    }
    let candidate_known: HashMap<&str, ()> = cands_t.rows.iter().map(|(_, rec)| (rec.get(0).unwrap_or(""), ())).collect();

    let mut batches: Vec<BatchInput> = Vec::new();
    let mut batch_pos = HashMap::new();
    for (line, rec) in &batches_t.rows {
        let total = batches_t.count(*line, rec, 1)?;
        if batch_pos.insert(rec[0].to_string(), batches.len()).is_some() {
            return Err(ElectionError::DuplicateId {
                kind: "batch",
                id: rec[0].to_string(),
            }
            .into());
        }
        batches.push(BatchInput {
            batch_id: rec[0].to_string(),
            total_ballots: total,
            races: BTreeMap::new(),
            reported_votes: BTreeMap::new(),
        });
    }
    for (line, rec) in &links_t.rows {
        let p = *batch_pos
            .get(&rec[0])
            .ok_or_else(|| links_t.unknown(*line, "batch", &rec[0]))?;
        if !race_pos.contains_key(&rec[1]) {
            return Err(links_t.unknown(*line, "race", &rec[1]));
        }
        let cap = if rec[2].is_empty() {
            None
        } else {
            Some(links_t.count(*line, rec, 2)?)
        };
        if batches[p].races.insert(rec[1].to_string(), cap).is_some() {
            return Err(links_t.parse_error(*line, 2, format!("race `{}` listed twice for batch `{}`", &rec[1], &rec[0])));
        }
    }
    for (line, rec) in &votes_t.rows {
        let p = *batch_pos
            .get(&rec[0])
            .ok_or_else(|| votes_t.unknown(*line, "batch", &rec[0]))?;
        if !candidate_known.contains_key(&rec[1]) {
            return Err(votes_t.unknown(*line, "candidate", &rec[1]));
        }
        let votes = votes_t.count(*line, rec, 2)?;
        if batches[p].reported_votes.insert(rec[1].to_string(), votes).is_some() {
            return Err(votes_t.parse_error(*line, 2, format!("candidate `{}` listed twice for batch `{}`", &rec[1], &rec[0])));
        }
    }

    Ok(Election::validate(&ElectionInput { races, batches })?)
}

fn open(path: &Path) -> Result<fs::File, FormatError> {
    fs::File::open(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })
}

/// Loads the five CSV files from `dir`.
pub fn load_election_dir(dir: impl AsRef<Path>) -> Result<Election, FormatError> {
    let dir = dir.as_ref();
    load_election(ElectionFiles {
        races: open(&dir.join(RACES_FILE))?,
        candidates: open(&dir.join(CANDIDATES_FILE))?,
        batches: open(&dir.join(BATCHES_FILE))?,
        batch_races: open(&dir.join(BATCH_RACES_FILE))?,
        reported_votes: open(&dir.join(REPORTED_VOTES_FILE))?,
    })
}

/// The election as the five CSV documents, in canonical order.
pub fn election_csv(election: &Election) -> ElectionFiles<String> {
    let mut races = String::from("race_id,allowed_votes\n");
    let mut candidates = String::from("candidate_id,race_id\n");
    for race in election.races() {
        races += &format!("{},{}\n", race.race_id, race.allowed_votes);
        for c in &race.candidate_ids {
            candidates += &format!("{},{}\n", c, race.race_id);
        }
    }
    let mut batches = String::from("batch_id,total_ballots\n");
    let mut batch_races = String::from("batch_id,race_id,ballot_cap\n");
    let mut reported_votes = String::from("batch_id,candidate_id,votes\n");
    for b in election.batches() {
        batches += &format!("{},{}\n", b.batch_id, b.total_ballots);
        for r in b.races_present() {
            let race = &election.races()[r];
            batch_races += &format!("{},{},{}\n", b.batch_id, race.race_id, b.ballot_cap(r).map_or(String::new(), |c| c.to_string()));
            for k in election.race_candidates(r) {
                reported_votes += &format!("{},{},{}\n", b.batch_id, election.candidate_id(k), b.reported(k));
            }
        }
    }
    ElectionFiles {
        races,
        candidates,
        batches,
        batch_races,
        reported_votes,
    }
}

/// Writes the five CSV files into `dir`, creating it if needed.
pub fn write_election_dir(election: &Election, dir: impl AsRef<Path>) -> Result<(), FormatError> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| FormatError::Io {
        path: dir.to_path_buf(),
        source,
    })?;
    let files = election_csv(election);
    for (name, body) in [
        (RACES_FILE, &files.races),
        (CANDIDATES_FILE, &files.candidates),
        (BATCHES_FILE, &files.batches),
        (BATCH_RACES_FILE, &files.batch_races),
        (REPORTED_VOTES_FILE, &files.reported_votes),
    ] {
        write_atomic(&dir.join(name), body.as_bytes())?;
    }
    Ok(())
}

/// Hand counts in `batch_id,candidate_id,votes` layout, grouped by batch in
/// order of first appearance.
pub fn load_hand_counts<R: Read>(file: &str, source: R) -> Result<Vec<HandCount>, FormatError> {
    let table = Table::read(file, source, VOTES_HEADER)?;
    let mut order: Vec<HandCount> = Vec::new();
    let mut pos: HashMap<String, usize> = HashMap::new();
    for (line, rec) in &table.rows {
        let votes = table.count(*line, rec, 2)?;
        let i = *pos.entry(rec[0].to_string()).or_insert_with(|| {
            order.push(HandCount {
                batch_id: rec[0].to_string(),
                actual_votes: BTreeMap::new(),
            });
            order.len() - 1
        });
        if order[i].actual_votes.insert(rec[1].to_string(), votes).is_some() {
            return Err(table.parse_error(*line, 2, format!("candidate `{}` listed twice for batch `{}`", &rec[1], &rec[0])));
        }
    }
    Ok(order)
}

pub fn hand_counts_csv(hands: &[HandCount]) -> String {
    let mut out = String::from("batch_id,candidate_id,votes\n");
    for h in hands {
        for (c, v) in &h.actual_votes {
            out += &format!("{},{},{}\n", h.batch_id, c, v);
        }
    }
    out
}

/// Writes `bytes` to a sibling temp file, then renames it over `path`.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), FormatError> {
    let io_err = |source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    let mut f = fs::File::create(&tmp).map_err(io_err)?;
    f.write_all(bytes).map_err(io_err)?;
    f.sync_all().map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

mod decimal {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(x: &f64, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&x.to_string())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        let raw = String::deserialize(d)?;
        raw.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Serialize, Deserialize)]
struct BoundDoc {
    batch_id: String,
    #[serde(with = "decimal")]
    bound: f64,
}

#[derive(Serialize, Deserialize)]
struct RecordDoc {
    draw_index: u64,
    batch_id: String,
    #[serde(with = "decimal")]
    observed_marrop: f64,
    #[serde(with = "decimal")]
    bound: f64,
    #[serde(with = "decimal")]
    taint: f64,
}

#[derive(Serialize, Deserialize)]
struct SessionDoc {
    schema_version: u32,
    election_digest: String,
    #[serde(with = "decimal")]
    risk_limit: f64,
    seed: u64,
    audited_races: Vec<String>,
    bound_decimals: Option<u32>,
    #[serde(with = "decimal")]
    total_bound: f64,
    bounds: Vec<BoundDoc>,
    draws: Vec<String>,
    hand_counts: Vec<HandCount>,
    records: Vec<RecordDoc>,
    #[serde(with = "decimal")]
    current_p: f64,
    status: SessionStatus,
}

#[derive(Deserialize)]
struct VersionProbe {
    schema_version: u32,
}

/// The session document as pretty-printed JSON.
pub fn save_session(session: &AuditSession) -> String {
    let bounds = session.bounds();
    let doc = SessionDoc {
        schema_version: SESSION_SCHEMA_VERSION,
        election_digest: session.election_digest.clone(),
        risk_limit: session.risk_limit,
        seed: session.seed,
        audited_races: bounds.audited_races().to_vec(),
        bound_decimals: bounds.decimals(),
        total_bound: bounds.total(),
        bounds: bounds
            .batch_ids()
            .iter()
            .zip(bounds.bounds())
            .map(|(b, &u)| BoundDoc {
                batch_id: b.clone(),
                bound: u,
            })
            .collect(),
        draws: session.draws.clone(),
        hand_counts: session.hand_counts.values().cloned().collect(),
        records: session
            .records
            .iter()
            .map(|r| RecordDoc {
                draw_index: r.draw_index,
                batch_id: r.batch_id.clone(),
                observed_marrop: r.observed_marrop,
                bound: r.bound,
                taint: r.taint,
            })
            .collect(),
        current_p: session.current_p,
        status: session.status,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("session document serializes");
    out.push('\n');
    out
}

/// Parses a session document and checks that it is internally consistent.
pub fn load_session(document: &str) -> Result<AuditSession, FormatError> {
    let corrupt = |m: String| FormatError::CorruptDocument(m);
    let probe: VersionProbe = serde_json::from_str(document).map_err(|e| corrupt(e.to_string()))?;
    if probe.schema_version != SESSION_SCHEMA_VERSION {
        return Err(FormatError::SchemaVersionMismatch {
            found: probe.schema_version,
            expected: SESSION_SCHEMA_VERSION,
        });
    }
    let doc: SessionDoc = serde_json::from_str(document).map_err(|e| corrupt(e.to_string()))?;
    let (batch_ids, values): (Vec<String>, Vec<f64>) = doc.bounds.into_iter().map(|b| (b.batch_id, b.bound)).unzip();
    if batch_ids.windows(2).any(|w| w[0] >= w[1]) {
        return Err(corrupt("bounds are not in canonical batch order".into()));
    }
    let bounds = ErrorBoundTable::from_parts(doc.audited_races, batch_ids, values, doc.bound_decimals);
    if bounds.total().to_bits() != doc.total_bound.to_bits() {
        return Err(corrupt("total_bound does not equal the sum of the bounds".into()));
    }
    let hand_counts: BTreeMap<String, HandCount> = doc
        .hand_counts
        .into_iter()
        .map(|h| (h.batch_id.clone(), h))
        .collect();
    let records: Vec<TaintRecord> = doc
        .records
        .into_iter()
        .map(|r| TaintRecord {
            draw_index: r.draw_index,
            batch_id: r.batch_id,
            observed_marrop: r.observed_marrop,
            bound: r.bound,
            taint: r.taint,
        })
        .collect();
    if records.len() > doc.draws.len() {
        return Err(corrupt("more records than draws".into()));
    }
    for (i, r) in records.iter().enumerate() {
        if r.draw_index != i as u64 + 1 || r.batch_id != doc.draws[i] {
            return Err(corrupt(format!("record {} does not match the draw list", i + 1)));
        }
        if !hand_counts.contains_key(&r.batch_id) {
            return Err(corrupt(format!("no hand count stored for recorded batch `{}`", r.batch_id)));
        }
    }
    let session = AuditSession {
        risk_limit: doc.risk_limit,
        seed: doc.seed,
        election_digest: doc.election_digest,
        bounds,
        draws: doc.draws,
        hand_counts,
        records,
        current_p: doc.current_p,
        status: doc.status,
    };
    let replayed = session.replay_p().map_err(|e| corrupt(e.to_string()))?;
    if replayed.to_bits() != session.current_p.to_bits() {
        return Err(corrupt(format!(
            "stored P {} differs from the replayed value {}",
            session.current_p, replayed
        )));
    }
    Ok(session)
}

pub fn session_path(dir: impl AsRef<Path>) -> PathBuf {
    dir.as_ref().join(SESSION_FILE)
}

pub fn write_session_file(path: &Path, session: &AuditSession) -> Result<(), FormatError> {
    write_atomic(path, save_session(session).as_bytes())
}

pub fn read_session_file(path: &Path) -> Result<AuditSession, FormatError> {
    let text = fs::read_to_string(path).map_err(|source| FormatError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_session(&text)
}
