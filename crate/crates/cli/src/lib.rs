//! Subcommands behind the `marrop-audit` binary.
//!
//! A session directory holds `session.json` and a copy of the election
//! bundle under `election/`, so every command after `open` needs only the
//! directory.

use std::fmt::Write as _;
use std::fs;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use marrop_audit::io::{self, load_election_dir, load_hand_counts, read_session_file, session_path, write_election_dir, write_session_file};
use marrop_audit::planner::{Columns, PlanOptions};
use marrop_audit::simulate::TrueTallySet;
use marrop_audit::{compare_plans, plant_errors, simulate, AuditSession, Election, SessionConfig, SimulationConfig, TaintHypothesis};
use marrop_audit_api::{router, AppState, ServerConfig};
use serde::Serialize;

pub const ELECTION_SUBDIR: &str = "election";

#[derive(Debug, Parser)]
#[command(name = "marrop-audit", version, about = "Simultaneous risk-limiting audits with MARROP error bounds")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Compare independent and simultaneous audit workloads.
    Plan(PlanArgs),
    /// Open a session: compute bounds, draw the sample, write session.json.
    Open(OpenArgs),
    /// Extend the draw list of a session to --n draws.
    Draw(DrawArgs),
    /// Record hand counts (batch_id,candidate_id,votes) for pending draws.
    Record(RecordArgs),
    /// Print U, draws recorded, P and the decision.
    Status(SessionDir),
    /// Stop sampling and call for a full hand count.
    Escalate(SessionDir),
    /// Monte Carlo audits against a true tally with planted errors.
    Simulate(SimulateArgs),
    /// Full session report.
    Report(ReportArgs),
    /// Serve the HTTP API.
    Serve(ServeArgs),
}

#[derive(Debug, Args)]
pub struct PlanArgs {
    /// Election CSV bundle directory.
    pub election: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    /// Taint pattern such as 5x0.04 or 5x0.04,2x0.1; 0 for none.
    #[arg(long, default_value = "0")]
    pub taint_hypothesis: TaintHypothesis,
    /// Comma-separated races to audit (default: all).
    #[arg(long, value_delimiter = ',')]
    pub races: Vec<String>,
    #[arg(long, conflicts_with = "pcer")]
    pub fwer: bool,
    #[arg(long)]
    pub pcer: bool,
    /// Round bounds to this many decimals before planning.
    #[arg(long)]
    pub bound_decimals: Option<u32>,
    /// CSV instead of an aligned table.
    #[arg(long)]
    pub csv: bool,
}

#[derive(Debug, Args)]
pub struct OpenArgs {
    /// Election CSV bundle directory.
    pub election: PathBuf,
    /// Session directory to create.
    #[arg(long)]
    pub dir: PathBuf,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',')]
    pub races: Vec<String>,
    #[arg(long)]
    pub bound_decimals: Option<u32>,
}

#[derive(Debug, Args)]
pub struct SessionDir {
    pub dir: PathBuf,
}

#[derive(Debug, Args)]
pub struct DrawArgs {
    pub dir: PathBuf,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub n: usize,
}

#[derive(Debug, Args)]
pub struct RecordArgs {
    pub dir: PathBuf,
    /// Hand-count CSV; batches must appear in draw order.
    pub hand_counts: PathBuf,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    /// Election CSV bundle directory.
    pub election: PathBuf,
    /// Plant errors that reverse this race's outcome (default: truth = reported).
    #[arg(long)]
    pub flip_race: Option<String>,
    /// Overstatement of the flipped race's smallest margin, as a multiple of it.
    #[arg(long, default_value_t = 1.05)]
    pub budget: f64,
    /// Batches the planted errors are spread over (default: all carrying the race).
    #[arg(long)]
    pub spread: Option<usize>,
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    pub trials: u64,
    #[arg(long)]
    pub seed: u64,
    #[arg(long)]
    pub alpha: f64,
    #[arg(long)]
    pub n: usize,
    #[arg(long, value_delimiter = ',')]
    pub races: Vec<String>,
    #[arg(long)]
    pub bound_decimals: Option<u32>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    pub dir: PathBuf,
    #[arg(long)]
    pub json: bool,
}

#[derive(Debug, Args)]
pub struct ServeArgs {
    #[arg(long, default_value = "127.0.0.1:8080")]
    pub addr: SocketAddr,
    #[arg(long)]
    pub data_dir: Option<PathBuf>,
    /// Shared bearer token required on every request.
    #[arg(long, env = "MARROP_AUDIT_TOKEN")]
    pub token: Option<String>,
}

/// Runs a command and returns what it prints.
pub fn run(command: Command) -> Result<String> {
    match command {
        Command::Plan(a) => plan(a),
        Command::Open(a) => open(a),
        Command::Draw(a) => draw(a),
        Command::Record(a) => record(a),
        Command::Status(a) => {
            let (e, s) = load(&a.dir)?;
            Ok(status(&e, &s))
        }
        Command::Escalate(a) => {
            let (e, mut s) = load(&a.dir)?;
            s.escalate()?;
            save(&a.dir, &s)?;
            Ok(status(&e, &s))
        }
        Command::Simulate(a) => simulate_cmd(a),
        Command::Report(a) => report(a),
        Command::Serve(a) => serve(a),
    }
}

fn plan(a: PlanArgs) -> Result<String> {
    let election = load_election_dir(&a.election)?;
    let options = PlanOptions {
        races: a.races,
        bound_decimals: a.bound_decimals,
        ..PlanOptions::default()
    };
    let cmp = compare_plans(&election, a.alpha, &a.taint_hypothesis, &options)?;
    let columns = match (a.fwer, a.pcer) {
        (true, _) => Columns::Fwer,
        (_, true) => Columns::Pcer,
        _ => Columns::Both,
    };
    Ok(if a.csv { cmp.to_csv(columns) } else { cmp.render(columns) })
}

fn load(dir: &Path) -> Result<(Election, AuditSession)> {
    let election = load_election_dir(dir.join(ELECTION_SUBDIR))
        .with_context(|| format!("loading the election stored in {}", dir.display()))?;
    let session = read_session_file(&session_path(dir))?;
    if session.election_digest() != election.digest() {
        bail!("{} does not match the election the session was opened on", dir.join(ELECTION_SUBDIR).display());
    }
    Ok((election, session))
}

fn save(dir: &Path, session: &AuditSession) -> Result<()> {
    write_session_file(&session_path(dir), session)?;
    Ok(())
}

fn open(a: OpenArgs) -> Result<String> {
    let election = load_election_dir(&a.election)?;
    if session_path(&a.dir).exists() {
        bail!("{} already holds a session", a.dir.display());
    }
    let session = AuditSession::open(
        &election,
        &SessionConfig {
            races: a.races,
            risk_limit: a.alpha,
            seed: a.seed,
            planned_draws: a.n,
            bound_decimals: a.bound_decimals,
        },
    )?;
    fs::create_dir_all(&a.dir).with_context(|| format!("creating {}", a.dir.display()))?;
    write_election_dir(&election, a.dir.join(ELECTION_SUBDIR))?;
    save(&a.dir, &session)?;
    let mut out = status(&election, &session);
    out += &draw_list(&session);
    Ok(out)
}

fn draw_list(s: &AuditSession) -> String {
    let mut out = String::from("draw  batch\n");
    for (i, b) in s.draws().iter().enumerate() {
        let mark = if i < s.records().len() { "  (recorded)" } else { "" };
        let _ = writeln!(out, "{:4}  {b}{mark}", i + 1);
    }
    out
}

fn draw(a: DrawArgs) -> Result<String> {
    let (e, mut s) = load(&a.dir)?;
    s.extend_draws(&e, a.n, a.seed)?;
    save(&a.dir, &s)?;
    Ok(status(&e, &s) + &draw_list(&s))
}

fn record(a: RecordArgs) -> Result<String> {
    let (e, mut s) = load(&a.dir)?;
    let name = a.hand_counts.display().to_string();
    let file = fs::File::open(&a.hand_counts).with_context(|| format!("opening {name}"))?;
    let hands = load_hand_counts(&name, file)?;
    // all or nothing: the session file changes only if every count is accepted
    for h in &hands {
        s.record_batch(&e, h).with_context(|| format!("recording batch `{}`", h.batch_id))?;
    }
    save(&a.dir, &s)?;
    Ok(status(&e, &s))
}

/// Status block; the last line is the decision.
pub fn status(e: &Election, s: &AuditSession) -> String {
    let mut out = String::new();
    let (batches, ballots) = s.counted(e);
    let _ = writeln!(out, "U: {:.4}", s.total_bound());
    let _ = writeln!(out, "risk limit: {}", s.risk_limit());
    let _ = writeln!(out, "draws recorded: {} of {}", s.records().len(), s.draws().len());
    let _ = writeln!(out, "batches counted: {batches} ({ballots} ballots)");
    if let Some((j, b)) = s.next_pending() {
        let _ = writeln!(out, "next draw: {j} {b}");
    }
    let _ = writeln!(out, "P: {:.4}", s.current_p());
    let _ = writeln!(out, "{}", s.decision_line());
    out
}

fn simulate_cmd(a: SimulateArgs) -> Result<String> {
    let election = load_election_dir(&a.election)?;
    let truth = match &a.flip_race {
        None => TrueTallySet::reported(&election),
        Some(race) => {
            let r = election
                .race_position(race)
                .with_context(|| format!("unknown race `{race}`"))?;
            let spread = a
                .spread
                .unwrap_or_else(|| election.batches().iter().filter(|b| b.contains_race(r)).count());
            plant_errors(&election, race, a.budget, spread, a.seed)?
        }
    };
    let report = simulate(
        &election,
        &truth,
        &SimulationConfig {
            races: a.races,
            risk_limit: a.alpha,
            planned_draws: a.n,
            trials: a.trials,
            seed: a.seed,
            bound_decimals: a.bound_decimals,
        },
    )?;
    let mut out = report.to_string();
    let wrong = !report.truth.all_correct;
    let _ = writeln!(
        out,
        "risk band:     {:.4} (alpha + 3 sigma); {}",
        report.risk_band(),
        match (wrong, report.certify_rate <= report.risk_band()) {
            (false, _) => "outcomes are correct, certifying is not an error",
            (true, true) => "certify rate within the band",
            (true, false) => "certify rate ABOVE the band",
        }
    );
    Ok(out)
}

#[derive(Serialize)]
struct Report<'a> {
    election_digest: &'a str,
    risk_limit: f64,
    seed: u64,
    audited_races: &'a [String],
    bound_decimals: Option<u32>,
    total_bound: f64,
    status: marrop_audit::SessionStatus,
    decision: String,
    escalation_recommended: bool,
    current_p: f64,
    draws: &'a [String],
    records: &'a [marrop_audit::TaintRecord],
    projection: marrop_audit::Projection,
}

fn report(a: ReportArgs) -> Result<String> {
    let (e, s) = load(&a.dir)?;
    if a.json {
        let r = Report {
            election_digest: s.election_digest(),
            risk_limit: s.risk_limit(),
            seed: s.seed(),
            audited_races: s.bounds().audited_races(),
            bound_decimals: s.bounds().decimals(),
            total_bound: s.total_bound(),
            status: s.status(),
            decision: s.decision_line(),
            escalation_recommended: s.escalation_recommended(),
            current_p: s.current_p(),
            draws: s.draws(),
            records: s.records(),
            projection: s.projection(&e),
        };
        return Ok(serde_json::to_string_pretty(&r)? + "\n");
    }
    let mut out = status(&e, &s);
    let _ = writeln!(out, "audited races: {}", s.bounds().audited_races().join(", "));
    let _ = writeln!(out, "seed: {}", s.seed());
    let _ = writeln!(out, "election digest: {}", s.election_digest());
    let p = s.projection(&e);
    let _ = writeln!(
        out,
        "planned workload: {:.2} batches, {:.2} ballots, {:.2} votes",
        p.planned.batches, p.planned.ballots, p.planned.votes
    );
    let _ = writeln!(
        out,
        "remaining: {} draws, {:.2} more batches and {:.2} more ballots expected",
        p.remaining_draws, p.remaining_batches, p.remaining_ballots
    );
    let _ = writeln!(out, "\ndraw  batch      bound     e_p        taint");
    for r in s.records() {
        let _ = writeln!(
            out,
            "{:4}  {:9}  {:.6}  {:+.6}  {:+.5}",
            r.draw_index, r.batch_id, r.bound, r.observed_marrop, r.taint
        );
    }
    Ok(out)
}

fn serve(a: ServeArgs) -> Result<String> {
    let state = AppState::new(ServerConfig {
        data_dir: a.data_dir,
        token: a.token,
    })
    .map_err(|e| anyhow::anyhow!("{}: {}", e.body.code, e.body.message))?;
    let app = router(state);
    let rt = tokio::runtime::Runtime::new()?;
    rt.block_on(async move {
        let listener = tokio::net::TcpListener::bind(a.addr).await?;
        eprintln!("listening on http://{}", listener.local_addr()?);
        axum::serve(listener, app).await?;
        Ok::<_, anyhow::Error>(())
    })?;
    Ok(String::new())
}

pub use io::SESSION_FILE;
