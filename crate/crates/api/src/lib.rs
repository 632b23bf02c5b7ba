//! HTTP JSON service for running audit sessions from the console.
//!
//! | method | path                          | body                                   |
//! |--------|-------------------------------|----------------------------------------|
//! | POST   | `/elections`                  | multipart CSV bundle, or election JSON |
//! | GET    | `/elections/{id}`             |                                        |
//! | POST   | `/elections/{id}/sessions`    | `{alpha, seed, n, races, bound_decimals}` |
//! | GET    | `/sessions/{id}`              |                                        |
//! | POST   | `/sessions/{id}/handcounts`   | `{batch_id, counts, version}`          |
//! | POST   | `/sessions/{id}/draws`        | `{n, seed, version}`                   |
//! | POST   | `/sessions/{id}/escalate`     | `{version}`                            |
//!
//! Every session response is a full [`SessionResource`]. Mutations carry the
//! version they were computed against; a stale version gets 409 and nothing
//! changes. Errors are `{code, message}`.
//!
//! With a data directory, elections are kept as CSV bundles under
//! `elections/<id>/` and sessions as `sessions/<id>/session.json` (the same
//! document the command line writes) plus `sessions/<id>/meta.json`.

mod error;
mod views;

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::sync::{Arc, RwLock};

use axum::body::Bytes;
use axum::extract::{DefaultBodyLimit, FromRequest, Multipart, Path as UrlPath, Request, State};
use axum::http::{header, StatusCode};
use axum::middleware::{self, Next};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use marrop_audit::io::{self, ElectionFiles};
use marrop_audit::{AuditSession, Election, ElectionInput, HandCount, SessionConfig};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

pub use error::{ApiError, ErrorBody};
pub use views::{ElectionSummary, SessionResource};

#[derive(Debug, Clone, Default)]
pub struct ServerConfig {
    /// Persist elections and sessions here and reload them on start.
    pub data_dir: Option<PathBuf>,
    /// Shared bearer token; when set every request must carry it.
    pub token: Option<String>,
}

#[derive(Clone)]
struct SessionEntry {
    election_id: String,
    version: u64,
    session: AuditSession,
}

#[derive(Default)]
struct Store {
    elections: BTreeMap<String, Arc<Election>>,
    sessions: BTreeMap<String, Arc<SessionEntry>>,
    next_election: u64,
    next_session: u64,
}

#[derive(Clone)]
pub struct AppState {
    store: Arc<RwLock<Store>>,
    config: Arc<ServerConfig>,
}

#[derive(Serialize, Deserialize)]
struct SessionMeta {
    session_id: String,
    election_id: String,
    version: u64,
}

fn numeric_suffix(id: &str) -> u64 {
    id.rsplit('-').next().and_then(|n| n.parse().ok()).unwrap_or(0)
}

impl AppState {
    /// Builds the state, reloading anything already in the data directory.
    pub fn new(config: ServerConfig) -> Result<AppState, ApiError> {
        let mut store = Store::default();
        if let Some(dir) = &config.data_dir {
            load_store(dir, &mut store)?;
        }
        Ok(AppState {
            store: Arc::new(RwLock::new(store)),
            config: Arc::new(config),
        })
    }

    fn election(&self, id: &str) -> Result<Arc<Election>, ApiError> {
        let store = self.store.read().expect("store lock");
        store.elections.get(id).cloned().ok_or_else(|| ApiError::not_found("election", id))
    }

    fn session(&self, id: &str) -> Result<Arc<SessionEntry>, ApiError> {
        let store = self.store.read().expect("store lock");
        store.sessions.get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))
    }

    fn resource(&self, id: &str, entry: &SessionEntry) -> Result<SessionResource, ApiError> {
        let e = self.election(&entry.election_id)?;
        Ok(SessionResource::new(id, &entry.election_id, entry.version, &entry.session, &e))
    }

    /// Applies `f` to a copy of the session at `version` and stores the result
    /// as `version + 1`. The write lock is held throughout, so concurrent
    /// requests for the same version see exactly one success.
    fn mutate(
        &self,
        id: &str,
        version: u64,
        f: impl FnOnce(&mut AuditSession, &Election) -> Result<(), ApiError>,
    ) -> Result<SessionResource, ApiError> {
        let mut store = self.store.write().expect("store lock");
        let entry = store.sessions.get(id).cloned().ok_or_else(|| ApiError::not_found("session", id))?;
        if entry.version != version {
            return Err(ApiError::conflict(entry.version, version));
        }
        let election = store
            .elections
            .get(&entry.election_id)
            .cloned()
            .ok_or_else(|| ApiError::not_found("election", &entry.election_id))?;
        let mut next = (*entry).clone();
        f(&mut next.session, &election)?;
        next.version += 1;
        self.persist_session(id, &next)?;
        let resource = SessionResource::new(id, &next.election_id, next.version, &next.session, &election);
        store.sessions.insert(id.to_string(), Arc::new(next));
        Ok(resource)
    }

    fn persist_session(&self, id: &str, entry: &SessionEntry) -> Result<(), ApiError> {
        let Some(dir) = &self.config.data_dir else { return Ok(()) };
        let dir = dir.join("sessions").join(id);
        fs::create_dir_all(&dir).map_err(|e| ApiError::storage(e.to_string()))?;
        io::write_session_file(&io::session_path(&dir), &entry.session)?;
        let meta = SessionMeta {
            session_id: id.to_string(),
            election_id: entry.election_id.clone(),
            version: entry.version,
        };
        let text = serde_json::to_string_pretty(&meta).expect("meta serializes");
        io::write_atomic(&dir.join("meta.json"), text.as_bytes())?;
        Ok(())
    }
}

fn load_store(dir: &Path, store: &mut Store) -> Result<(), ApiError> {
    let subdirs = |name: &str| -> Result<Vec<(String, PathBuf)>, ApiError> {
        let root = dir.join(name);
        if !root.exists() {
            return Ok(Vec::new());
        }
        let mut out = Vec::new();
        for entry in fs::read_dir(&root).map_err(|e| ApiError::storage(e.to_string()))? {
            let entry = entry.map_err(|e| ApiError::storage(e.to_string()))?;
            out.push((entry.file_name().to_string_lossy().into_owned(), entry.path()));
        }
        out.sort();
        Ok(out)
    };
    for (id, path) in subdirs("elections")? {
        let e = io::load_election_dir(&path)?;
        store.next_election = store.next_election.max(numeric_suffix(&id));
        store.elections.insert(id, Arc::new(e));
    }
    for (id, path) in subdirs("sessions")? {
        let meta_text = fs::read_to_string(path.join("meta.json")).map_err(|e| ApiError::storage(e.to_string()))?;
        let meta: SessionMeta = serde_json::from_str(&meta_text).map_err(|e| ApiError::storage(e.to_string()))?;
        let session = io::read_session_file(&io::session_path(&path))?;
        store.next_session = store.next_session.max(numeric_suffix(&id));
        store.sessions.insert(
            id,
            Arc::new(SessionEntry {
                election_id: meta.election_id,
                version: meta.version,
                session,
            }),
        );
    }
    Ok(())
}

/// Builds the router.
pub fn router(state: AppState) -> Router {
    Router::new()
        .route("/elections", post(create_election))
        .route("/elections/{id}", get(get_election))
        .route("/elections/{id}/sessions", post(open_session))
        .route("/sessions/{id}", get(get_session))
        .route("/sessions/{id}/handcounts", post(record_hand_count))
        .route("/sessions/{id}/draws", post(extend_draws))
        .route("/sessions/{id}/escalate", post(escalate))
        .layer(middleware::from_fn_with_state(state.clone(), require_token))
        .layer(DefaultBodyLimit::max(64 * 1024 * 1024))
        .with_state(state)
}

async fn require_token(State(state): State<AppState>, request: Request, next: Next) -> Response {
    if let Some(token) = &state.config.token {
        let given = request
            .headers()
            .get(header::AUTHORIZATION)
            .and_then(|v| v.to_str().ok())
            .and_then(|v| v.strip_prefix("Bearer "));
        if given != Some(token.as_str()) {
            return ApiError::new(StatusCode::UNAUTHORIZED, "unauthorized", "missing or wrong bearer token").into_response();
        }
    }
    next.run(request).await
}

fn parse_json<T: DeserializeOwned>(body: &[u8]) -> Result<T, ApiError> {
    serde_json::from_slice(body).map_err(|e| ApiError::bad_request(format!("malformed JSON body: {e}")))
}

const BUNDLE_FIELDS: [&str; 5] = ["races", "candidates", "batches", "batch_races", "reported_votes"];

async fn election_from_multipart(mut form: Multipart) -> Result<Election, ApiError> {
    let mut parts: BTreeMap<String, Bytes> = BTreeMap::new();
    while let Some(field) = form
        .next_field()
        .await
        .map_err(|e| ApiError::bad_request(format!("malformed multipart body: {e}")))?
    {
        let name = field.name().unwrap_or_default().trim_end_matches(".csv").to_string();
        if !BUNDLE_FIELDS.contains(&name.as_str()) {
            return Err(ApiError::bad_request(format!("unexpected form field `{name}`")));
        }
        let data = field
            .bytes()
            .await
            .map_err(|e| ApiError::bad_request(format!("malformed multipart body: {e}")))?;
        parts.insert(name, data);
    }
    let mut take = |name: &str| {
        parts
            .remove(name)
            .map(|b| std::io::Cursor::new(b.to_vec()))
            .ok_or_else(|| ApiError::bad_request(format!("missing form field `{name}`")))
    };
    Ok(io::load_election(ElectionFiles {
        races: take("races")?,
        candidates: take("candidates")?,
        batches: take("batches")?,
        batch_races: take("batch_races")?,
        reported_votes: take("reported_votes")?,
    })?)
}

async fn create_election(State(state): State<AppState>, request: Request) -> Result<impl IntoResponse, ApiError> {
    let content_type = request
        .headers()
        .get(header::CONTENT_TYPE)
        .and_then(|v| v.to_str().ok())
        .unwrap_or_default()
        .to_string();
    let election = if content_type.starts_with("multipart/form-data") {
        let form = Multipart::from_request(request, &state)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        election_from_multipart(form).await?
    } else {
        let body = Bytes::from_request(request, &state)
            .await
            .map_err(|e| ApiError::bad_request(e.body_text()))?;
        let input: ElectionInput = parse_json(&body)?;
        Election::validate(&input)?
    };

    let mut store = state.store.write().expect("store lock");
    store.next_election += 1;
    let id = format!("election-{}", store.next_election);
    if let Some(dir) = &state.config.data_dir {
        io::write_election_dir(&election, dir.join("elections").join(&id))?;
    }
    let summary = ElectionSummary::new(&id, &election);
    store.elections.insert(id.clone(), Arc::new(election));
    tracing::info!(election = %id, "election stored");
    Ok((StatusCode::CREATED, Json(summary)))
}

async fn get_election(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<ElectionSummary>, ApiError> {
    let e = state.election(&id)?;
    Ok(Json(ElectionSummary::new(&id, &e)))
}

#[derive(Deserialize)]
struct OpenRequest {
    alpha: f64,
    seed: u64,
    n: usize,
    #[serde(default)]
    races: Vec<String>,
    #[serde(default)]
    bound_decimals: Option<u32>,
}

async fn open_session(
    State(state): State<AppState>,
    UrlPath(election_id): UrlPath<String>,
    body: Bytes,
) -> Result<impl IntoResponse, ApiError> {
    let req: OpenRequest = parse_json(&body)?;
    let election = state.election(&election_id)?;
    let session = AuditSession::open(
        &election,
        &SessionConfig {
            races: req.races,
            risk_limit: req.alpha,
            seed: req.seed,
            planned_draws: req.n,
            bound_decimals: req.bound_decimals,
        },
    )?;
    let mut store = state.store.write().expect("store lock");
    store.next_session += 1;
    let id = format!("session-{}", store.next_session);
    let entry = SessionEntry {
        election_id,
        version: 1,
        session,
    };
    state.persist_session(&id, &entry)?;
    let resource = SessionResource::new(&id, &entry.election_id, entry.version, &entry.session, &election);
    store.sessions.insert(id.clone(), Arc::new(entry));
    tracing::info!(session = %id, "session opened");
    Ok((StatusCode::CREATED, Json(resource)))
}

async fn get_session(State(state): State<AppState>, UrlPath(id): UrlPath<String>) -> Result<Json<SessionResource>, ApiError> {
    let entry = state.session(&id)?;
    Ok(Json(state.resource(&id, &entry)?))
}

#[derive(Deserialize)]
struct HandCountRequest {
    batch_id: String,
    counts: BTreeMap<String, u64>,
    version: u64,
}

async fn record_hand_count(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionResource>, ApiError> {
    let req: HandCountRequest = parse_json(&body)?;
    let hand = HandCount {
        batch_id: req.batch_id,
        actual_votes: req.counts,
    };
    let resource = state.mutate(&id, req.version, |s, e| Ok(s.record_batch(e, &hand)?))?;
    Ok(Json(resource))
}

#[derive(Deserialize)]
struct DrawRequest {
    n: usize,
    seed: u64,
    version: u64,
}

async fn extend_draws(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionResource>, ApiError> {
    let req: DrawRequest = parse_json(&body)?;
    let resource = state.mutate(&id, req.version, |s, e| Ok(s.extend_draws(e, req.n, req.seed)?))?;
    Ok(Json(resource))
}

#[derive(Deserialize)]
struct VersionRequest {
    version: u64,
}

async fn escalate(
    State(state): State<AppState>,
    UrlPath(id): UrlPath<String>,
    body: Bytes,
) -> Result<Json<SessionResource>, ApiError> {
    let req: VersionRequest = parse_json(&body)?;
    let resource = state.mutate(&id, req.version, |s, _| Ok(s.escalate()?))?;
    Ok(Json(resource))
}
