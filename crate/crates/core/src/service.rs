//! HTTP session service: one live interactive run per session, paused at
//! every drift question until an answer arrives.
//!
//! Routes:
//!
//! - `POST /sessions` with a [`CreateSession`] body
//! - `GET /sessions/{id}` for a [`SessionSummary`]
//! - `GET /sessions/{id}/events?since=N&wait_ms=M` (long poll)
//! - `POST /sessions/{id}/answer` with an [`Answer`] body
//! - `GET /sessions/{id}/hierarchy`

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::mpsc;
use std::sync::{Arc, Mutex, MutexGuard};
use std::time::Duration;

use axum::extract::{Path as UrlPath, Query, State};
use axum::http::StatusCode;
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::{Deserialize, Serialize};
use tokio::sync::{oneshot, Notify};

use crate::adaptation::AdaptationReport;
use crate::disambiguation::{Answer, DriftDescription};
use crate::error::{Error, Result};
use crate::events::{EngineEvent, EventSink};
use crate::hierarchy::ConceptHierarchy;
use crate::runner::{Engine, MethodVariant, MetricRecord, RunConfig};
use crate::supervisor::{Question, ScriptedUser, Supervisor};

/// Longest a single poll may block.
pub const MAX_WAIT_MS: u64 = 30_000;
const METRIC_TAIL: usize = 50;

#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CreateSession {
    #[serde(default)]
    pub config: RunConfig,
    /// Defaults to the first of `config.seeds`.
    #[serde(default)]
    pub seed: Option<u64>,
    /// Apply the machine's guess if nobody answers within this many ms.
    #[serde(default)]
    pub auto_answer_ms: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunState {
    Streaming,
    Paused,
    Finished,
    Failed,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SessionSummary {
    pub id: String,
    pub seed: u64,
    pub state: RunState,
    pub events: usize,
    pub question: Option<DriftDescription>,
    pub hierarchy_version: u64,
    pub metric_tail: Vec<MetricRecord>,
    pub applied: Vec<AdaptationReport>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EventPage {
    /// Pass back as `since` to get the next page.
    pub cursor: usize,
    pub state: RunState,
    pub events: Vec<EngineEvent>,
}

#[derive(Clone, Debug, Default, Deserialize)]
pub struct PollParams {
    #[serde(default)]
    pub since: usize,
    #[serde(default)]
    pub wait_ms: u64,
}

type Reply = oneshot::Sender<std::result::Result<AdaptationReport, String>>;

struct Submission {
    answer: Answer,
    reply: Reply,
}

struct SessionState {
    seed: u64,
    state: RunState,
    events: Vec<EngineEvent>,
    question: Option<DriftDescription>,
    /// An answer is being processed by the engine.
    answering: bool,
    hierarchy: ConceptHierarchy,
    metric_tail: Vec<MetricRecord>,
    applied: Vec<AdaptationReport>,
}

struct Session {
    state: Mutex<SessionState>,
    changed: Notify,
    answers: Mutex<mpsc::Sender<Submission>>,
}

impl Session {
    fn lock(&self) -> MutexGuard<'_, SessionState> {
        self.state.lock().unwrap_or_else(|e| e.into_inner())
    }
}

/// Records events in memory and on disk and wakes pollers.
struct SessionSink {
    session: Arc<Session>,
    log: Option<BufWriter<File>>,
}

impl EventSink for SessionSink {
    fn emit(&mut self, event: &EngineEvent) {
        if let Some(out) = &mut self.log {
            let res = serde_json::to_writer(&mut *out, event)
                .map_err(std::io::Error::from)
                .and_then(|_| out.write_all(b"\n"))
                .and_then(|_| out.flush());
            if let Err(e) = res {
                log::error!("session log write failed: {e}");
            }
        }
        {
            let mut st = self.session.lock();
            match event {
                EngineEvent::Question { description, .. } => {
                    st.question = Some(description.clone());
                    st.state = RunState::Paused;
                }
                EngineEvent::Adaptation { report, .. } if st.question.is_some() => {
                    st.question = None;
                    st.state = RunState::Streaming;
                    st.applied.push(report.clone());
                }
                EngineEvent::Metric(m) => {
                    if st.metric_tail.len() == METRIC_TAIL {
                        st.metric_tail.remove(0);
                    }
                    st.metric_tail.push(m.clone());
                }
                EngineEvent::Finished { .. } => st.state = RunState::Finished,
                EngineEvent::Failed { .. } => {
                    st.state = RunState::Failed;
                    st.question = None;
                }
                _ => {}
            }
            st.events.push(event.clone());
        }
        self.session.changed.notify_waiters();
    }
}

/// Answers come from HTTP handlers through a channel. A successful
/// adaptation is acknowledged only after the iteration completes, so the
/// hierarchy snapshot is current by the time the caller sees the report.
struct ChannelSupervisor {
    session: Arc<Session>,
    rx: mpsc::Receiver<Submission>,
    auto_answer: Option<Duration>,
    reply: Option<Reply>,
    done: Option<(Reply, AdaptationReport)>,
}

impl Supervisor for ChannelSupervisor {
    fn answer(&mut self, _q: &Question<'_>) -> Result<Answer> {
        let sub = match self.auto_answer {
            Some(limit) => match self.rx.recv_timeout(limit) {
                Ok(sub) => Some(sub),
                Err(mpsc::RecvTimeoutError::Timeout) => {
                    // Handlers send while holding the state lock, so nothing
                    // can slip in between this check and the flag.
                    let mut st = self.session.lock();
                    match self.rx.try_recv() {
                        Ok(sub) => Some(sub),
                        Err(_) => {
                            st.answering = true;
                            None
                        }
                    }
                }
                Err(mpsc::RecvTimeoutError::Disconnected) => return Err(closed()),
            },
            None => Some(self.rx.recv().map_err(|_| closed())?),
        };
        match sub {
            Some(sub) => {
                self.reply = Some(sub.reply);
                Ok(sub.answer)
            }
            None => {
                log::info!("no answer in time, applying the machine guess");
                Ok(Answer::confirm())
            }
        }
    }

    fn outcome(&mut self, result: std::result::Result<&AdaptationReport, &Error>) {
        let reply = self.reply.take();
        match result {
            Ok(report) => {
                if let Some(reply) = reply {
                    self.done = Some((reply, report.clone()));
                } else {
                    self.session.lock().answering = false;
                }
            }
            Err(e) => {
                self.session.lock().answering = false;
                if let Some(reply) = reply {
                    let _ = reply.send(Err(e.to_string()));
                }
            }
        }
    }

    fn max_attempts(&self) -> Option<usize> {
        None
    }
}

fn closed() -> Error {
    Error::InvalidArgument("session closed".into())
}

fn drive(mut engine: Engine, mut sup: ChannelSupervisor, mut sink: SessionSink) {
    let session = sup.session.clone();
    sink.emit(&engine.init_event());
    while !engine.is_finished() {
        let step = engine.step(&mut sup, &mut sink);
        {
            let mut st = session.lock();
            if st.hierarchy.version() != engine.hierarchy().version() {
                st.hierarchy = engine.hierarchy().clone();
            }
            if sup.done.is_some() {
                st.answering = false;
            }
        }
        if let Some((reply, report)) = sup.done.take() {
            let _ = reply.send(Ok(report));
        }
        if let Err(e) = step {
            log::warn!("session stopped: {e}");
            sink.emit(&EngineEvent::Failed { reason: e.to_string() });
            return;
        }
    }
}

#[derive(Debug)]
pub enum ServiceError {
    NotFound(String),
    Conflict(String),
    Invalid(String),
    Internal(String),
}

#[derive(Serialize)]
struct ErrorBody {
    error: String,
}

impl IntoResponse for ServiceError {
    fn into_response(self) -> Response {
        let (code, msg) = match self {
            ServiceError::NotFound(m) => (StatusCode::NOT_FOUND, m),
            ServiceError::Conflict(m) => (StatusCode::CONFLICT, m),
            ServiceError::Invalid(m) => (StatusCode::UNPROCESSABLE_ENTITY, m),
            ServiceError::Internal(m) => (StatusCode::INTERNAL_SERVER_ERROR, m),
        };
        (code, Json(ErrorBody { error: msg })).into_response()
    }
}

/// Shared registry of sessions.
#[derive(Clone)]
pub struct SessionService {
    sessions: Arc<Mutex<BTreeMap<String, Arc<Session>>>>,
    next_id: Arc<AtomicU64>,
    data_dir: Option<PathBuf>,
}

impl SessionService {
    /// Sessions are persisted under `data_dir` as `<id>.jsonl` when given.
    pub fn new(data_dir: Option<PathBuf>) -> Result<Self> {
        if let Some(dir) = &data_dir {
            std::fs::create_dir_all(dir)?;
        }
        Ok(SessionService {
            sessions: Arc::default(),
            next_id: Arc::new(AtomicU64::new(1)),
            data_dir,
        })
    }

    pub fn log_path(&self, id: &str) -> Option<PathBuf> {
        self.data_dir.as_ref().map(|d| d.join(format!("{id}.jsonl")))
    }

    fn fresh_id(&self) -> String {
        loop {
            let id = format!("s{:06}", self.next_id.fetch_add(1, Ordering::Relaxed));
            let taken = self.log_path(&id).is_some_and(|p| p.exists());
            if !taken {
                return id;
            }
        }
    }

    fn get(&self, id: &str) -> std::result::Result<Arc<Session>, ServiceError> {
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .get(id)
            .cloned()
            .ok_or_else(|| ServiceError::NotFound(format!("no session {id}")))
    }

    /// Validates the request and starts the engine thread.
    pub fn create(&self, req: CreateSession) -> std::result::Result<SessionSummary, ServiceError> {
        let cfg = req.config;
        if cfg.method != MethodVariant::TrckdInteractive {
            return Err(ServiceError::Invalid(format!(
                "sessions need method trckd_interactive, got {}",
                cfg.method
            )));
        }
        let seed = req.seed.or_else(|| cfg.seeds.first().copied()).unwrap_or(0);
        let engine = Engine::new(&cfg, seed).map_err(|e| ServiceError::Invalid(e.to_string()))?;
        let id = self.fresh_id();
        let log = match self.log_path(&id) {
            Some(path) => Some(BufWriter::new(
                File::create(&path).map_err(|e| ServiceError::Internal(e.to_string()))?,
            )),
            None => None,
        };
        let (tx, rx) = mpsc::channel();
        let session = Arc::new(Session {
            state: Mutex::new(SessionState {
                seed,
                state: RunState::Streaming,
                events: Vec::new(),
                question: None,
                answering: false,
                hierarchy: engine.hierarchy().clone(),
                metric_tail: Vec::new(),
                applied: Vec::new(),
            }),
            changed: Notify::new(),
            answers: Mutex::new(tx),
        });
        let sup = ChannelSupervisor {
            session: session.clone(),
            rx,
            auto_answer: req.auto_answer_ms.map(Duration::from_millis),
            reply: None,
            done: None,
        };
        let sink = SessionSink {
            session: session.clone(),
            log,
        };
        std::thread::Builder::new()
            .name(format!("session-{id}"))
            .spawn(move || drive(engine, sup, sink))
            .map_err(|e| ServiceError::Internal(e.to_string()))?;
        self.sessions
            .lock()
            .unwrap_or_else(|e| e.into_inner())
            .insert(id.clone(), session.clone());
        log::info!("session {id} started (seed {seed})");
        let out = summary(&id, &session.lock());
        Ok(out)
    }

    pub fn summary(&self, id: &str) -> std::result::Result<SessionSummary, ServiceError> {
        let s = self.get(id)?;
        let st = s.lock();
        Ok(summary(id, &st))
    }

    /// Events after `since`, waiting up to `wait` for new ones.
    pub async fn poll(&self, id: &str, since: usize, wait: Duration) -> std::result::Result<EventPage, ServiceError> {
        let s = self.get(id)?;
        let deadline = tokio::time::Instant::now() + wait.min(Duration::from_millis(MAX_WAIT_MS));
        loop {
            let notified = s.changed.notified();
            tokio::pin!(notified);
            notified.as_mut().enable();
            {
                let st = s.lock();
                let ended = matches!(st.state, RunState::Finished | RunState::Failed);
                if st.events.len() > since || ended || tokio::time::Instant::now() >= deadline {
                    let events = st.events.get(since..).map(<[_]>::to_vec).unwrap_or_default();
                    return Ok(EventPage {
                        cursor: since.max(st.events.len()),
                        state: st.state,
                        events,
                    });
                }
            }
            let _ = tokio::time::timeout_at(deadline, notified).await;
        }
    }

    pub async fn answer(&self, id: &str, answer: Answer) -> std::result::Result<AdaptationReport, ServiceError> {
        let s = self.get(id)?;
        let (tx, rx) = oneshot::channel();
        {
            let mut st = s.lock();
            if st.question.is_none() || st.answering {
                return Err(ServiceError::Conflict("no open question".into()));
            }
            st.answering = true;
            let sent = s
                .answers
                .lock()
                .unwrap_or_else(|e| e.into_inner())
                .send(Submission { answer, reply: tx });
            if sent.is_err() {
                st.answering = false;
                return Err(ServiceError::Internal("session engine is gone".into()));
            }
        }
        match rx.await {
            Ok(Ok(report)) => Ok(report),
            Ok(Err(reason)) => Err(ServiceError::Invalid(reason)),
            Err(_) => Err(ServiceError::Internal("session engine stopped".into())),
        }
    }

    pub fn hierarchy(&self, id: &str) -> std::result::Result<ConceptHierarchy, ServiceError> {
        Ok(self.get(id)?.lock().hierarchy.clone())
    }

    pub fn router(self) -> Router {
        Router::new()
            .route("/sessions", post(create_handler))
            .route("/sessions/{id}", get(summary_handler))
            .route("/sessions/{id}/events", get(events_handler))
            .route("/sessions/{id}/answer", post(answer_handler))
            .route("/sessions/{id}/hierarchy", get(hierarchy_handler))
            .with_state(self)
    }
}

fn summary(id: &str, st: &SessionState) -> SessionSummary {
    SessionSummary {
        id: id.to_string(),
        seed: st.seed,
        state: st.state,
        events: st.events.len(),
        question: st.question.clone(),
        hierarchy_version: st.hierarchy.version(),
        metric_tail: st.metric_tail.clone(),
        applied: st.applied.clone(),
    }
}

async fn create_handler(
    State(svc): State<SessionService>,
    body: std::result::Result<Json<CreateSession>, axum::extract::rejection::JsonRejection>,
) -> std::result::Result<(StatusCode, Json<SessionSummary>), ServiceError> {
    let Json(req) = body.map_err(|e| ServiceError::Invalid(e.body_text()))?;
    let created = tokio::task::spawn_blocking(move || svc.create(req))
        .await
        .map_err(|e| ServiceError::Internal(e.to_string()))??;
    Ok((StatusCode::CREATED, Json(created)))
}

async fn summary_handler(
    State(svc): State<SessionService>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Json<SessionSummary>, ServiceError> {
    svc.summary(&id).map(Json)
}

async fn events_handler(
    State(svc): State<SessionService>,
    UrlPath(id): UrlPath<String>,
    Query(p): Query<PollParams>,
) -> std::result::Result<Json<EventPage>, ServiceError> {
    svc.poll(&id, p.since, Duration::from_millis(p.wait_ms)).await.map(Json)
}

async fn answer_handler(
    State(svc): State<SessionService>,
    UrlPath(id): UrlPath<String>,
    body: std::result::Result<Json<Answer>, axum::extract::rejection::JsonRejection>,
) -> std::result::Result<Json<AdaptationReport>, ServiceError> {
    let Json(answer) = body.map_err(|e| ServiceError::Invalid(e.body_text()))?;
    svc.answer(&id, answer).await.map(Json)
}

async fn hierarchy_handler(
    State(svc): State<SessionService>,
    UrlPath(id): UrlPath<String>,
) -> std::result::Result<Json<ConceptHierarchy>, ServiceError> {
    svc.hierarchy(&id).map(Json)
}

/// Binds `addr` and serves until the process ends.
pub async fn serve(addr: &str, data_dir: Option<PathBuf>) -> Result<()> {
    let app = SessionService::new(data_dir)?.router();
    let listener = tokio::net::TcpListener::bind(addr).await?;
    log::info!("listening on {}", listener.local_addr()?);
    axum::serve(listener, app).await?;
    Ok(())
}

/// Reads a persisted session log.
pub fn read_session_log(path: &Path) -> Result<Vec<EngineEvent>> {
    let mut out = Vec::new();
    for line in BufReader::new(File::open(path)?).lines() {
        let line = line?;
        if !line.trim().is_empty() {
            out.push(serde_json::from_str(&line)?);
        }
    }
    Ok(out)
}

/// A user that gives the same answers, in the same order, as a recorded
/// session.
pub fn replay_user(events: &[EngineEvent]) -> ScriptedUser {
    ScriptedUser::new(events.iter().filter_map(|e| match e {
        EngineEvent::Answer { answer, .. } => Some(answer.clone()),
        _ => None,
    }))
}

/// The seed a recorded session ran with.
pub fn recorded_seed(events: &[EngineEvent]) -> Option<u64> {
    events.iter().find_map(|e| match e {
        EngineEvent::Init { seed, .. } => Some(*seed),
        _ => None,
    })
}

pub fn metrics_of(events: &[EngineEvent]) -> Vec<MetricRecord> {
    events
        .iter()
        .filter_map(|e| match e {
            EngineEvent::Metric(m) => Some(m.clone()),
            _ => None,
        })
        .collect()
}
