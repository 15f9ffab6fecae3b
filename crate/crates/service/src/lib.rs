//! HTTP session API for annotation sessions.
//!
//! Every request is routed through [`Service::handle_request`], a plain
//! `(method, path, body) -> Response` function; [`serve`] only adapts it to
//! HTTP/1.1. Answers carry the version (log length) they were made against
//! and are rejected with 409 if the session has moved on.
//!
//! | route | result |
//! |---|---|
//! | `POST /sessions` `{corpus, dialogue, annotator}` | 201, `{session_id, version}` |
//! | `GET /sessions/{id}` | cursor, stack, annotations |
//! | `GET /sessions/{id}/prompt` | current decision prompt |
//! | `POST /sessions/{id}/answer` `{version, answer, gp_tag?}` | 200 / 409 / 422 |
//! | `GET /sessions/{id}/export` | session file |
//! | `GET /dialogues` | corpus index |
//! | `GET /reports/stats?dialogue=...` | per-session statistics records |

use std::collections::{BTreeMap, HashMap};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};
use std::sync::{Arc, Mutex};

use clarify_core::corpus::Corpus;
use clarify_core::ladder::{Evidence, Level};
use clarify_core::recipe::{self, Answer, DecisionLog, GpTag, RecipeError, Session};
use clarify_core::stats::{self, LevelDistribution};
use serde::Deserialize;
use serde_json::{json, Value};

pub const JSON: &str = "application/json";

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Response {
    pub status: u16,
    pub content_type: &'static str,
    pub body: String,
}

impl Response {
    fn json(status: u16, value: Value) -> Self {
        Response {
            status,
            content_type: JSON,
            body: value.to_string(),
        }
    }

    fn error(status: u16, message: impl Into<String>) -> Self {
        Response::json(status, json!({ "error": message.into() }))
    }

    pub fn json_body(&self) -> Value {
        serde_json::from_str(&self.body).unwrap_or(Value::Null)
    }
}

struct Entry {
    corpus: String,
    session: Session,
}

pub struct Service {
    corpora: BTreeMap<String, Arc<Corpus>>,
    sessions: Mutex<HashMap<String, Arc<Mutex<Entry>>>>,
    store: Option<PathBuf>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CreateBody {
    #[serde(default)]
    corpus: Option<String>,
    dialogue: String,
    annotator: String,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct AnswerBody {
    version: usize,
    answer: Value,
    #[serde(default)]
    gp_tag: Option<GpTag>,
}

fn parse_answer(v: &Value) -> Result<Answer, String> {
    match v {
        Value::String(s) => s.parse(),
        other => serde_json::from_value(other.clone()).map_err(|e| e.to_string()),
    }
}

fn session_view(id: &str, entry: &Entry) -> Value {
    let s = &entry.session;
    let stack: Vec<Value> = s
        .stack()
        .entries
        .iter()
        .map(|p| {
            let evidence: serde_json::Map<String, Value> = Level::LADDER
                .iter()
                .zip(p.evidence.iter())
                .map(|(l, e)| {
                    let state = if *e == Evidence::Satisfied { "satisfied" } else { "open" };
                    (l.to_string(), Value::from(state))
                })
                .collect();
            json!({ "source": p.source.index, "proposer": p.proposer, "evidence": evidence })
        })
        .collect();
    let closed: Vec<Value> = s
        .stack()
        .closed_log
        .iter()
        .map(|c| {
            json!({
                "source": c.proposal.source.index,
                "closed_by": c.closed_by.index,
                "close_cause": c.proposal.close_cause,
            })
        })
        .collect();
    json!({
        "session_id": id,
        "version": s.version(),
        "corpus": entry.corpus,
        "dialogue": s.dialogue_id(),
        "annotator": s.annotator_id(),
        "cursor": s.cursor(),
        "finished": s.is_finished(),
        "stack": stack,
        "closed": closed,
        "annotations": s.annotation_set().records(),
    })
}

fn prompt_view(entry: &Entry) -> Value {
    let s = &entry.session;
    let prompt = s.next_prompt().ok().map(|p| {
        json!({
            "point": p.point,
            "turn": p.turn.index,
            "candidate_source": p.candidate_source.map(|c| c.index),
            "question": p.question,
            "legal_answers": p.legal_answers,
        })
    });
    json!({ "version": s.version(), "finished": s.is_finished(), "prompt": prompt })
}

fn stats_record(id: &str, entry: &Entry) -> Value {
    let s = &entry.session;
    let ann = s.annotation_set();
    let rate = stats::cr_rate(ann, s.dialogue()).ok();
    let levels = match stats::level_distribution(ann) {
        LevelDistribution::Percents(p) => serde_json::to_value(p).unwrap_or(Value::Null),
        LevelDistribution::NoCrs => Value::Null,
    };
    json!({
        "session_id": id,
        "corpus": entry.corpus,
        "dialogue": s.dialogue_id(),
        "annotator": s.annotator_id(),
        "finished": s.is_finished(),
        "turns": s.dialogue().len(),
        "crs": ann.cr_count(),
        "cr_rate_percent": rate,
        "level_percents": levels,
    })
}

impl Service {
    pub fn new(corpora: impl IntoIterator<Item = Corpus>) -> Self {
        Service {
            corpora: corpora
                .into_iter()
                .map(|c| (c.corpus_id.clone(), Arc::new(c)))
                .collect(),
            sessions: Mutex::new(HashMap::new()),
            store: None,
        }
    }

    /// Persists sessions under `dir/<corpus>/<session id>.json`, reloading any
    /// already there.
    pub fn with_store(mut self, dir: impl Into<PathBuf>) -> io::Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir)?;
        let mut loaded = HashMap::new();
        for (name, corpus) in &self.corpora {
            let sub = dir.join(name);
            if !sub.is_dir() {
                continue;
            }
            for file in fs::read_dir(&sub)? {
                let path = file?.path();
                if path.extension().and_then(|e| e.to_str()) != Some("json") {
                    continue;
                }
                let Some(id) = path.file_stem().and_then(|s| s.to_str()).map(str::to_string) else {
                    continue;
                };
                let text = fs::read_to_string(&path)?;
                let session = DecisionLog::from_session_file(&text)
                    .and_then(|log| recipe::replay(corpus, &log))
                    .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, format!("{}: {e}", path.display())))?;
                loaded.insert(
                    id,
                    Arc::new(Mutex::new(Entry {
                        corpus: name.clone(),
                        session,
                    })),
                );
            }
        }
        self.sessions = Mutex::new(loaded);
        self.store = Some(dir);
        Ok(self)
    }

    pub fn corpus_names(&self) -> impl Iterator<Item = &str> {
        self.corpora.keys().map(String::as_str)
    }

    fn persist(&self, id: &str, entry: &Entry) -> io::Result<()> {
        let Some(dir) = &self.store else {
            return Ok(());
        };
        let sub = dir.join(&entry.corpus);
        fs::create_dir_all(&sub)?;
        write_atomic(&sub.join(format!("{id}.json")), &entry.session.log().to_session_file())
    }

    fn lookup(&self, id: &str) -> Option<Arc<Mutex<Entry>>> {
        self.sessions.lock().expect("session map").get(id).cloned()
    }

    pub fn handle_request(&self, method: &str, path: &str, body: &str) -> Response {
        let (path, query) = match path.split_once('?') {
            Some((p, q)) => (p, q),
            None => (path, ""),
        };
        let segments: Vec<&str> = path.trim_matches('/').split('/').filter(|s| !s.is_empty()).collect();
        match (method, segments.as_slice()) {
            ("POST", ["sessions"]) => self.create(body),
            ("GET", ["sessions", id]) => self.with_entry(id, |e| Response::json(200, session_view(id, e))),
            ("GET", ["sessions", id, "prompt"]) => self.with_entry(id, |e| Response::json(200, prompt_view(e))),
            ("POST", ["sessions", id, "answer"]) => self.answer(id, body),
            ("GET", ["sessions", id, "export"]) => self.with_entry(id, |e| Response {
                status: 200,
                content_type: JSON,
                body: e.session.log().to_session_file(),
            }),
            ("GET", ["dialogues"]) => self.dialogues(),
            ("GET", ["reports", "stats"]) => self.stats(query),
            (_, ["sessions"])
            | (_, ["sessions", _])
            | (_, ["sessions", _, "prompt" | "answer" | "export"])
            | (_, ["dialogues"])
            | (_, ["reports", "stats"]) => Response::error(405, format!("{method} not allowed on {path}")),
            _ => Response::error(404, format!("no route for {path}")),
        }
    }

    fn with_entry(&self, id: &str, f: impl FnOnce(&Entry) -> Response) -> Response {
        match self.lookup(id) {
            Some(entry) => f(&entry.lock().expect("session lock")),
            None => Response::error(404, format!("unknown session {id:?}")),
        }
    }

    fn create(&self, body: &str) -> Response {
        let req: CreateBody = match serde_json::from_str(body) {
            Ok(r) => r,
            Err(e) => return Response::error(400, e.to_string()),
        };
        let corpus_name = match req.corpus {
            Some(c) => c,
            None if self.corpora.len() == 1 => self.corpora.keys().next().cloned().unwrap_or_default(),
            None => return Response::error(400, "field `corpus` is required when several corpora are served"),
        };
        let Some(corpus) = self.corpora.get(&corpus_name) else {
            return Response::error(404, format!("unknown corpus {corpus_name:?}"));
        };
        let session = match recipe::start_session(corpus, &req.dialogue, &req.annotator) {
            Ok(s) => s,
            Err(e @ RecipeError::UnknownDialogue(_)) => return Response::error(404, e.to_string()),
            Err(e) => return Response::error(422, e.to_string()),
        };
        let id = uuid::Uuid::new_v4().simple().to_string();
        let entry = Entry {
            corpus: corpus_name,
            session,
        };
        if let Err(e) = self.persist(&id, &entry) {
            return Response::error(500, e.to_string());
        }
        let version = entry.session.version();
        self.sessions
            .lock()
            .expect("session map")
            .insert(id.clone(), Arc::new(Mutex::new(entry)));
        Response::json(201, json!({ "session_id": id, "version": version }))
    }

    fn answer(&self, id: &str, body: &str) -> Response {
        let Some(entry) = self.lookup(id) else {
            return Response::error(404, format!("unknown session {id:?}"));
        };
        let req: AnswerBody = match serde_json::from_str(body) {
            Ok(r) => r,
            Err(e) => return Response::error(400, e.to_string()),
        };
        let answer = match parse_answer(&req.answer) {
            Ok(a) => a,
            Err(e) => return Response::error(422, e),
        };
        let mut entry = entry.lock().expect("session lock");
        let mut next = entry.session.clone();
        match next.apply_at(req.version, answer, req.gp_tag) {
            Ok(()) => {}
            Err(e @ RecipeError::StaleVersion { .. }) => {
                return Response::json(409, json!({ "error": e.to_string(), "version": entry.session.version() }))
            }
            Err(e) => return Response::error(422, e.to_string()),
        }
        let candidate = Entry {
            corpus: entry.corpus.clone(),
            session: next,
        };
        if let Err(e) = self.persist(id, &candidate) {
            return Response::error(500, e.to_string());
        }
        *entry = candidate;
        Response::json(200, prompt_view(&entry))
    }

    fn dialogues(&self) -> Response {
        let index: Vec<Value> = self
            .corpora
            .iter()
            .flat_map(|(name, c)| {
                c.dialogues.iter().map(move |d| {
                    json!({ "corpus": name, "dialogue": d.dialogue_id, "turns": d.len(), "profile": d.metadata })
                })
            })
            .collect();
        Response::json(200, Value::Array(index))
    }

    fn stats(&self, query: &str) -> Response {
        let params: HashMap<String, String> = url::form_urlencoded::parse(query.as_bytes()).into_owned().collect();
        let Some(dialogue) = params.get("dialogue") else {
            return Response::error(400, "query parameter `dialogue` is required");
        };
        let corpus = params.get("corpus");
        let known = self
            .corpora
            .iter()
            .filter(|(name, _)| corpus.is_none_or(|c| c == *name))
            .any(|(_, c)| c.dialogue(dialogue).is_ok());
        if !known {
            return Response::error(404, format!("unknown dialogue {dialogue:?}"));
        }
        let entries: Vec<(String, Arc<Mutex<Entry>>)> = self
            .sessions
            .lock()
            .expect("session map")
            .iter()
            .map(|(k, v)| (k.clone(), v.clone()))
            .collect();
        let mut records: Vec<Value> = entries
            .iter()
            .filter_map(|(id, e)| {
                let e = e.lock().expect("session lock");
                let matches = e.session.dialogue_id() == dialogue && corpus.is_none_or(|c| *c == e.corpus);
                matches.then(|| stats_record(id, &e))
            })
            .collect();
        records.sort_by(|a, b| a["session_id"].as_str().cmp(&b["session_id"].as_str()));
        Response::json(200, Value::Array(records))
    }
}

fn write_atomic(path: &Path, contents: &str) -> io::Result<()> {
    let tmp = path.with_extension("json.tmp");
    fs::write(&tmp, contents)?;
    fs::rename(tmp, path)
}

async fn dispatch(
    axum::extract::State(service): axum::extract::State<Arc<Service>>,
    method: axum::http::Method,
    uri: axum::http::Uri,
    body: String,
) -> axum::response::Response {
    use axum::response::IntoResponse;

    let path = uri.path_and_query().map(|p| p.as_str().to_string()).unwrap_or_else(|| "/".into());
    let resp = tokio::task::spawn_blocking(move || service.handle_request(method.as_str(), &path, &body))
        .await
        .unwrap_or_else(|e| Response::error(500, e.to_string()));
    let status = axum::http::StatusCode::from_u16(resp.status).unwrap_or(axum::http::StatusCode::INTERNAL_SERVER_ERROR);
    (status, [(axum::http::header::CONTENT_TYPE, resp.content_type)], resp.body).into_response()
}

pub fn router(service: Arc<Service>) -> axum::Router {
    axum::Router::new().fallback(dispatch).with_state(service)
}

/// Serves until the listener fails.
pub async fn serve_on(listener: tokio::net::TcpListener, service: Arc<Service>) -> io::Result<()> {
    axum::serve(listener, router(service)).await
}

/// Binds `addr` and serves on a fresh multi-threaded runtime.
pub fn serve(addr: &str, service: Service) -> io::Result<()> {
    let rt = tokio::runtime::Builder::new_multi_thread().enable_all().build()?;
    rt.block_on(async {
        let listener = tokio::net::TcpListener::bind(addr).await?;
        serve_on(listener, Arc::new(service)).await
    })
}
