//! Request/response API over a loaded store and live sessions.
//!
//! [`Engine::dispatch`] is transport agnostic; the CLI's `serve` command
//! wraps it in an HTTP server. Every response body is a JSON object with a
//! `schema_version` field. Errors add `error_kind` and `message`.
//!
//! | status | error kinds |
//! |--------|-------------|
//! | 400 | `bad_request`, `empty_query`, `malformed_query`, `malformed_word`, `non_adjective`, `invalid_config`, `invalid_component_count`, `bad_log`, `malformed_row`, `unknown_metric` |
//! | 404 | `not_found`, `unknown_word`, `unknown_session`, `unknown_node` |
//! | 405 | `method_not_allowed` |
//! | 409 | `out_of_order`, `duplicate_word`, `reassignment`, `cs_complete`, `incomplete_cs`, `session_closed`, `word_not_available`, `insufficient_embeddings`, `replay_mismatch`, `duplicate_session`, `length_mismatch`, `too_few_pairs`, `too_few_samples`, `zero_variance` |
//! | 500 | anything else |

use std::collections::{BTreeMap, HashMap};
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, Mutex, RwLock};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};

use crate::analytics::{correlate, parse_ratings, parse_report_tsv, score_dcp, Metric};
use crate::explorer::{search_antonym_hits, search_related, validate_query, FilterConfig};
use crate::lexicon::{normalize_token, LexiconStore};
use crate::session::{
    Clock, ExpandVia, ExplorationSession, PoolSource, SessionConfig, SessionError, Slot,
    SystemClock,
};

pub const API_SCHEMA_VERSION: u32 = 1;
pub const DEFAULT_MAP_COMPONENTS: usize = 2;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ApiRequest {
    pub method: String,
    pub path: String,
    pub query: BTreeMap<String, String>,
    pub body: Option<Value>,
}

impl ApiRequest {
    /// `target` may carry a `?query` string, which is form-decoded.
    pub fn new(method: &str, target: &str, body: Option<Value>) -> Self {
        let (path, raw_query) = target.split_once('?').unwrap_or((target, ""));
        ApiRequest {
            method: method.to_ascii_uppercase(),
            path: path.to_string(),
            query: parse_query(raw_query),
            body,
        }
    }

    pub fn get(target: &str) -> Self {
        Self::new("GET", target, None)
    }

    pub fn post(target: &str, body: Value) -> Self {
        Self::new("POST", target, Some(body))
    }
}

pub fn parse_query(raw: &str) -> BTreeMap<String, String> {
    form_urlencoded::parse(raw.as_bytes()).into_owned().collect()
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ApiResponse {
    pub status: u16,
    pub body: Value,
}

impl ApiResponse {
    fn ok(status: u16, payload: impl Serialize) -> Self {
        let mut body = match serde_json::to_value(payload) {
            Ok(Value::Object(m)) => m,
            Ok(other) => {
                let mut m = Map::new();
                m.insert("data".into(), other);
                m
            }
            Err(e) => return ApiError::internal(e.to_string()).into(),
        };
        body.insert("schema_version".into(), json!(API_SCHEMA_VERSION));
        ApiResponse {
            status,
            body: Value::Object(body),
        }
    }

    pub fn error_kind(&self) -> Option<&str> {
        self.body.get("error_kind").and_then(Value::as_str)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ApiError {
    pub kind: String,
    pub message: String,
}

impl ApiError {
    fn new(kind: &str, message: impl Into<String>) -> Self {
        ApiError {
            kind: kind.to_string(),
            message: message.into(),
        }
    }

    fn bad_request(message: impl Into<String>) -> Self {
        Self::new("bad_request", message)
    }

    fn internal(message: impl Into<String>) -> Self {
        Self::new("internal", message)
    }
}

impl From<ApiError> for ApiResponse {
    fn from(e: ApiError) -> Self {
        ApiResponse {
            status: status_for_kind(&e.kind),
            body: json!({
                "schema_version": API_SCHEMA_VERSION,
                "error_kind": e.kind,
                "message": e.message,
            }),
        }
    }
}

macro_rules! api_error_from {
    ($($t:ty),*) => {$(
        impl From<$t> for ApiError {
            fn from(e: $t) -> Self {
                ApiError::new(e.kind(), e.to_string())
            }
        }
    )*};
}

api_error_from!(
    crate::explorer::ExplorerError,
    SessionError,
    crate::analytics::AnalyticsError,
    crate::metrics::MetricsError,
    crate::lexicon::LexiconError
);

pub fn status_for_kind(kind: &str) -> u16 {
    match kind {
        "bad_request" | "empty_query" | "malformed_query" | "malformed_word" | "non_adjective"
        | "invalid_config" | "invalid_component_count" | "bad_log" | "malformed_row"
        | "unknown_metric" => 400,
        "not_found" | "unknown_word" | "unknown_session" | "unknown_node" => 404,
        "method_not_allowed" => 405,
        "out_of_order" | "duplicate_word" | "reassignment" | "cs_complete" | "incomplete_cs"
        | "session_closed" | "word_not_available" | "insufficient_embeddings"
        | "replay_mismatch" | "duplicate_session" | "length_mismatch" | "too_few_pairs"
        | "too_few_samples" | "zero_variance" => 409,
        _ => 500,
    }
}

type ApiResult = Result<ApiResponse, ApiError>;

/// Store, default filter settings and the open sessions.
pub struct Engine {
    store: Arc<LexiconStore>,
    config: SessionConfig,
    sessions: RwLock<HashMap<String, Arc<Mutex<ExplorationSession>>>>,
    next_id: AtomicU64,
    clock: Arc<dyn Clock>,
}

impl Engine {
    pub fn new(store: Arc<LexiconStore>, config: SessionConfig) -> Self {
        Self::with_clock(store, config, Arc::new(SystemClock))
    }

    pub fn with_clock(store: Arc<LexiconStore>, config: SessionConfig, clock: Arc<dyn Clock>) -> Self {
        Engine {
            store,
            config,
            sessions: RwLock::new(HashMap::new()),
            next_id: AtomicU64::new(1),
            clock,
        }
    }

    pub fn store(&self) -> &LexiconStore {
        &self.store
    }

    pub fn session(&self, id: &str) -> Option<Arc<Mutex<ExplorationSession>>> {
        self.sessions.read().ok()?.get(id).cloned()
    }

    pub fn dispatch(&self, req: &ApiRequest) -> ApiResponse {
        self.route(req).unwrap_or_else(ApiResponse::from)
    }

    fn route(&self, req: &ApiRequest) -> ApiResult {
        let segments: Vec<&str> = req.path.split('/').filter(|s| !s.is_empty()).collect();
        let method = req.method.as_str();
        let allowed = |m: &str| -> Result<(), ApiError> {
            if method == m {
                Ok(())
            } else {
                Err(ApiError::new(
                    "method_not_allowed",
                    format!("{method} not allowed on {}", req.path),
                ))
            }
        };
        match segments.as_slice() {
            ["related"] => allowed("GET").and_then(|_| self.related(req)),
            ["antonyms"] => allowed("GET").and_then(|_| self.antonyms(req)),
            ["score"] => allowed("GET").and_then(|_| self.score(req)),
            ["word", w] => allowed("GET").and_then(|_| self.word(w)),
            ["correlate"] => allowed("POST").and_then(|_| self.correlate(req)),
            ["session"] => allowed("POST").and_then(|_| self.create_session(req)),
            ["session", "replay"] => allowed("POST").and_then(|_| self.replay_session(req)),
            ["session", id] => allowed("GET").and_then(|_| {
                self.with_session(id, |s| Ok(ApiResponse::ok(200, session_view(s))))
            }),
            ["session", id, action] => {
                let m = match *action {
                    "report" | "map" | "log" => "GET",
                    "expand" | "pool" | "slot" | "clear" | "close" => "POST",
                    _ => return Err(not_found(req)),
                };
                allowed(m)?;
                self.session_action(id, action, req)
            }
            _ => Err(not_found(req)),
        }
    }

    fn filter_from(&self, req: &ApiRequest) -> Result<FilterConfig, ApiError> {
        let cfg = filter_from_params(self.config.filter, &req.query)?;
        cfg.validate()?;
        Ok(cfg)
    }

    fn related(&self, req: &ApiRequest) -> ApiResult {
        let word = param(req, "word")?;
        let config = self.filter_from(req)?;
        let results = search_related(&self.store, word, &config)?;
        Ok(ApiResponse::ok(
            200,
            json!({ "word": validate_query(&self.store, word)?, "config": config, "results": results }),
        ))
    }

    fn antonyms(&self, req: &ApiRequest) -> ApiResult {
        let word = param(req, "word")?;
        let config = self.filter_from(req)?;
        let hits = search_antonym_hits(&self.store, word, &config)?;
        let results: Vec<&str> = hits.iter().map(|h| h.word.as_str()).collect();
        Ok(ApiResponse::ok(
            200,
            json!({
                "word": validate_query(&self.store, word)?,
                "config": config,
                "results": results,
                "hits": hits,
            }),
        ))
    }

    fn score(&self, req: &ApiRequest) -> ApiResult {
        let w1 = param(req, "w1")?;
        let w2 = param(req, "w2")?;
        let config = self.filter_from(req)?;
        Ok(ApiResponse::ok(200, score_dcp(&self.store, w1, w2, &config)))
    }

    fn word(&self, raw: &str) -> ApiResult {
        let token = normalize_token(raw)
            .ok_or_else(|| ApiError::new("malformed_query", format!("{raw:?} is not a single lowercase word")))?;
        let entry = self.store.pos_entry(&token);
        let freq = self.store.freq_of(&token);
        let has_vector = self.store.vector_of(&token).is_some();
        if entry.is_none() && freq.is_none() && !has_vector {
            return Err(ApiError::new("unknown_word", format!("unknown word {token:?}")));
        }
        Ok(ApiResponse::ok(
            200,
            json!({
                "word": token,
                "pos": entry.map(|e| e.pos),
                "gloss": entry.and_then(|e| e.gloss.clone()),
                "freq": freq,
                "has_vector": has_vector,
            }),
        ))
    }

    fn correlate(&self, req: &ApiRequest) -> ApiResult {
        #[derive(Deserialize)]
        struct Body {
            report: String,
            ratings: String,
            metric: String,
        }
        let body: Body = body_of(req)?;
        let metric: Metric = body.metric.parse()?;
        let reports = parse_report_tsv(&body.report)?;
        let ratings = parse_ratings(&body.ratings)?;
        Ok(ApiResponse::ok(200, correlate(&reports, &ratings, metric)?))
    }

    fn create_session(&self, req: &ApiRequest) -> ApiResult {
        #[derive(Deserialize, Default)]
        struct Body {
            #[serde(default)]
            brief_id: Option<String>,
            #[serde(default)]
            config: Option<SessionConfig>,
        }
        let body: Body = if req.body.is_some() || !req.query.is_empty() {
            body_of(req)?
        } else {
            Body::default()
        };
        let config = body.config.unwrap_or(self.config);
        config.filter.validate()?;
        let id = format!("s{}", self.next_id.fetch_add(1, Ordering::SeqCst));
        let session = ExplorationSession::new(
            id.clone(),
            body.brief_id.unwrap_or_default(),
            config,
            self.clock.clone(),
        );
        let view = serde_json::to_value(session_view(&session)).map_err(|e| ApiError::internal(e.to_string()))?;
        self.insert_session(id, session)?;
        Ok(ApiResponse::ok(201, view))
    }

    fn replay_session(&self, req: &ApiRequest) -> ApiResult {
        #[derive(Deserialize)]
        struct Body {
            log: String,
        }
        let body: Body = body_of(req)?;
        let session = ExplorationSession::replay(&self.store, &body.log)?;
        let view = serde_json::to_value(session_view(&session)).map_err(|e| ApiError::internal(e.to_string()))?;
        self.insert_session(session.id().to_string(), session)?;
        Ok(ApiResponse::ok(201, view))
    }

    fn insert_session(&self, id: String, session: ExplorationSession) -> Result<(), ApiError> {
        let mut map = self
            .sessions
            .write()
            .map_err(|_| ApiError::internal("session table poisoned"))?;
        if map.contains_key(&id) {
            return Err(ApiError::new("duplicate_session", format!("session {id:?} already exists")));
        }
        map.insert(id, Arc::new(Mutex::new(session)));
        Ok(())
    }

    fn with_session<T>(
        &self,
        id: &str,
        f: impl FnOnce(&mut ExplorationSession) -> Result<T, ApiError>,
    ) -> Result<T, ApiError> {
        let handle = self
            .session(id)
            .ok_or_else(|| ApiError::new("unknown_session", format!("no session {id:?}")))?;
        let mut guard = handle
            .lock()
            .map_err(|_| ApiError::internal(format!("session {id:?} poisoned")))?;
        f(&mut guard)
    }

    fn session_action(&self, id: &str, action: &str, req: &ApiRequest) -> ApiResult {
        let store = &*self.store;
        match action {
            "report" => self.with_session(id, |s| Ok(ApiResponse::ok(200, s.session_report(store)?))),
            "map" => {
                let k = match req.query.get("k") {
                    Some(v) => v
                        .parse::<usize>()
                        .map_err(|_| ApiError::bad_request(format!("k must be a positive integer, got {v:?}")))?,
                    None => DEFAULT_MAP_COMPONENTS,
                };
                self.with_session(id, |s| Ok(ApiResponse::ok(200, s.exploration_map(store, k)?)))
            }
            "log" => self.with_session(id, |s| Ok(ApiResponse::ok(200, json!({ "log": s.to_log() })))),
            "expand" => {
                #[derive(Deserialize)]
                struct Body {
                    word: String,
                    #[serde(default)]
                    via: Option<ExpandVia>,
                }
                let body: Body = body_of(req)?;
                self.with_session(id, |s| {
                    let delta = s.expand(store, &body.word, body.via.unwrap_or(ExpandVia::Query))?;
                    Ok(ApiResponse::ok(200, json!({ "delta": delta, "session": session_view(s) })))
                })
            }
            "pool" => {
                #[derive(Deserialize)]
                struct Body {
                    word: String,
                    #[serde(default)]
                    source: Option<PoolSource>,
                }
                let body: Body = body_of(req)?;
                self.with_session(id, |s| {
                    let pool = s
                        .add_to_pool(store, &body.word, body.source.unwrap_or(PoolSource::GraphDrag))?
                        .to_vec();
                    Ok(ApiResponse::ok(200, json!({ "pool": pool })))
                })
            }
            "slot" => {
                #[derive(Deserialize)]
                struct Body {
                    slot: Slot,
                    word: String,
                }
                let body: Body = body_of(req)?;
                self.with_session(id, |s| {
                    let outcome = s.set_slot(store, body.slot, &body.word)?;
                    Ok(ApiResponse::ok(
                        200,
                        json!({
                            "cs": outcome.cs,
                            "triggered": outcome.triggered,
                            "delta": outcome.delta,
                            "pool": s.pool(),
                        }),
                    ))
                })
            }
            "clear" => self.with_session(id, |s| {
                s.clear_playground(store)?;
                Ok(ApiResponse::ok(200, session_view(s)))
            }),
            "close" => self.with_session(id, |s| {
                s.close()?;
                Ok(ApiResponse::ok(200, session_view(s)))
            }),
            _ => Err(not_found(req)),
        }
    }
}

fn not_found(req: &ApiRequest) -> ApiError {
    ApiError::new("not_found", format!("no route for {} {}", req.method, req.path))
}

fn param<'a>(req: &'a ApiRequest, name: &str) -> Result<&'a str, ApiError> {
    req.query
        .get(name)
        .map(String::as_str)
        .ok_or_else(|| ApiError::bad_request(format!("missing query parameter {name:?}")))
}

/// Body fields overlaid on query parameters, decoded into `T`.
fn body_of<T: DeserializeOwned>(req: &ApiRequest) -> Result<T, ApiError> {
    let mut merged: Map<String, Value> = req
        .query
        .iter()
        .map(|(k, v)| (k.clone(), Value::String(v.clone())))
        .collect();
    match &req.body {
        Some(Value::Object(m)) => merged.extend(m.clone()),
        Some(Value::Null) | None => {}
        Some(_) => return Err(ApiError::bad_request("body must be a JSON object")),
    }
    serde_json::from_value(Value::Object(merged)).map_err(|e| ApiError::bad_request(e.to_string()))
}

/// Applies `min_cos`, `max_cos`, `min_freq`, `max_freq` and `max_results`
/// (hyphenated spellings and the `cos_min` style accepted too).
pub fn filter_from_params(
    mut config: FilterConfig,
    params: &BTreeMap<String, String>,
) -> Result<FilterConfig, ApiError> {
    for (key, value) in params {
        let key = key.replace('-', "_");
        let float = || {
            value
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| ApiError::new("invalid_config", format!("{key} must be a number, got {value:?}")))
        };
        match key.as_str() {
            "min_cos" | "cos_min" => config.cos_min = float()?,
            "max_cos" | "cos_max" => config.cos_max = float()?,
            "min_freq" | "freq_min" => config.freq_min = float()?,
            "max_freq" | "freq_max" => config.freq_max = float()?,
            "max_results" => {
                config.max_results = value.parse().map_err(|_| {
                    ApiError::new("invalid_config", format!("max_results must be a positive integer, got {value:?}"))
                })?
            }
            _ => {}
        }
    }
    Ok(config)
}

#[derive(Serialize)]
struct SessionView<'a> {
    #[serde(flatten)]
    state: crate::session::SessionState<'a>,
    config: &'a SessionConfig,
    created_at: u64,
    closed_at: Option<u64>,
    next_slot: Option<Slot>,
}

fn session_view(s: &ExplorationSession) -> SessionView<'_> {
    SessionView {
        state: s.state(),
        config: s.config(),
        created_at: s.created_at(),
        closed_at: s.closed_at(),
        next_slot: s.cs().next_slot(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn query_strings_decode() {
        let r = ApiRequest::get("/related?word=Aware&min-cos=0.1&x=a%20b");
        assert_eq!(r.path, "/related");
        assert_eq!(r.query["word"], "Aware");
        assert_eq!(r.query["x"], "a b");
        let cfg = filter_from_params(FilterConfig::default(), &r.query).unwrap();
        assert_eq!(cfg.cos_min, 0.1);
    }

    #[test]
    fn bad_filter_values_are_invalid_config() {
        let q = parse_query("max_results=-3");
        assert_eq!(filter_from_params(FilterConfig::default(), &q).unwrap_err().kind, "invalid_config");
        let q = parse_query("min_cos=nan");
        assert_eq!(filter_from_params(FilterConfig::default(), &q).unwrap_err().kind, "invalid_config");
    }

    #[test]
    fn statuses_cover_kinds() {
        assert_eq!(status_for_kind("non_adjective"), 400);
        assert_eq!(status_for_kind("unknown_word"), 404);
        assert_eq!(status_for_kind("out_of_order"), 409);
        assert_eq!(status_for_kind("whatever"), 500);
    }
}
