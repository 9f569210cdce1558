//! Exploration sessions.
//!
//! A session is event sourced: every mutating operation builds an
//! [`ExplorationEvent`] and hands it to [`ExplorationSession::apply`], which
//! checks all preconditions before touching state. Replaying a log runs the
//! very same `apply`, so a replayed session is identical to the live one.
//!
//! Log format (one JSON object per line): a header line carrying
//! `schema_version`, `id`, `brief_id`, `created_at`, `closed_at` and
//! `config`, followed by one line per event with the fields `seq`, `at`,
//! `kind`, and where applicable `word`, `slot`, `cluster` and `source`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::analytics::{score_dcp, DcpReport};
use crate::explorer::{
    search_antonym_hits, search_related, validate_query, ExplorerError, FilterConfig,
};
use crate::lexicon::{normalize_token, LexiconStore, ANTONYM};
use crate::metrics::{pca_fit, pca_project, MetricsError};

pub const LOG_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SessionError {
    #[error("session is closed")]
    Closed,
    #[error(transparent)]
    Explorer(#[from] ExplorerError),
    #[error("{0:?} is not a single lowercase word")]
    MalformedWord(String),
    #[error("{0:?} is not a node of the playground")]
    UnknownNode(String),
    #[error("{0:?} is neither in the word pool nor in the playground")]
    WordNotAvailable(String),
    #[error("slot {got} cannot be set before {expected}")]
    OutOfOrder { expected: Slot, got: Slot },
    #[error("{0:?} already occupies another slot")]
    DuplicateWord(String),
    #[error("slot {0} is already set and reordering is disabled")]
    Reassignment(Slot),
    #[error("character space is complete")]
    CsComplete,
    #[error("w1 and w2 must be set")]
    IncompleteCs,
    #[error("need at least 2 session words with embeddings, found {0}")]
    InsufficientEmbeddings(usize),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
    #[error("log line {line}: {message}")]
    BadLog { line: usize, message: String },
    #[error("event {seq}: {message}")]
    ReplayMismatch { seq: u64, message: String },
}

impl SessionError {
    pub fn kind(&self) -> &'static str {
        match self {
            SessionError::Closed => "session_closed",
            SessionError::Explorer(e) => e.kind(),
            SessionError::MalformedWord(_) => "malformed_word",
            SessionError::UnknownNode(_) => "unknown_node",
            SessionError::WordNotAvailable(_) => "word_not_available",
            SessionError::OutOfOrder { .. } => "out_of_order",
            SessionError::DuplicateWord(_) => "duplicate_word",
            SessionError::Reassignment(_) => "reassignment",
            SessionError::CsComplete => "cs_complete",
            SessionError::IncompleteCs => "incomplete_cs",
            SessionError::InsufficientEmbeddings(_) => "insufficient_embeddings",
            SessionError::Metrics(e) => e.kind(),
            SessionError::BadLog { .. } => "bad_log",
            SessionError::ReplayMismatch { .. } => "replay_mismatch",
        }
    }
}

/// Millisecond wall clock, injectable for tests.
pub trait Clock: Send + Sync {
    fn now_ms(&self) -> u64;
}

#[derive(Debug, Default, Clone, Copy)]
pub struct SystemClock;

impl Clock for SystemClock {
    fn now_ms(&self) -> u64 {
        SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_millis() as u64)
            .unwrap_or(0)
    }
}

/// Clock that only moves when told to.
#[derive(Debug, Default)]
pub struct ManualClock(AtomicU64);

impl ManualClock {
    pub fn new(start_ms: u64) -> Self {
        ManualClock(AtomicU64::new(start_ms))
    }

    pub fn set(&self, ms: u64) {
        self.0.store(ms, Ordering::SeqCst);
    }

    pub fn advance(&self, ms: u64) {
        self.0.fetch_add(ms, Ordering::SeqCst);
    }
}

impl Clock for ManualClock {
    fn now_ms(&self) -> u64 {
        self.0.load(Ordering::SeqCst)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Slot {
    W1,
    W2,
    W3,
    W4,
}

impl Slot {
    pub const ALL: [Slot; 4] = [Slot::W1, Slot::W2, Slot::W3, Slot::W4];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn as_str(self) -> &'static str {
        ["w1", "w2", "w3", "w4"][self.index()]
    }
}

impl fmt::Display for Slot {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Slot {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "w1" => Ok(Slot::W1),
            "w2" => Ok(Slot::W2),
            "w3" => Ok(Slot::W3),
            "w4" => Ok(Slot::W4),
            other => Err(format!("unknown slot {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum EventKind {
    Query,
    ExpandClick,
    PoolAdd,
    SlotSet,
    Clear,
}

impl EventKind {
    pub fn as_str(self) -> &'static str {
        match self {
            EventKind::Query => "QUERY",
            EventKind::ExpandClick => "EXPAND_CLICK",
            EventKind::PoolAdd => "POOL_ADD",
            EventKind::SlotSet => "SLOT_SET",
            EventKind::Clear => "CLEAR",
        }
    }
}

/// How an expansion was started.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExpandVia {
    #[serde(alias = "query")]
    Query,
    #[serde(alias = "expand_click")]
    ExpandClick,
}

/// Where a pooled word came from. Clicking or dragging a playground word
/// both count as `graph_drag`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PoolSource {
    GraphDrag,
    QueryAuto,
    SlotDrop,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ExplorationEvent {
    pub seq: u64,
    pub at: u64,
    pub kind: EventKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub word: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub slot: Option<Slot>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cluster: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<PoolSource>,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphNode {
    pub word: String,
    pub cluster: u32,
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GraphLink {
    pub from: String,
    pub to: String,
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PlaygroundGraph {
    pub nodes: BTreeMap<String, u32>,
    pub links: BTreeSet<GraphLink>,
    pub next_cluster: u32,
}

impl Default for PlaygroundGraph {
    fn default() -> Self {
        PlaygroundGraph {
            nodes: BTreeMap::new(),
            links: BTreeSet::new(),
            next_cluster: 1,
        }
    }
}

impl PlaygroundGraph {
    pub fn contains(&self, word: &str) -> bool {
        self.nodes.contains_key(word)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    fn allocate_cluster(&mut self) -> u32 {
        let c = self.next_cluster;
        self.next_cluster += 1;
        c
    }

    /// Adds `origin` (if absent) and `(word, relation)` spokes under
    /// `cluster`, returning only what was new.
    fn merge(
        &mut self,
        origin: &str,
        cluster: u32,
        spokes: impl IntoIterator<Item = (String, String)>,
        seq: u64,
    ) -> GraphDelta {
        let mut delta = GraphDelta {
            origin: origin.to_string(),
            event_seq: seq,
            cluster,
            added_nodes: Vec::new(),
            added_links: Vec::new(),
        };
        if !self.nodes.contains_key(origin) {
            self.nodes.insert(origin.to_string(), cluster);
            delta.added_nodes.push(GraphNode {
                word: origin.to_string(),
                cluster,
            });
        }
        for (word, relation) in spokes {
            if word == origin {
                continue;
            }
            if !self.nodes.contains_key(&word) {
                self.nodes.insert(word.clone(), cluster);
                delta.added_nodes.push(GraphNode {
                    word: word.clone(),
                    cluster,
                });
            }
            let link = GraphLink {
                from: origin.to_string(),
                to: word,
                relation,
            };
            if self.links.insert(link.clone()) {
                delta.added_links.push(link);
            }
        }
        delta
    }
}

/// Nodes and links added by one expansion.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphDelta {
    pub origin: String,
    pub event_seq: u64,
    pub cluster: u32,
    pub added_nodes: Vec<GraphNode>,
    pub added_links: Vec<GraphLink>,
}

/// Two crossed semantic differentials: w1 opposes w3, w2 opposes w4, and
/// `(w1, w2)` is the design concept phrase.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CharacterSpace {
    pub w1: Option<String>,
    pub w2: Option<String>,
    pub w3: Option<String>,
    pub w4: Option<String>,
}

impl CharacterSpace {
    pub fn get(&self, slot: Slot) -> Option<&str> {
        match slot {
            Slot::W1 => self.w1.as_deref(),
            Slot::W2 => self.w2.as_deref(),
            Slot::W3 => self.w3.as_deref(),
            Slot::W4 => self.w4.as_deref(),
        }
    }

    fn slot_mut(&mut self, slot: Slot) -> &mut Option<String> {
        match slot {
            Slot::W1 => &mut self.w1,
            Slot::W2 => &mut self.w2,
            Slot::W3 => &mut self.w3,
            Slot::W4 => &mut self.w4,
        }
    }

    /// First unfilled slot in w1..w4 order.
    pub fn next_slot(&self) -> Option<Slot> {
        Slot::ALL.into_iter().find(|&s| self.get(s).is_none())
    }

    pub fn is_complete(&self) -> bool {
        self.next_slot().is_none()
    }

    pub fn dcp(&self) -> Option<(&str, &str)> {
        Some((self.w1.as_deref()?, self.w2.as_deref()?))
    }

    fn slot_of(&self, word: &str) -> Option<Slot> {
        Slot::ALL.into_iter().find(|&s| self.get(s) == Some(word))
    }

    /// Fill order holds and set words are distinct.
    pub fn is_well_formed(&self) -> bool {
        let filled: Vec<bool> = Slot::ALL.iter().map(|&s| self.get(s).is_some()).collect();
        let ordered = filled.windows(2).all(|w| w[0] || !w[1]);
        let words: Vec<&str> = Slot::ALL.iter().filter_map(|&s| self.get(s)).collect();
        let distinct = words.iter().collect::<BTreeSet<_>>().len() == words.len();
        ordered && distinct
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub filter: FilterConfig,
    /// Permit replacing or swapping words in slots that are already set.
    pub allow_reorder: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotOutcome {
    pub cs: CharacterSpace,
    pub triggered: Vec<String>,
    pub delta: Option<GraphDelta>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionReport {
    #[serde(flatten)]
    pub dcp: DcpReport,
    pub word_count: usize,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapEvent {
    pub seq: u64,
    pub kind: EventKind,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MapPoint {
    pub word: String,
    pub coords: Vec<f64>,
    pub events: Vec<MapEvent>,
}

/// PCA projection of the words a session touched.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ExplorationMap {
    pub points: Vec<MapPoint>,
    pub unplottable: Vec<String>,
    pub explained_variance: Vec<f64>,
}

/// What applying one event produced.
#[derive(Debug, Clone, PartialEq)]
pub enum Applied {
    Expansion(GraphDelta),
    Pool,
    Slot(SlotOutcome),
    Clear,
}

#[derive(Clone)]
struct ClockHandle(Arc<dyn Clock>);

impl fmt::Debug for ClockHandle {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("Clock")
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct LogHeader {
    schema_version: u32,
    id: String,
    brief_id: String,
    created_at: u64,
    #[serde(default)]
    closed_at: Option<u64>,
    #[serde(default)]
    config: SessionConfig,
}

/// Graph, pool and character space; the comparable part of a session.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SessionState<'a> {
    pub id: &'a str,
    pub brief_id: &'a str,
    pub graph: &'a PlaygroundGraph,
    pub pool: &'a [String],
    pub cs: &'a CharacterSpace,
    pub event_count: usize,
    pub closed: bool,
}

#[derive(Debug, Clone)]
pub struct ExplorationSession {
    id: String,
    brief_id: String,
    config: SessionConfig,
    graph: PlaygroundGraph,
    pool: Vec<String>,
    cs: CharacterSpace,
    events: Vec<ExplorationEvent>,
    created_at: u64,
    closed_at: Option<u64>,
    clock: ClockHandle,
}

impl ExplorationSession {
    pub fn new(
        id: impl Into<String>,
        brief_id: impl Into<String>,
        config: SessionConfig,
        clock: Arc<dyn Clock>,
    ) -> Self {
        let created_at = clock.now_ms();
        ExplorationSession {
            id: id.into(),
            brief_id: brief_id.into(),
            config,
            graph: PlaygroundGraph::default(),
            pool: Vec::new(),
            cs: CharacterSpace::default(),
            events: Vec::new(),
            created_at,
            closed_at: None,
            clock: ClockHandle(clock),
        }
    }

    pub fn id(&self) -> &str {
        &self.id
    }

    pub fn brief_id(&self) -> &str {
        &self.brief_id
    }

    pub fn config(&self) -> &SessionConfig {
        &self.config
    }

    pub fn graph(&self) -> &PlaygroundGraph {
        &self.graph
    }

    pub fn pool(&self) -> &[String] {
        &self.pool
    }

    pub fn cs(&self) -> &CharacterSpace {
        &self.cs
    }

    pub fn events(&self) -> &[ExplorationEvent] {
        &self.events
    }

    pub fn created_at(&self) -> u64 {
        self.created_at
    }

    pub fn closed_at(&self) -> Option<u64> {
        self.closed_at
    }

    pub fn is_closed(&self) -> bool {
        self.closed_at.is_some()
    }

    pub fn state(&self) -> SessionState<'_> {
        SessionState {
            id: &self.id,
            brief_id: &self.brief_id,
            graph: &self.graph,
            pool: &self.pool,
            cs: &self.cs,
            event_count: self.events.len(),
            closed: self.is_closed(),
        }
    }

    /// Pretty JSON of [`Self::state`]; stable across runs.
    pub fn state_json(&self) -> String {
        serde_json::to_string_pretty(&self.state()).expect("session state serializes")
    }

    fn ensure_open(&self) -> Result<(), SessionError> {
        if self.is_closed() {
            Err(SessionError::Closed)
        } else {
            Ok(())
        }
    }

    fn event(&self, kind: EventKind) -> ExplorationEvent {
        ExplorationEvent {
            seq: self.events.len() as u64 + 1,
            at: self.clock.0.now_ms(),
            kind,
            word: None,
            slot: None,
            cluster: None,
            source: None,
        }
    }

    fn auto_pool(&mut self, store: &LexiconStore, word: &str, source: PoolSource) -> Result<(), SessionError> {
        if self.pool.iter().any(|w| w == word) {
            return Ok(());
        }
        let mut e = self.event(EventKind::PoolAdd);
        e.word = Some(word.to_string());
        e.source = Some(source);
        self.apply(store, e).map(|_| ())
    }

    /// Runs a related-word search from `word` and merges accepted
    /// candidates into the playground as a fresh cluster. Queries and
    /// clicked words are also pooled.
    pub fn expand(
        &mut self,
        store: &LexiconStore,
        word: &str,
        via: ExpandVia,
    ) -> Result<GraphDelta, SessionError> {
        self.ensure_open()?;
        let (kind, source) = match via {
            ExpandVia::Query => (EventKind::Query, PoolSource::QueryAuto),
            ExpandVia::ExpandClick => (EventKind::ExpandClick, PoolSource::GraphDrag),
        };
        let mut e = self.event(kind);
        e.word = Some(word.trim().to_string());
        e.cluster = Some(self.graph.next_cluster);
        let Applied::Expansion(delta) = self.apply(store, e)? else {
            unreachable!("expansion events yield a delta")
        };
        self.auto_pool(store, &delta.origin, source)?;
        Ok(delta)
    }

    /// Appends `word` to the pool unless present; the event is logged
    /// either way.
    pub fn add_to_pool(
        &mut self,
        store: &LexiconStore,
        word: &str,
        source: PoolSource,
    ) -> Result<&[String], SessionError> {
        self.ensure_open()?;
        let mut e = self.event(EventKind::PoolAdd);
        e.word = Some(word.trim().to_string());
        e.source = Some(source);
        self.apply(store, e)?;
        Ok(&self.pool)
    }

    /// Places `word` on `slot` and generates candidates for the next slot:
    /// w1 triggers related words of w1, w2 antonyms of w1 and w3 antonyms
    /// of w2. Candidates are merged into the playground as a new cluster.
    pub fn set_slot(
        &mut self,
        store: &LexiconStore,
        slot: Slot,
        word: &str,
    ) -> Result<SlotOutcome, SessionError> {
        self.ensure_open()?;
        let mut e = self.event(EventKind::SlotSet);
        e.word = Some(word.trim().to_string());
        e.slot = Some(slot);
        e.cluster = Some(self.graph.next_cluster);
        let Applied::Slot(outcome) = self.apply(store, e)? else {
            unreachable!("slot events yield an outcome")
        };
        if let Some(w) = self.cs.get(slot).map(str::to_string) {
            self.auto_pool(store, &w, PoolSource::SlotDrop)?;
        }
        Ok(outcome)
    }

    /// Empties the playground. Pool, character space and the cluster
    /// counter are kept.
    pub fn clear_playground(&mut self, store: &LexiconStore) -> Result<(), SessionError> {
        self.ensure_open()?;
        let e = self.event(EventKind::Clear);
        self.apply(store, e).map(|_| ())
    }

    pub fn close(&mut self) -> Result<(), SessionError> {
        self.ensure_open()?;
        self.closed_at = Some(self.clock.0.now_ms().max(self.created_at));
        Ok(())
    }

    /// Validates `event` against the current state and applies it. Nothing
    /// changes when an error is returned.
    pub fn apply(
        &mut self,
        store: &LexiconStore,
        event: ExplorationEvent,
    ) -> Result<Applied, SessionError> {
        self.ensure_open()?;
        let expected_seq = self.events.len() as u64 + 1;
        if event.seq != expected_seq {
            return Err(SessionError::ReplayMismatch {
                seq: event.seq,
                message: format!("expected seq {expected_seq}"),
            });
        }
        let next = self.graph.next_cluster;
        let cluster_check = |allocates: bool| -> Result<(), SessionError> {
            match event.cluster {
                Some(c) if !allocates || c != next => Err(SessionError::ReplayMismatch {
                    seq: event.seq,
                    message: format!("cluster {c} recorded, {next} expected"),
                }),
                _ => Ok(()),
            }
        };
        let word = || event.word.clone().ok_or_else(|| SessionError::BadLog {
            line: 0,
            message: format!("event {} lacks a word", event.seq),
        });

        let applied = match event.kind {
            EventKind::Query | EventKind::ExpandClick => {
                let raw = word()?;
                let token = if event.kind == EventKind::Query {
                    validate_query(store, &raw)?
                } else {
                    let t = normalize_token(&raw).ok_or(SessionError::MalformedWord(raw))?;
                    if !self.graph.contains(&t) {
                        return Err(SessionError::UnknownNode(t));
                    }
                    t
                };
                let related = search_related(store, &token, &self.config.filter)?;
                cluster_check(true)?;
                let cluster = self.graph.allocate_cluster();
                let delta = self.graph.merge(
                    &token,
                    cluster,
                    related.into_iter().map(|r| (r.word, r.relation)),
                    event.seq,
                );
                self.push(event, Some(token), Some(cluster));
                Applied::Expansion(delta)
            }
            EventKind::PoolAdd => {
                let raw = word()?;
                let token = normalize_token(&raw).ok_or(SessionError::MalformedWord(raw))?;
                if event.source == Some(PoolSource::GraphDrag) && !self.graph.contains(&token) {
                    return Err(SessionError::UnknownNode(token));
                }
                cluster_check(false)?;
                if !self.pool.contains(&token) {
                    self.pool.push(token.clone());
                }
                self.push(event, Some(token), None);
                Applied::Pool
            }
            EventKind::SlotSet => {
                let raw = word()?;
                let token = normalize_token(&raw).ok_or(SessionError::MalformedWord(raw))?;
                let slot = event.slot.ok_or_else(|| SessionError::BadLog {
                    line: 0,
                    message: format!("event {} lacks a slot", event.seq),
                })?;
                let new_cs = self.place(slot, &token)?;
                let trigger = self.trigger(store, &new_cs, slot);
                cluster_check(true)?;
                let mut delta = None;
                let mut triggered = Vec::new();
                let mut cluster = None;
                if let Some((origin, spokes)) = trigger {
                    let c = self.graph.allocate_cluster();
                    triggered = spokes.iter().map(|(w, _)| w.clone()).collect();
                    delta = Some(self.graph.merge(&origin, c, spokes, event.seq));
                    cluster = Some(c);
                }
                self.cs = new_cs;
                self.push(event, Some(token), cluster);
                Applied::Slot(SlotOutcome {
                    cs: self.cs.clone(),
                    triggered,
                    delta,
                })
            }
            EventKind::Clear => {
                cluster_check(false)?;
                self.graph.nodes.clear();
                self.graph.links.clear();
                self.push(event, None, None);
                Applied::Clear
            }
        };
        Ok(applied)
    }

    fn push(&mut self, mut event: ExplorationEvent, word: Option<String>, cluster: Option<u32>) {
        event.word = word;
        event.cluster = cluster;
        self.events.push(event);
    }

    /// The character space after putting `word` on `slot`, or why not.
    fn place(&self, slot: Slot, word: &str) -> Result<CharacterSpace, SessionError> {
        let mut cs = self.cs.clone();
        let current = cs.get(slot).map(str::to_string);
        if !self.config.allow_reorder {
            if cs.is_complete() {
                return Err(SessionError::CsComplete);
            }
            if current.is_some() {
                return Err(SessionError::Reassignment(slot));
            }
        }
        if let (None, Some(next)) = (&current, cs.next_slot()) {
            if next != slot {
                return Err(SessionError::OutOfOrder { expected: next, got: slot });
            }
        }
        if !self.pool.iter().any(|w| w == word) && !self.graph.contains(word) {
            return Err(SessionError::WordNotAvailable(word.to_string()));
        }
        let elsewhere = cs.slot_of(word).filter(|&s| s != slot);
        match current {
            Some(cur) if cur == word => return Err(SessionError::DuplicateWord(word.to_string())),
            Some(cur) => {
                if let Some(other) = elsewhere {
                    *cs.slot_mut(other) = Some(cur);
                }
            }
            None if elsewhere.is_some() => {
                return Err(SessionError::DuplicateWord(word.to_string()))
            }
            None => {}
        }
        *cs.slot_mut(slot) = Some(word.to_string());
        debug_assert!(cs.is_well_formed());
        Ok(cs)
    }

    /// Origin word and `(candidate, relation)` spokes generated after
    /// `slot` is set; `None` when nothing is searched.
    fn trigger(
        &self,
        store: &LexiconStore,
        cs: &CharacterSpace,
        slot: Slot,
    ) -> Option<(String, Vec<(String, String)>)> {
        let filter = &self.config.filter;
        match slot {
            Slot::W1 => {
                let w1 = cs.w1.clone()?;
                let related = search_related(store, &w1, filter).ok()?;
                Some((w1, related.into_iter().map(|r| (r.word, r.relation)).collect()))
            }
            Slot::W2 | Slot::W3 => {
                let origin = if slot == Slot::W2 { cs.w1.clone()? } else { cs.w2.clone()? };
                let hits = search_antonym_hits(store, &origin, filter).ok()?;
                Some((
                    origin,
                    hits.into_iter().map(|h| (h.word, ANTONYM.to_string())).collect(),
                ))
            }
            Slot::W4 => None,
        }
    }

    pub fn session_report(
        &self,
        store: &LexiconStore,
    ) -> Result<SessionReport, SessionError> {
        let (w1, w2) = self.cs.dcp().ok_or(SessionError::IncompleteCs)?;
        let end = self.closed_at.unwrap_or_else(|| self.clock.0.now_ms());
        Ok(SessionReport {
            dcp: score_dcp(store, w1, w2, &self.config.filter),
            word_count: self.pool.len(),
            duration_ms: end.saturating_sub(self.created_at),
        })
    }

    /// Projects every distinct word touched by a query, click or slot event
    /// onto the session's first `k` principal components.
    pub fn exploration_map(
        &self,
        store: &LexiconStore,
        k: usize,
    ) -> Result<ExplorationMap, SessionError> {
        let mut order: Vec<String> = Vec::new();
        let mut annotations: BTreeMap<String, Vec<MapEvent>> = BTreeMap::new();
        for e in &self.events {
            if !matches!(e.kind, EventKind::Query | EventKind::ExpandClick | EventKind::SlotSet) {
                continue;
            }
            let Some(w) = &e.word else { continue };
            let entry = annotations.entry(w.clone()).or_default();
            if entry.is_empty() {
                order.push(w.clone());
            }
            entry.push(MapEvent { seq: e.seq, kind: e.kind });
        }
        let (plottable, unplottable): (Vec<String>, Vec<String>) =
            order.into_iter().partition(|w| store.vector_of(w).is_some());
        if plottable.len() < 2 {
            return Err(SessionError::InsufficientEmbeddings(plottable.len()));
        }
        let vectors: Vec<Vec<f64>> = plottable
            .iter()
            .map(|w| store.vector_of(w).map(|v| v.components.clone()).unwrap_or_default())
            .collect();
        let model = pca_fit(&vectors, k)?;
        let points = plottable
            .into_iter()
            .zip(&vectors)
            .map(|(word, v)| {
                Ok(MapPoint {
                    coords: pca_project(&model, v)?,
                    events: annotations.remove(&word).unwrap_or_default(),
                    word,
                })
            })
            .collect::<Result<Vec<_>, MetricsError>>()?;
        Ok(ExplorationMap {
            points,
            unplottable,
            explained_variance: model.explained_variance,
        })
    }

    /// The session as a line-delimited log: header, then one event per line.
    pub fn to_log(&self) -> String {
        let header = LogHeader {
            schema_version: LOG_SCHEMA_VERSION,
            id: self.id.clone(),
            brief_id: self.brief_id.clone(),
            created_at: self.created_at,
            closed_at: self.closed_at,
            config: self.config,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for e in &self.events {
            out.push_str(&serde_json::to_string(e).expect("event serializes"));
            out.push('\n');
        }
        out
    }

    /// Rebuilds a session by applying every logged event in order.
    pub fn replay(store: &LexiconStore, log: &str) -> Result<Self, SessionError> {
        let mut lines = log
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty());
        let (_, first) = lines.next().ok_or(SessionError::BadLog {
            line: 1,
            message: "empty log".into(),
        })?;
        let header: LogHeader = serde_json::from_str(first).map_err(|e| SessionError::BadLog {
            line: 1,
            message: e.to_string(),
        })?;
        if header.schema_version != LOG_SCHEMA_VERSION {
            return Err(SessionError::BadLog {
                line: 1,
                message: format!("unsupported schema_version {}", header.schema_version),
            });
        }
        header.config.filter.validate()?;
        let created_at = header.created_at;
        let mut session = ExplorationSession::new(
            header.id,
            header.brief_id,
            header.config,
            Arc::new(ManualClock::new(created_at)),
        );
        for (idx, line) in lines {
            let event: ExplorationEvent =
                serde_json::from_str(line).map_err(|e| SessionError::BadLog {
                    line: idx + 1,
                    message: e.to_string(),
                })?;
            session.apply(store, event).map_err(|e| match e {
                SessionError::BadLog { message, .. } => SessionError::BadLog {
                    line: idx + 1,
                    message,
                },
                other => other,
            })?;
        }
        session.closed_at = header.closed_at;
        Ok(session)
    }
}
