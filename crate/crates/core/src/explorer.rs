//! Related-word and antonym search over a [`LexiconStore`].
//!
//! `search_related` walks every non-antonym edge of the query and keeps the
//! other endpoint when it is an adjective whose `|cosSim|` to the query and
//! relative frequency fall inside the [`FilterConfig`] bounds.
//! `search_antonyms` runs `search_related` and then collects both endpoints
//! of every antonym edge touching one of those related words.

use std::collections::{BTreeSet, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::lexicon::{normalize_token, LexiconStore, Pos, RelationPredicate, ANTONYM};
use crate::metrics::cosine_similarity;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum ExplorerError {
    #[error("query is empty")]
    EmptyQuery,
    #[error("{0:?} is not a single lowercase word")]
    MalformedQuery(String),
    #[error("unknown word {0:?}")]
    UnknownWord(String),
    #[error("{word:?} is a {pos}, not an adjective")]
    NonAdjective { word: String, pos: Pos },
    #[error("invalid filter configuration: {0}")]
    InvalidConfig(String),
}

impl ExplorerError {
    pub fn kind(&self) -> &'static str {
        match self {
            ExplorerError::EmptyQuery => "empty_query",
            ExplorerError::MalformedQuery(_) => "malformed_query",
            ExplorerError::UnknownWord(_) => "unknown_word",
            ExplorerError::NonAdjective { .. } => "non_adjective",
            ExplorerError::InvalidConfig(_) => "invalid_config",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FilterConfig {
    pub cos_min: f64,
    pub cos_max: f64,
    pub freq_min: f64,
    pub freq_max: f64,
    pub max_results: usize,
}

impl Default for FilterConfig {
    fn default() -> Self {
        FilterConfig {
            cos_min: 0.05,
            cos_max: 0.5,
            freq_min: 1.0,
            freq_max: 50.0,
            max_results: 50,
        }
    }
}

impl FilterConfig {
    pub fn validate(&self) -> Result<(), ExplorerError> {
        let bad = |msg: String| Err(ExplorerError::InvalidConfig(msg));
        if !(0.0 <= self.cos_min && self.cos_min < self.cos_max && self.cos_max <= 1.0) {
            return bad(format!(
                "need 0 <= cos_min < cos_max <= 1, got [{}, {}]",
                self.cos_min, self.cos_max
            ));
        }
        if !(0.0 <= self.freq_min && self.freq_min < self.freq_max) {
            return bad(format!(
                "need 0 <= freq_min < freq_max, got [{}, {}]",
                self.freq_min, self.freq_max
            ));
        }
        if self.max_results == 0 {
            return bad("max_results must be positive".into());
        }
        Ok(())
    }

    /// Same bounds with truncation disabled.
    pub fn untruncated(mut self) -> Self {
        self.max_results = usize::MAX;
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RejectReason {
    RelationIsAntonym,
    CosBelowMin,
    CosAboveMax,
    FreqBelowMin,
    FreqAboveMax,
    MissingVector,
    MissingFreq,
    NotAdjective,
    Duplicate,
    #[serde(rename = "self")]
    SelfMatch,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CandidateDecision {
    pub word: String,
    pub accepted: bool,
    pub reasons: BTreeSet<RejectReason>,
    pub cos_sim: Option<f64>,
    pub freq: Option<f64>,
}

/// A word accepted by [`search_related`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelatedWord {
    pub word: String,
    pub relation: String,
    pub weight: f64,
    pub cos_sim: f64,
    pub freq: f64,
}

/// A word returned by [`search_antonyms`] with the related word whose
/// antonym edge produced it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AntonymHit {
    pub word: String,
    pub via: String,
}

/// Normalises `raw` and checks it is a known adjective.
pub fn validate_query(store: &LexiconStore, raw: &str) -> Result<String, ExplorerError> {
    let trimmed = raw.trim();
    if trimmed.is_empty() {
        return Err(ExplorerError::EmptyQuery);
    }
    let token =
        normalize_token(trimmed).ok_or_else(|| ExplorerError::MalformedQuery(trimmed.into()))?;
    match store.pos_entry(&token) {
        None => Err(ExplorerError::UnknownWord(token)),
        Some(e) if e.pos != Pos::Adjective => Err(ExplorerError::NonAdjective {
            word: token,
            pos: e.pos,
        }),
        Some(_) => Ok(token),
    }
}

pub fn filter_candidate(
    store: &LexiconStore,
    query: &str,
    candidate: &str,
    relation: &str,
    config: &FilterConfig,
    exclude: &HashSet<String>,
) -> CandidateDecision {
    let mut reasons = BTreeSet::new();
    if relation == ANTONYM {
        reasons.insert(RejectReason::RelationIsAntonym);
    }
    let cos_sim = match (store.vector_of(query), store.vector_of(candidate)) {
        (Some(a), Some(b)) => cosine_similarity(&a.components, &b.components).ok(),
        _ => None,
    };
    match cos_sim {
        None => {
            reasons.insert(RejectReason::MissingVector);
        }
        Some(c) if c.abs() < config.cos_min => {
            reasons.insert(RejectReason::CosBelowMin);
        }
        Some(c) if c.abs() > config.cos_max => {
            reasons.insert(RejectReason::CosAboveMax);
        }
        Some(_) => {}
    }
    let freq = store.freq_of(candidate);
    match freq {
        None => {
            reasons.insert(RejectReason::MissingFreq);
        }
        Some(f) if f < config.freq_min => {
            reasons.insert(RejectReason::FreqBelowMin);
        }
        Some(f) if f > config.freq_max => {
            reasons.insert(RejectReason::FreqAboveMax);
        }
        Some(_) => {}
    }
    if !store.is_adjective(candidate) {
        reasons.insert(RejectReason::NotAdjective);
    }
    if candidate == query {
        reasons.insert(RejectReason::SelfMatch);
    }
    if exclude.contains(candidate) {
        reasons.insert(RejectReason::Duplicate);
    }
    CandidateDecision {
        word: candidate.to_string(),
        accepted: reasons.is_empty(),
        reasons,
        cos_sim,
        freq,
    }
}

/// Every non-antonym neighbour of `word` with its filter decision, in
/// neighbour order. Repeat occurrences of an accepted word are marked
/// [`RejectReason::Duplicate`].
pub fn explain_related(
    store: &LexiconStore,
    word: &str,
    config: &FilterConfig,
) -> Result<Vec<CandidateDecision>, ExplorerError> {
    config.validate()?;
    let query = validate_query(store, word)?;
    let mut seen = HashSet::new();
    Ok(store
        .neighbors(&query, &RelationPredicate::not_antonym())
        .into_iter()
        .map(|n| {
            let d = filter_candidate(store, &query, &n.word, &n.relation, config, &seen);
            if d.accepted {
                seen.insert(n.word);
            }
            d
        })
        .collect())
}

/// Related words of `word`, ranked by `|cosSim|` descending then
/// alphabetically, truncated to `config.max_results`.
pub fn search_related(
    store: &LexiconStore,
    word: &str,
    config: &FilterConfig,
) -> Result<Vec<RelatedWord>, ExplorerError> {
    config.validate()?;
    let query = validate_query(store, word)?;
    let mut seen = HashSet::new();
    let mut results = Vec::new();
    for n in store.neighbors(&query, &RelationPredicate::not_antonym()) {
        let d = filter_candidate(store, &query, &n.word, &n.relation, config, &seen);
        if let (true, Some(cos_sim), Some(freq)) = (d.accepted, d.cos_sim, d.freq) {
            seen.insert(n.word.clone());
            results.push(RelatedWord {
                word: n.word,
                relation: n.relation,
                weight: n.weight,
                cos_sim,
                freq,
            });
        }
    }
    results.sort_by(|a, b| {
        b.cos_sim
            .abs()
            .total_cmp(&a.cos_sim.abs())
            .then_with(|| a.word.cmp(&b.word))
    });
    results.truncate(config.max_results);
    Ok(results)
}

/// Antonym candidates with provenance; see [`search_antonyms`].
pub fn search_antonym_hits(
    store: &LexiconStore,
    word: &str,
    config: &FilterConfig,
) -> Result<Vec<AntonymHit>, ExplorerError> {
    let related = search_related(store, word, config)?;
    let query = validate_query(store, word)?;
    let mut seen = HashSet::new();
    let mut hits = Vec::new();
    'outer: for r in &related {
        for n in store.neighbors(&r.word, &RelationPredicate::antonym()) {
            let (start, end) = n.endpoints(&r.word);
            for endpoint in [start, end] {
                if endpoint != query && store.is_adjective(endpoint) && seen.insert(endpoint.to_string()) {
                    hits.push(AntonymHit {
                        word: endpoint.to_string(),
                        via: r.word.clone(),
                    });
                    if hits.len() == config.max_results {
                        break 'outer;
                    }
                }
            }
        }
    }
    Ok(hits)
}

/// Endpoints of antonym edges incident to the related words of `word`,
/// deduplicated in first-seen order, excluding `word` and non-adjectives.
pub fn search_antonyms(
    store: &LexiconStore,
    word: &str,
    config: &FilterConfig,
) -> Result<Vec<String>, ExplorerError> {
    Ok(search_antonym_hits(store, word, config)?
        .into_iter()
        .map(|h| h.word)
        .collect())
}
