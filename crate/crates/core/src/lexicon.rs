//! Lexicon ingestion and lookup.
//!
//! A [`LexiconStore`] bundles the four data sources every other module reads:
//! knowledge-graph edges, word embeddings, relative corpus frequencies and
//! part-of-speech entries. The store is immutable once built; all lookups are
//! total and return `None` for words the sources do not cover.
//!
//! Source formats:
//!
//! * edges: TSV `relation<TAB>start<TAB>end<TAB>weight`, `#` comments
//! * embeddings: optional `count dim` header, then `word v1 v2 ... vD`
//! * frequencies: TSV `word<TAB>value`, per-million or raw counts
//! * part of speech: TSV `word<TAB>pos[<TAB>gloss]`

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Relation label that Algorithm-style searches treat specially.
pub const ANTONYM: &str = "Antonym";

const SNAPSHOT_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum LexiconError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: io::Error,
    },
    #[error("embedding source contains no valid vectors")]
    NoEmbeddings,
    #[error("embedding header declares dimension {declared} but line {line} has {found} components")]
    InconsistentDimension {
        declared: usize,
        found: usize,
        line: usize,
    },
    #[error("embedding dimension must be at least 2, got {0}")]
    InvalidDimension(usize),
    #[error("corpus token count must be positive")]
    InvalidCorpusTokenCount,
    #[error("snapshot: {0}")]
    Snapshot(#[from] serde_json::Error),
    #[error("unsupported snapshot version {0}")]
    SnapshotVersion(u32),
}

impl LexiconError {
    pub fn kind(&self) -> &'static str {
        match self {
            LexiconError::Io { .. } => "unreadable_source",
            LexiconError::NoEmbeddings => "no_embeddings",
            LexiconError::InconsistentDimension { .. } | LexiconError::InvalidDimension(_) => {
                "inconsistent_dimension"
            }
            LexiconError::InvalidCorpusTokenCount => "invalid_corpus_token_count",
            LexiconError::Snapshot(_) | LexiconError::SnapshotVersion(_) => "bad_snapshot",
        }
    }
}

/// Lowercases and trims `raw`, returning it only if it satisfies the token
/// policy: ASCII letters with optional internal single hyphens.
pub fn normalize_token(raw: &str) -> Option<String> {
    let token = raw.trim().to_ascii_lowercase();
    is_valid_token(&token).then_some(token)
}

pub fn is_valid_token(token: &str) -> bool {
    !token.is_empty()
        && token
            .split('-')
            .all(|part| !part.is_empty() && part.bytes().all(|b| b.is_ascii_lowercase()))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Pos {
    Adjective,
    Noun,
    Verb,
    Adverb,
    Other,
}

impl Pos {
    pub fn as_str(self) -> &'static str {
        match self {
            Pos::Adjective => "adjective",
            Pos::Noun => "noun",
            Pos::Verb => "verb",
            Pos::Adverb => "adverb",
            Pos::Other => "other",
        }
    }
}

impl fmt::Display for Pos {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("unknown part of speech {0:?}")]
pub struct UnknownPos(pub String);

impl FromStr for Pos {
    type Err = UnknownPos;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "adjective" | "adj" | "a" => Ok(Pos::Adjective),
            "noun" | "n" => Ok(Pos::Noun),
            "verb" | "v" => Ok(Pos::Verb),
            "adverb" | "adv" | "r" => Ok(Pos::Adverb),
            "other" => Ok(Pos::Other),
            _ => Err(UnknownPos(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LexEdge {
    pub relation: String,
    pub start: String,
    pub end: String,
    pub weight: f64,
}

impl LexEdge {
    /// The endpoint that is not `word`, if `word` is an endpoint at all.
    pub fn other(&self, word: &str) -> Option<&str> {
        if self.start == word {
            Some(&self.end)
        } else if self.end == word {
            Some(&self.start)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SemanticVector {
    pub word: String,
    pub components: Vec<f64>,
}

impl SemanticVector {
    pub fn dimension(&self) -> usize {
        self.components.len()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrequencyEntry {
    pub word: String,
    pub per_million: f64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PosEntry {
    pub word: String,
    pub pos: Pos,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub gloss: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FrequencyMode {
    PerMillion,
    /// Raw occurrence counts out of a corpus of the given size.
    RawCounts { corpus_token_count: u64 },
}

/// One edge seen from a query word.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Neighbor {
    pub word: String,
    pub relation: String,
    pub weight: f64,
    /// True when the query word is the edge's start.
    pub outgoing: bool,
}

impl Neighbor {
    /// `(start, end)` of the underlying edge, given the query word.
    pub fn endpoints<'a>(&'a self, query: &'a str) -> (&'a str, &'a str) {
        if self.outgoing {
            (query, &self.word)
        } else {
            (&self.word, query)
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum RelationPredicate {
    Any,
    Is(String),
    IsNot(String),
}

impl RelationPredicate {
    pub fn not_antonym() -> Self {
        RelationPredicate::IsNot(ANTONYM.to_string())
    }

    pub fn antonym() -> Self {
        RelationPredicate::Is(ANTONYM.to_string())
    }

    pub fn matches(&self, relation: &str) -> bool {
        match self {
            RelationPredicate::Any => true,
            RelationPredicate::Is(r) => r == relation,
            RelationPredicate::IsNot(r) => r != relation,
        }
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct SourceCounts {
    pub loaded: usize,
    pub skipped: usize,
}

impl SourceCounts {
    fn record(&mut self, accepted: bool) {
        if accepted {
            self.loaded += 1;
        } else {
            self.skipped += 1;
        }
    }
}

/// Per-source accepted/skipped row counts from one load.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct LoadReport {
    pub edges: SourceCounts,
    pub vectors: SourceCounts,
    pub frequencies: SourceCounts,
    pub pos: SourceCounts,
}

/// Immutable, indexed lexicon.
#[derive(Debug, Clone)]
pub struct LexiconStore {
    edges: Vec<LexEdge>,
    // word -> edge indices, sorted by (other word, relation, direction, weight)
    incident: HashMap<String, Vec<usize>>,
    vectors: HashMap<String, SemanticVector>,
    frequencies: HashMap<String, f64>,
    pos: HashMap<String, PosEntry>,
    dimension: usize,
    corpus_token_count: Option<u64>,
}

impl LexiconStore {
    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn corpus_token_count(&self) -> Option<u64> {
        self.corpus_token_count
    }

    pub fn edges(&self) -> &[LexEdge] {
        &self.edges
    }

    pub fn vectors(&self) -> impl Iterator<Item = &SemanticVector> {
        self.vectors.values()
    }

    pub fn vector_count(&self) -> usize {
        self.vectors.len()
    }

    /// Every edge incident to `word` whose relation satisfies `predicate`,
    /// ordered by other word, then relation.
    pub fn neighbors(&self, word: &str, predicate: &RelationPredicate) -> Vec<Neighbor> {
        let Some(indices) = self.incident.get(word) else {
            return Vec::new();
        };
        indices
            .iter()
            .map(|&i| &self.edges[i])
            .filter(|e| predicate.matches(&e.relation))
            .map(|e| Neighbor {
                word: e.other(word).unwrap_or_default().to_string(),
                relation: e.relation.clone(),
                weight: e.weight,
                outgoing: e.start == word,
            })
            .collect()
    }

    pub fn vector_of(&self, word: &str) -> Option<&SemanticVector> {
        self.vectors.get(word).or_else(|| self.vectors.get(&normalize_token(word)?))
    }

    pub fn freq_of(&self, word: &str) -> Option<f64> {
        self.frequencies
            .get(word)
            .or_else(|| self.frequencies.get(&normalize_token(word)?))
            .copied()
    }

    pub fn pos_entry(&self, word: &str) -> Option<&PosEntry> {
        self.pos.get(word).or_else(|| self.pos.get(&normalize_token(word)?))
    }

    pub fn is_adjective(&self, word: &str) -> bool {
        self.pos_entry(word).is_some_and(|e| e.pos == Pos::Adjective)
    }

    pub fn save_snapshot(&self, path: &Path) -> Result<(), LexiconError> {
        let file = File::create(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let mut out = BufWriter::new(file);
        serde_json::to_writer(&mut out, &self.to_snapshot())?;
        out.flush().map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })
    }

    pub fn load_snapshot(path: &Path) -> Result<Self, LexiconError> {
        let file = File::open(path).map_err(|source| LexiconError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let snapshot: Snapshot = serde_json::from_reader(BufReader::new(file))?;
        Self::from_snapshot(snapshot)
    }

    fn to_snapshot(&self) -> Snapshot {
        let mut vectors: Vec<SemanticVector> = self.vectors.values().cloned().collect();
        vectors.sort_by(|a, b| a.word.cmp(&b.word));
        let mut pos: Vec<PosEntry> = self.pos.values().cloned().collect();
        pos.sort_by(|a, b| a.word.cmp(&b.word));
        Snapshot {
            schema_version: SNAPSHOT_VERSION,
            dimension: self.dimension,
            corpus_token_count: self.corpus_token_count,
            edges: self.edges.clone(),
            vectors,
            frequencies: self.frequencies.iter().map(|(k, v)| (k.clone(), *v)).collect(),
            pos,
        }
    }

    fn from_snapshot(snapshot: Snapshot) -> Result<Self, LexiconError> {
        if snapshot.schema_version != SNAPSHOT_VERSION {
            return Err(LexiconError::SnapshotVersion(snapshot.schema_version));
        }
        let mut builder = LexiconBuilder::new();
        builder.corpus_token_count = snapshot.corpus_token_count;
        for e in snapshot.edges {
            builder.add_edge(&e.relation, &e.start, &e.end, e.weight);
        }
        for v in snapshot.vectors {
            builder.add_vector(&v.word, v.components);
        }
        for (w, f) in snapshot.frequencies {
            builder.add_frequency(&w, f);
        }
        for p in snapshot.pos {
            builder.add_pos(&p.word, p.pos, p.gloss.as_deref());
        }
        builder.build()
    }
}

#[derive(Serialize, Deserialize)]
struct Snapshot {
    schema_version: u32,
    dimension: usize,
    corpus_token_count: Option<u64>,
    edges: Vec<LexEdge>,
    vectors: Vec<SemanticVector>,
    frequencies: BTreeMap<String, f64>,
    pos: Vec<PosEntry>,
}

/// Incremental builder; every `add_*` returns whether the row was accepted.
#[derive(Debug, Default)]
pub struct LexiconBuilder {
    edges: Vec<LexEdge>,
    edge_keys: HashSet<(String, String, String)>,
    vectors: HashMap<String, SemanticVector>,
    dimension: Option<usize>,
    frequencies: HashMap<String, f64>,
    pos: HashMap<String, PosEntry>,
    corpus_token_count: Option<u64>,
    report: LoadReport,
}

impl LexiconBuilder {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn report(&self) -> LoadReport {
        self.report
    }

    pub fn set_corpus_token_count(&mut self, count: u64) -> &mut Self {
        self.corpus_token_count = Some(count);
        self
    }

    pub fn add_edge(&mut self, relation: &str, start: &str, end: &str, weight: f64) -> bool {
        let accepted = self.try_add_edge(relation, start, end, weight);
        self.report.edges.record(accepted);
        accepted
    }

    fn try_add_edge(&mut self, relation: &str, start: &str, end: &str, weight: f64) -> bool {
        let relation = relation.trim();
        let relation = relation.strip_prefix("/r/").unwrap_or(relation);
        if relation.is_empty() || !weight.is_finite() || weight < 0.0 {
            return false;
        }
        let (Some(start), Some(end)) = (normalize_token(start), normalize_token(end)) else {
            return false;
        };
        if start == end {
            return false;
        }
        let key = (relation.to_string(), start.clone(), end.clone());
        if !self.edge_keys.insert(key) {
            return false;
        }
        self.edges.push(LexEdge {
            relation: relation.to_string(),
            start,
            end,
            weight,
        });
        true
    }

    /// The first accepted vector fixes the store dimension; later vectors
    /// of a different length are rejected.
    pub fn add_vector(&mut self, word: &str, components: Vec<f64>) -> bool {
        let accepted = self.try_add_vector(word, components);
        self.report.vectors.record(accepted);
        accepted
    }

    fn try_add_vector(&mut self, word: &str, components: Vec<f64>) -> bool {
        let Some(word) = normalize_token(word) else {
            return false;
        };
        if self.vectors.contains_key(&word)
            || components.iter().any(|c| !c.is_finite())
            || components.iter().all(|&c| c == 0.0)
        {
            return false;
        }
        match self.dimension {
            Some(d) if d != components.len() => return false,
            Some(_) => {}
            None => self.dimension = Some(components.len()),
        }
        self.vectors.insert(word.clone(), SemanticVector { word, components });
        true
    }

    pub fn add_frequency(&mut self, word: &str, per_million: f64) -> bool {
        let accepted = match normalize_token(word) {
            Some(w) if per_million.is_finite() && per_million >= 0.0 => {
                match self.frequencies.entry(w) {
                    std::collections::hash_map::Entry::Occupied(_) => false,
                    std::collections::hash_map::Entry::Vacant(slot) => {
                        slot.insert(per_million);
                        true
                    }
                }
            }
            _ => false,
        };
        self.report.frequencies.record(accepted);
        accepted
    }

    /// A word listed under several parts of speech keeps its adjective
    /// reading if it has one, otherwise its first.
    pub fn add_pos(&mut self, word: &str, pos: Pos, gloss: Option<&str>) -> bool {
        let Some(word) = normalize_token(word) else {
            self.report.pos.record(false);
            return false;
        };
        let gloss = gloss.map(str::trim).filter(|g| !g.is_empty()).map(str::to_string);
        let accepted = match self.pos.get(&word) {
            Some(existing) if existing.pos == Pos::Adjective || pos != Pos::Adjective => false,
            _ => {
                self.pos.insert(word.clone(), PosEntry { word, pos, gloss });
                true
            }
        };
        self.report.pos.record(accepted);
        accepted
    }

    pub fn build(self) -> Result<LexiconStore, LexiconError> {
        let dimension = self.dimension.ok_or(LexiconError::NoEmbeddings)?;
        if dimension < 2 {
            return Err(LexiconError::InvalidDimension(dimension));
        }
        if self.corpus_token_count == Some(0) {
            return Err(LexiconError::InvalidCorpusTokenCount);
        }
        let mut incident: HashMap<String, Vec<usize>> = HashMap::new();
        for (i, e) in self.edges.iter().enumerate() {
            incident.entry(e.start.clone()).or_default().push(i);
            incident.entry(e.end.clone()).or_default().push(i);
        }
        for (word, list) in incident.iter_mut() {
            list.sort_by(|&a, &b| {
                let (ea, eb) = (&self.edges[a], &self.edges[b]);
                ea.other(word)
                    .cmp(&eb.other(word))
                    .then_with(|| ea.relation.cmp(&eb.relation))
                    .then_with(|| (ea.start != *word).cmp(&(eb.start != *word)))
                    .then_with(|| ea.weight.total_cmp(&eb.weight))
            });
        }
        Ok(LexiconStore {
            edges: self.edges,
            incident,
            vectors: self.vectors,
            frequencies: self.frequencies,
            pos: self.pos,
            dimension,
            corpus_token_count: self.corpus_token_count,
        })
    }
}

/// File locations of the four lexicon sources.
#[derive(Debug, Clone)]
pub struct LexiconPaths {
    pub edges: PathBuf,
    pub embeddings: PathBuf,
    pub frequencies: PathBuf,
    pub pos: PathBuf,
}

impl LexiconPaths {
    /// The conventional file names inside one directory.
    pub fn in_dir(dir: impl AsRef<Path>) -> Self {
        let dir = dir.as_ref();
        LexiconPaths {
            edges: dir.join("edges.tsv"),
            embeddings: dir.join("embeddings.txt"),
            frequencies: dir.join("frequencies.tsv"),
            pos: dir.join("pos.tsv"),
        }
    }
}

pub fn load_lexicon(
    paths: &LexiconPaths,
    mode: FrequencyMode,
) -> Result<(LexiconStore, LoadReport), LexiconError> {
    let open = |path: &Path| {
        File::open(path)
            .map(BufReader::new)
            .map_err(|source| LexiconError::Io {
                path: path.to_path_buf(),
                source,
            })
    };
    let mut builder = LexiconBuilder::new();
    read_edges(&mut builder, open(&paths.edges)?, &paths.edges)?;
    read_embeddings(&mut builder, open(&paths.embeddings)?, &paths.embeddings)?;
    read_frequencies(&mut builder, open(&paths.frequencies)?, &paths.frequencies, mode)?;
    read_pos(&mut builder, open(&paths.pos)?, &paths.pos)?;
    let report = builder.report();
    Ok((builder.build()?, report))
}

/// Same as [`load_lexicon`] over in-memory or already-open sources.
pub fn load_lexicon_from_readers(
    edges: impl BufRead,
    embeddings: impl BufRead,
    frequencies: impl BufRead,
    pos: impl BufRead,
    mode: FrequencyMode,
) -> Result<(LexiconStore, LoadReport), LexiconError> {
    let here = Path::new("<reader>");
    let mut builder = LexiconBuilder::new();
    read_edges(&mut builder, edges, here)?;
    read_embeddings(&mut builder, embeddings, here)?;
    read_frequencies(&mut builder, frequencies, here, mode)?;
    read_pos(&mut builder, pos, here)?;
    let report = builder.report();
    Ok((builder.build()?, report))
}

fn data_lines<'a, R: BufRead + 'a>(
    reader: R,
    path: &'a Path,
) -> impl Iterator<Item = Result<(usize, String), LexiconError>> + 'a {
    reader
        .lines()
        .enumerate()
        .map(move |(i, line)| {
            line.map(|l| (i + 1, l)).map_err(|source| LexiconError::Io {
                path: path.to_path_buf(),
                source,
            })
        })
        .filter(|r| match r {
            Ok((_, l)) => {
                let t = l.trim();
                !t.is_empty() && !t.starts_with('#')
            }
            Err(_) => true,
        })
}

fn read_edges(b: &mut LexiconBuilder, r: impl BufRead, path: &Path) -> Result<(), LexiconError> {
    for line in data_lines(r, path) {
        let (_, line) = line?;
        let fields: Vec<&str> = line.trim_end_matches(['\r', '\n']).split('\t').collect();
        match fields.as_slice() {
            [rel, start, end, weight] => match weight.trim().parse::<f64>() {
                Ok(w) => {
                    b.add_edge(rel, start, end, w);
                }
                Err(_) => b.report.edges.record(false),
            },
            _ => b.report.edges.record(false),
        }
    }
    Ok(())
}

fn read_embeddings(
    b: &mut LexiconBuilder,
    r: impl BufRead,
    path: &Path,
) -> Result<(), LexiconError> {
    let mut declared: Option<usize> = None;
    let mut first = true;
    for line in data_lines(r, path) {
        let (lineno, line) = line?;
        let mut fields = line.split_whitespace();
        let Some(word) = fields.next() else { continue };
        let rest: Vec<&str> = fields.collect();
        if first {
            first = false;
            if let ([dim], Ok(_)) = (rest.as_slice(), word.parse::<usize>()) {
                if let Ok(dim) = dim.parse::<usize>() {
                    if dim < 2 {
                        return Err(LexiconError::InvalidDimension(dim));
                    }
                    declared = Some(dim);
                    continue;
                }
            }
        }
        let Ok(components) = rest.iter().map(|s| s.parse::<f64>()).collect::<Result<Vec<_>, _>>()
        else {
            b.report.vectors.record(false);
            continue;
        };
        if let Some(d) = declared {
            if b.dimension.is_none() && components.len() != d && normalize_token(word).is_some() {
                return Err(LexiconError::InconsistentDimension {
                    declared: d,
                    found: components.len(),
                    line: lineno,
                });
            }
        }
        if b.dimension.is_none() && components.len() < 2 && normalize_token(word).is_some() {
            return Err(LexiconError::InvalidDimension(components.len()));
        }
        b.add_vector(word, components);
    }
    Ok(())
}

fn split_two(line: &str) -> Vec<&str> {
    let line = line.trim_end_matches(['\r', '\n']);
    if line.contains('\t') {
        line.split('\t').collect()
    } else {
        line.split_whitespace().collect()
    }
}

fn read_frequencies(
    b: &mut LexiconBuilder,
    r: impl BufRead,
    path: &Path,
    mode: FrequencyMode,
) -> Result<(), LexiconError> {
    let scale = match mode {
        FrequencyMode::PerMillion => None,
        FrequencyMode::RawCounts { corpus_token_count: 0 } => {
            return Err(LexiconError::InvalidCorpusTokenCount)
        }
        FrequencyMode::RawCounts { corpus_token_count } => {
            b.corpus_token_count = Some(corpus_token_count);
            Some(corpus_token_count as f64)
        }
    };
    for line in data_lines(r, path) {
        let (_, line) = line?;
        match split_two(&line).as_slice() {
            [word, value] => match value.trim().parse::<f64>() {
                Ok(v) => {
                    let per_million = match scale {
                        Some(total) => v / total * 1e6,
                        None => v,
                    };
                    b.add_frequency(word, per_million);
                }
                Err(_) => b.report.frequencies.record(false),
            },
            _ => b.report.frequencies.record(false),
        }
    }
    Ok(())
}

fn read_pos(b: &mut LexiconBuilder, r: impl BufRead, path: &Path) -> Result<(), LexiconError> {
    for line in data_lines(r, path) {
        let (_, line) = line?;
        let line = line.trim_end_matches(['\r', '\n']);
        let mut fields = line.splitn(3, '\t');
        let (Some(word), Some(pos)) = (fields.next(), fields.next()) else {
            b.report.pos.record(false);
            continue;
        };
        match pos.parse::<Pos>() {
            Ok(pos) => {
                b.add_pos(word, pos, fields.next());
            }
            Err(_) => b.report.pos.record(false),
        }
    }
    Ok(())
}
