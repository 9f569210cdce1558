//! Shared fixtures and independent oracles for the integration suites.
#![allow(dead_code, clippy::needless_range_loop)]

use std::collections::{BTreeMap, BTreeSet, HashSet};
use std::path::PathBuf;

use dcpgraph_core::explorer::FilterConfig;
use dcpgraph_core::lexicon::{
    load_lexicon, FrequencyMode, LexiconBuilder, LexiconPaths, LexiconStore, Pos,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn fixture_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures")
}

pub fn fixture_text(name: &str) -> String {
    std::fs::read_to_string(fixture_dir().join(name)).unwrap()
}

pub fn desk_store() -> LexiconStore {
    let paths = LexiconPaths::in_dir(fixture_dir().join("desk"));
    load_lexicon(&paths, FrequencyMode::PerMillion).unwrap().0
}

/// One published Table 5 row.
#[derive(Debug, Clone)]
pub struct Table5Row {
    pub id: String,
    pub w1: String,
    pub w2: String,
    pub wc: usize,
    pub mean_freq: Option<f64>,
    pub cos_sim: Option<f64>,
}

fn null_or(v: &str) -> Option<f64> {
    (v != "null").then(|| v.parse().unwrap())
}

pub fn table5() -> Vec<Table5Row> {
    fixture_text("table5_expected.tsv")
        .lines()
        .filter(|l| !l.starts_with('#') && !l.trim().is_empty())
        .map(|l| {
            let f: Vec<&str> = l.split('\t').collect();
            Table5Row {
                id: f[0].into(),
                w1: f[2].into(),
                w2: f[3].into(),
                wc: f[4].parse().unwrap(),
                mean_freq: null_or(f[7]),
                cos_sim: null_or(f[8]),
            }
        })
        .collect()
}

/// Published values carry three decimals; the extra 1e-9 absorbs binary
/// rounding of values that sit exactly on the boundary.
pub const TABLE5_TOL: f64 = 0.005 + 1e-9;

pub fn close(got: Option<f64>, want: Option<f64>, tol: f64) -> bool {
    match (got, want) {
        (None, None) => true,
        (Some(a), Some(b)) => (a - b).abs() <= tol,
        _ => false,
    }
}

/// Raw material of a random lexicon, kept alongside the built store so
/// oracles never consult the store.
#[derive(Debug, Clone)]
pub struct RawLexicon {
    pub words: Vec<String>,
    pub edges: Vec<(String, String, String)>,
    pub vectors: BTreeMap<String, Vec<f64>>,
    pub freqs: BTreeMap<String, f64>,
    pub pos: BTreeMap<String, Pos>,
}

const RELATIONS: [&str; 5] = ["RelatedTo", "Synonym", "IsA", "SimilarTo", "Antonym"];

fn word_name(i: usize) -> String {
    let mut s = String::new();
    let mut n = i;
    loop {
        s.push((b'a' + (n % 26) as u8) as char);
        n /= 26;
        if n == 0 {
            break;
        }
    }
    format!("w{s}")
}

/// Up to 50 words and 200 edges. Vectors are mostly near a shared direction
/// so cosines spread across the filter bounds, and some words lack vectors,
/// frequencies or an adjective reading.
pub fn random_lexicon(seed: u64) -> RawLexicon {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_words = rng.random_range(10..=50);
    let dim = rng.random_range(4..=12);
    let words: Vec<String> = (0..n_words).map(word_name).collect();
    let mut vectors = BTreeMap::new();
    let mut freqs = BTreeMap::new();
    let mut pos = BTreeMap::new();
    for w in &words {
        if rng.random_bool(0.9) {
            let v: Vec<f64> = (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect();
            if v.iter().any(|x| *x != 0.0) {
                vectors.insert(w.clone(), v);
            }
        }
        if rng.random_bool(0.85) {
            // log-uniform over roughly 0.1..300 per million
            let f = 10f64.powf(rng.random_range(-1.0..2.5));
            freqs.insert(w.clone(), f);
        }
        let r: f64 = rng.random();
        if r < 0.75 {
            pos.insert(w.clone(), Pos::Adjective);
        } else if r < 0.9 {
            pos.insert(w.clone(), Pos::Noun);
        }
    }
    let n_edges = rng.random_range(n_words..=200);
    let mut seen = HashSet::new();
    let mut edges = Vec::new();
    for _ in 0..n_edges {
        let a = rng.random_range(0..n_words);
        let b = rng.random_range(0..n_words);
        if a == b {
            continue;
        }
        let rel = RELATIONS[rng.random_range(0..RELATIONS.len())];
        let key = (rel, a.min(b), a.max(b));
        if seen.insert(key) {
            edges.push((rel.to_string(), words[a].clone(), words[b].clone()));
        }
    }
    RawLexicon {
        words,
        edges,
        vectors,
        freqs,
        pos,
    }
}

impl RawLexicon {
    pub fn build(&self) -> LexiconStore {
        let mut b = LexiconBuilder::new();
        for (rel, s, e) in &self.edges {
            assert!(b.add_edge(rel, s, e, 1.0));
        }
        for (w, v) in &self.vectors {
            assert!(b.add_vector(w, v.clone()));
        }
        for (w, f) in &self.freqs {
            assert!(b.add_frequency(w, *f));
        }
        for (w, p) in &self.pos {
            assert!(b.add_pos(w, *p, None));
        }
        b.build().unwrap()
    }

    pub fn adjectives(&self) -> Vec<&str> {
        self.pos
            .iter()
            .filter(|(_, p)| **p == Pos::Adjective)
            .map(|(w, _)| w.as_str())
            .collect()
    }

    fn is_adj(&self, w: &str) -> bool {
        self.pos.get(w) == Some(&Pos::Adjective)
    }

    fn cos(&self, a: &str, b: &str) -> Option<f64> {
        let (x, y) = (self.vectors.get(a)?, self.vectors.get(b)?);
        let dot: f64 = x.iter().zip(y).map(|(p, q)| p * q).sum();
        let nx = x.iter().map(|p| p * p).sum::<f64>().sqrt();
        let ny = y.iter().map(|q| q * q).sum::<f64>().sqrt();
        Some(dot / (nx * ny))
    }

    /// Scans every edge and applies each bound directly.
    pub fn oracle_related(&self, w: &str, cfg: &FilterConfig) -> BTreeSet<String> {
        let mut out = BTreeSet::new();
        for (rel, s, e) in &self.edges {
            if rel == "Antonym" {
                continue;
            }
            let other = if s == w {
                e
            } else if e == w {
                s
            } else {
                continue;
            };
            let Some(c) = self.cos(w, other) else { continue };
            let Some(&f) = self.freqs.get(other) else { continue };
            if cfg.cos_min <= c.abs()
                && c.abs() <= cfg.cos_max
                && cfg.freq_min <= f
                && f <= cfg.freq_max
                && self.is_adj(other)
            {
                out.insert(other.clone());
            }
        }
        out
    }

    /// Related words ranked by |cos| descending then alphabetically, then
    /// both endpoints of each incident antonym edge (edges visited in order
    /// of their other endpoint).
    pub fn oracle_antonyms(&self, w: &str, cfg: &FilterConfig) -> Vec<String> {
        let mut related: Vec<(f64, String)> = self
            .oracle_related(w, cfg)
            .into_iter()
            .map(|r| (self.cos(w, &r).unwrap().abs(), r))
            .collect();
        related.sort_by(|a, b| b.0.total_cmp(&a.0).then_with(|| a.1.cmp(&b.1)));
        let mut out: Vec<String> = Vec::new();
        for (_, r) in &related {
            let mut incident: Vec<(&String, &String, &String)> = self
                .edges
                .iter()
                .filter(|(rel, s, e)| rel == "Antonym" && (s == r || e == r))
                .map(|(_, s, e)| (if s == r { e } else { s }, s, e))
                .collect();
            incident.sort();
            for (_, s, e) in incident {
                for x in [s, e] {
                    if x != w && self.is_adj(x) && !out.contains(x) {
                        out.push(x.clone());
                    }
                }
            }
        }
        out
    }
}

/// Eigenpairs of a symmetric matrix by cyclic Jacobi rotations, sorted by
/// decreasing eigenvalue. Eigenvectors are returned as rows.
pub fn jacobi_eigen(m: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = m.len();
    let mut a: Vec<Vec<f64>> = m.to_vec();
    let mut v: Vec<Vec<f64>> = (0..n)
        .map(|i| (0..n).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
        .collect();
    for _sweep in 0..100 {
        let off: f64 = (0..n)
            .flat_map(|i| (0..n).filter(move |&j| j != i).map(move |j| (i, j)))
            .map(|(i, j)| a[i][j] * a[i][j])
            .sum();
        if off < 1e-30 {
            break;
        }
        for p in 0..n {
            for q in p + 1..n {
                if a[p][q].abs() < 1e-300 {
                    continue;
                }
                let theta = (a[q][q] - a[p][p]) / (2.0 * a[p][q]);
                let t = theta.signum() / (theta.abs() + (theta * theta + 1.0).sqrt());
                let t = if theta == 0.0 { 1.0 } else { t };
                let c = 1.0 / (t * t + 1.0).sqrt();
                let s = t * c;
                for k in 0..n {
                    let akp = a[k][p];
                    let akq = a[k][q];
                    a[k][p] = c * akp - s * akq;
                    a[k][q] = s * akp + c * akq;
                }
                for k in 0..n {
                    let apk = a[p][k];
                    let aqk = a[q][k];
                    a[p][k] = c * apk - s * aqk;
                    a[q][k] = s * apk + c * aqk;
                }
                for row in v.iter_mut() {
                    let vp = row[p];
                    let vq = row[q];
                    row[p] = c * vp - s * vq;
                    row[q] = s * vp + c * vq;
                }
            }
        }
    }
    let mut pairs: Vec<(f64, Vec<f64>)> = (0..n)
        .map(|j| (a[j][j], (0..n).map(|i| v[i][j]).collect()))
        .collect();
    pairs.sort_by(|x, y| y.0.total_cmp(&x.0));
    pairs.into_iter().unzip()
}

/// Projection of `points` onto their top `k` principal axes, computed with
/// [`jacobi_eigen`] on the (n - 1)-normalised covariance. Axis signs follow
/// the library's convention.
pub fn oracle_pca(points: &[Vec<f64>], k: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = points.len();
    let d = points[0].len();
    let mean: Vec<f64> = (0..d)
        .map(|j| points.iter().map(|p| p[j]).sum::<f64>() / n as f64)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for p in points {
        for i in 0..d {
            for j in 0..d {
                cov[i][j] += (p[i] - mean[i]) * (p[j] - mean[j]) / (n as f64 - 1.0);
            }
        }
    }
    let (vals, mut vecs) = jacobi_eigen(&cov);
    for axis in vecs.iter_mut() {
        if axis.iter().find(|x| x.abs() > 1e-12).is_some_and(|&x| x < 0.0) {
            axis.iter_mut().for_each(|x| *x = -*x);
        }
    }
    let coords = points
        .iter()
        .map(|p| {
            vecs[..k]
                .iter()
                .map(|axis| axis.iter().zip(p).zip(&mean).map(|((a, x), m)| a * (x - m)).sum())
                .collect()
        })
        .collect();
    (vals[..k].to_vec(), coords)
}

pub fn random_points(seed: u64, n: usize, d: usize) -> Vec<Vec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| (0..d).map(|j| rng.random_range(-1.0..1.0) * (d - j) as f64).collect())
        .collect()
}

/// The four narrated cases: (cos_sim, expert originality).
pub const NARRATED_CASES: [(&str, &str, f64, f64); 4] = [
    ("protean", "companionable", 0.063, 6.5),
    ("cognizant", "inclusive", 0.105, 5.0),
    ("sustainable", "renewable", 0.572, 1.5),
    ("economical", "efficient", 0.551, 2.5),
];

/// Pearson r written out term by term.
pub fn pearson_by_hand(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let sx: f64 = xs.iter().sum();
    let sy: f64 = ys.iter().sum();
    let sxx: f64 = xs.iter().map(|x| x * x).sum();
    let syy: f64 = ys.iter().map(|y| y * y).sum();
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| x * y).sum();
    (n * sxy - sx * sy) / ((n * sxx - sx * sx).sqrt() * (n * syy - sy * sy).sqrt())
}
