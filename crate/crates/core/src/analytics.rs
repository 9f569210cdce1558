//! Phrase scoring, tabular reports and metric/rating correlations.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::explorer::FilterConfig;
use crate::lexicon::{normalize_token, LexiconStore};
use crate::metrics::{cosine_similarity, pearson, CorrelationResult, MetricsError};

pub const REPORT_HEADER: &str = "w1\tw2\tfreq_w1\tfreq_w2\tmean_freq\tcos_sim\tflags";

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalyticsError {
    #[error("line {line}: {message}")]
    MalformedRow { line: usize, message: String },
    #[error("expected {expected} ratings, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("only {0} rows carry the metric; need at least 2")]
    TooFewPairs(usize),
    #[error("unknown metric {0:?} (expected cos_sim or mean_freq)")]
    UnknownMetric(String),
    #[error(transparent)]
    Metrics(#[from] MetricsError),
}

impl AnalyticsError {
    pub fn kind(&self) -> &'static str {
        match self {
            AnalyticsError::MalformedRow { .. } => "malformed_row",
            AnalyticsError::LengthMismatch { .. } => "length_mismatch",
            AnalyticsError::TooFewPairs(_) => "too_few_pairs",
            AnalyticsError::UnknownMetric(_) => "unknown_metric",
            AnalyticsError::Metrics(e) => e.kind(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Flag {
    HighSimilarity,
    HighFrequency,
    LowFrequency,
    MissingData,
}

impl Flag {
    pub fn as_str(self) -> &'static str {
        match self {
            Flag::HighSimilarity => "high_similarity",
            Flag::HighFrequency => "high_frequency",
            Flag::LowFrequency => "low_frequency",
            Flag::MissingData => "missing_data",
        }
    }
}

impl FromStr for Flag {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "high_similarity" => Ok(Flag::HighSimilarity),
            "high_frequency" => Ok(Flag::HighFrequency),
            "low_frequency" => Ok(Flag::LowFrequency),
            "missing_data" => Ok(Flag::MissingData),
            other => Err(format!("unknown flag {other:?}")),
        }
    }
}

/// Metrics of one two-word phrase. Absent values mean the lexicon lacks the
/// underlying data, never zero.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DcpReport {
    pub w1: String,
    pub w2: String,
    pub freq_w1: Option<f64>,
    pub freq_w2: Option<f64>,
    pub mean_freq: Option<f64>,
    pub cos_sim: Option<f64>,
    pub flags: BTreeSet<Flag>,
}

fn lookup_token(raw: &str) -> (String, Option<String>) {
    match normalize_token(raw) {
        Some(t) => (t.clone(), Some(t)),
        None => (raw.trim().to_string(), None),
    }
}

pub fn score_dcp(store: &LexiconStore, w1: &str, w2: &str, config: &FilterConfig) -> DcpReport {
    let (w1, t1) = lookup_token(w1);
    let (w2, t2) = lookup_token(w2);
    let freq_w1 = t1.as_deref().and_then(|t| store.freq_of(t));
    let freq_w2 = t2.as_deref().and_then(|t| store.freq_of(t));
    let present: Vec<f64> = [freq_w1, freq_w2].into_iter().flatten().collect();
    let mean_freq = (!present.is_empty()).then(|| present.iter().sum::<f64>() / present.len() as f64);
    let cos_sim = match (
        t1.as_deref().and_then(|t| store.vector_of(t)),
        t2.as_deref().and_then(|t| store.vector_of(t)),
    ) {
        (Some(a), Some(b)) => cosine_similarity(&a.components, &b.components).ok(),
        _ => None,
    };

    let mut flags = BTreeSet::new();
    if cos_sim.is_some_and(|c| c > config.cos_max) {
        flags.insert(Flag::HighSimilarity);
    }
    if let Some(m) = mean_freq {
        if m > config.freq_max {
            flags.insert(Flag::HighFrequency);
        }
        if m < config.freq_min {
            flags.insert(Flag::LowFrequency);
        }
    }
    if freq_w1.is_none() || freq_w2.is_none() || cos_sim.is_none() {
        flags.insert(Flag::MissingData);
    }
    DcpReport {
        w1,
        w2,
        freq_w1,
        freq_w2,
        mean_freq,
        cos_sim,
        flags,
    }
}

pub fn batch_report(
    store: &LexiconStore,
    phrases: &[(String, String)],
    config: &FilterConfig,
) -> Vec<DcpReport> {
    phrases
        .iter()
        .map(|(a, b)| score_dcp(store, a, b, config))
        .collect()
}

fn fmt_value(v: Option<f64>) -> String {
    v.map_or_else(|| "null".to_string(), |x| format!("{x:.4}"))
}

pub fn render_report_row(r: &DcpReport) -> String {
    let flags: Vec<&str> = r.flags.iter().map(|f| f.as_str()).collect();
    format!(
        "{}\t{}\t{}\t{}\t{}\t{}\t{}",
        r.w1,
        r.w2,
        fmt_value(r.freq_w1),
        fmt_value(r.freq_w2),
        fmt_value(r.mean_freq),
        fmt_value(r.cos_sim),
        flags.join(",")
    )
}

/// Report TSV: [`REPORT_HEADER`], one row per report, `null` for absent
/// values, flags comma-joined.
pub fn render_report_tsv(reports: &[DcpReport]) -> String {
    let mut out = String::with_capacity(64 * (reports.len() + 1));
    out.push_str(REPORT_HEADER);
    out.push('\n');
    for r in reports {
        let _ = writeln!(out, "{}", render_report_row(r));
    }
    out
}

fn data_rows(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim_end_matches('\r')))
        .filter(|(_, l)| !l.trim().is_empty() && !l.trim_start().starts_with('#'))
}

/// Phrase list: `w1<TAB>w2[<TAB>...]` or `w1 w2` per line. A leading
/// `w1<TAB>w2` header (as in report TSV) is skipped, so reports can be fed
/// back in. Malformed rows are returned separately and do not stop parsing.
pub fn parse_phrases(text: &str) -> (Vec<(String, String)>, Vec<AnalyticsError>) {
    let mut phrases = Vec::new();
    let mut errors = Vec::new();
    for (line, row) in data_rows(text) {
        let fields: Vec<&str> = if row.contains('\t') {
            row.split('\t').map(str::trim).collect()
        } else {
            row.split_whitespace().collect()
        };
        if fields.len() >= 2 && fields[0] == "w1" && fields[1] == "w2" {
            continue;
        }
        let malformed = |message: String| AnalyticsError::MalformedRow { line, message };
        if fields.len() < 2 || (!row.contains('\t') && fields.len() != 2) {
            errors.push(malformed(format!("expected two words, got {row:?}")));
            continue;
        }
        match (normalize_token(fields[0]), normalize_token(fields[1])) {
            (Some(a), Some(b)) => phrases.push((a, b)),
            _ => errors.push(malformed(format!(
                "{:?} / {:?} are not single words",
                fields[0], fields[1]
            ))),
        }
    }
    (phrases, errors)
}

pub fn parse_report_tsv(text: &str) -> Result<Vec<DcpReport>, AnalyticsError> {
    let mut rows = data_rows(text);
    match rows.next() {
        Some((_, h)) if h == REPORT_HEADER => {}
        Some((line, _)) => {
            return Err(AnalyticsError::MalformedRow {
                line,
                message: "missing report header".into(),
            })
        }
        None => return Ok(Vec::new()),
    }
    rows.map(|(line, row)| {
        let malformed = |message: String| AnalyticsError::MalformedRow { line, message };
        let fields: Vec<&str> = row.split('\t').collect();
        if fields.len() != 7 {
            return Err(malformed(format!("expected 7 columns, got {}", fields.len())));
        }
        let value = |s: &str| -> Result<Option<f64>, AnalyticsError> {
            match s.trim() {
                "null" => Ok(None),
                v => v
                    .parse::<f64>()
                    .map(Some)
                    .map_err(|_| malformed(format!("bad number {v:?}"))),
            }
        };
        let flags = fields[6]
            .split(',')
            .map(str::trim)
            .filter(|f| !f.is_empty())
            .map(|f| f.parse::<Flag>().map_err(malformed))
            .collect::<Result<_, _>>()?;
        Ok(DcpReport {
            w1: fields[0].to_string(),
            w2: fields[1].to_string(),
            freq_w1: value(fields[2])?,
            freq_w2: value(fields[3])?,
            mean_freq: value(fields[4])?,
            cos_sim: value(fields[5])?,
            flags,
        })
    })
    .collect()
}

/// Ratings file: one rating per line, taken from the last tab-separated
/// field. A non-numeric first line is treated as a header.
pub fn parse_ratings(text: &str) -> Result<Vec<f64>, AnalyticsError> {
    let mut out = Vec::new();
    for (idx, (line, row)) in data_rows(text).enumerate() {
        let last = row.rsplit('\t').next().unwrap_or("").trim();
        match last.parse::<f64>() {
            Ok(v) if v.is_finite() => out.push(v),
            _ if idx == 0 => {}
            _ => {
                return Err(AnalyticsError::MalformedRow {
                    line,
                    message: format!("bad rating {last:?}"),
                })
            }
        }
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    CosSim,
    MeanFreq,
}

impl Metric {
    pub fn as_str(self) -> &'static str {
        match self {
            Metric::CosSim => "cos_sim",
            Metric::MeanFreq => "mean_freq",
        }
    }

    pub fn of(self, report: &DcpReport) -> Option<f64> {
        match self {
            Metric::CosSim => report.cos_sim,
            Metric::MeanFreq => report.mean_freq,
        }
    }
}

impl FromStr for Metric {
    type Err = AnalyticsError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().replace('-', "_").as_str() {
            "cos_sim" | "cossim" => Ok(Metric::CosSim),
            "mean_freq" | "meanfreq" => Ok(Metric::MeanFreq),
            _ => Err(AnalyticsError::UnknownMetric(s.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Correlation {
    #[serde(flatten)]
    pub result: CorrelationResult,
    pub dropped: usize,
}

/// Pearson correlation between one report column and aligned ratings, with
/// rows lacking the metric dropped pairwise.
pub fn correlate(
    reports: &[DcpReport],
    ratings: &[f64],
    metric: Metric,
) -> Result<Correlation, AnalyticsError> {
    if reports.len() != ratings.len() {
        return Err(AnalyticsError::LengthMismatch {
            expected: reports.len(),
            got: ratings.len(),
        });
    }
    let (xs, ys): (Vec<f64>, Vec<f64>) = reports
        .iter()
        .zip(ratings)
        .filter_map(|(r, &y)| metric.of(r).map(|x| (x, y)))
        .unzip();
    if xs.len() < 2 {
        return Err(AnalyticsError::TooFewPairs(xs.len()));
    }
    let dropped = reports.len() - xs.len();
    Ok(Correlation {
        result: pearson(&xs, &ys)?,
        dropped,
    })
}
