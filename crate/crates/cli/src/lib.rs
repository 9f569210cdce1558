//! `dcpgraph` command line: store ingestion, searches, reports, session
//! replays and the HTTP server.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error. Errors go to stderr
//! as `error[kind]: message`.

use std::fmt::Write as _;
use std::io::Write;
use std::net::SocketAddr;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use axum::body::Bytes;
use axum::http::{Method, StatusCode, Uri};
use axum::response::{IntoResponse, Response};
use axum::Router;
use clap::{Args, Parser, Subcommand};
use dcpgraph_core::analytics::{
    batch_report, correlate, parse_phrases, parse_ratings, parse_report_tsv, render_report_row,
    render_report_tsv, score_dcp, Metric, REPORT_HEADER,
};
use dcpgraph_core::explorer::{search_antonym_hits, search_related, FilterConfig};
use dcpgraph_core::lexicon::{load_lexicon, FrequencyMode, LexiconPaths, LexiconStore};
use dcpgraph_core::service::{ApiRequest, Engine};
use dcpgraph_core::session::{ExplorationSession, SessionConfig};

pub const STORE_ENV: &str = "DCPGRAPH_STORE";

#[derive(Debug, Parser)]
#[command(name = "dcpgraph", version, about = "Design concept phrase search over a lexical graph")]
pub struct Cli {
    /// Store snapshot file, or a directory with edges.tsv, embeddings.txt,
    /// frequencies.tsv and pos.tsv.
    #[arg(long, global = true, env = STORE_ENV)]
    store: Option<PathBuf>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args, Clone, Copy)]
struct FilterArgs {
    #[arg(long)]
    min_cos: Option<f64>,
    #[arg(long)]
    max_cos: Option<f64>,
    #[arg(long)]
    min_freq: Option<f64>,
    #[arg(long)]
    max_freq: Option<f64>,
    #[arg(long)]
    max_results: Option<usize>,
}

impl FilterArgs {
    fn config(self) -> Result<FilterConfig, Failure> {
        let d = FilterConfig::default();
        let cfg = FilterConfig {
            cos_min: self.min_cos.unwrap_or(d.cos_min),
            cos_max: self.max_cos.unwrap_or(d.cos_max),
            freq_min: self.min_freq.unwrap_or(d.freq_min),
            freq_max: self.max_freq.unwrap_or(d.freq_max),
            max_results: self.max_results.unwrap_or(d.max_results),
        };
        cfg.validate().map_err(|e| Failure::usage(e.kind(), e))?;
        Ok(cfg)
    }
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Build a store snapshot from lexicon source files.
    Ingest {
        /// Directory holding the four source files under their default names.
        #[arg(long)]
        dir: Option<PathBuf>,
        #[arg(long)]
        edges: Option<PathBuf>,
        #[arg(long)]
        embeddings: Option<PathBuf>,
        #[arg(long)]
        frequencies: Option<PathBuf>,
        #[arg(long)]
        pos: Option<PathBuf>,
        /// Frequencies are raw counts over a corpus of this many tokens.
        #[arg(long)]
        corpus_tokens: Option<u64>,
        /// Snapshot file to write.
        #[arg(long, short)]
        out: PathBuf,
    },
    /// Serve the HTTP API.
    Serve {
        #[arg(long, default_value = "127.0.0.1:8080")]
        addr: SocketAddr,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Related words of WORD, one per line.
    Related {
        word: String,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        json: bool,
    },
    /// Antonym candidates of WORD, one per line.
    Antonyms {
        word: String,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        json: bool,
    },
    /// Metrics of the phrase W1 W2 as a report row.
    Score {
        w1: String,
        w2: String,
        #[command(flatten)]
        filter: FilterArgs,
        #[arg(long)]
        json: bool,
    },
    /// Report over a phrase file (two tab-separated words per line).
    Report {
        file: PathBuf,
        #[command(flatten)]
        filter: FilterArgs,
    },
    /// Exploration map of a session log.
    Map {
        log: PathBuf,
        /// Number of principal components.
        #[arg(long, short, default_value_t = 2)]
        k: usize,
        #[arg(long)]
        json: bool,
    },
    /// Correlate a report column with ratings.
    Correlate {
        report: PathBuf,
        ratings: PathBuf,
        #[arg(long)]
        metric: String,
    },
    /// Replay a session log and print the resulting state.
    Replay { log: PathBuf },
}

/// A failed command: exit code, error kind and message.
#[derive(Debug)]
pub struct Failure {
    code: i32,
    kind: String,
    message: String,
}

impl Failure {
    fn usage(kind: &str, message: impl ToString) -> Self {
        Failure { code: 1, kind: kind.into(), message: message.to_string() }
    }

    fn data(kind: &str, message: impl ToString) -> Self {
        Failure { code: 2, kind: kind.into(), message: message.to_string() }
    }
}

macro_rules! data_failure {
    ($($t:ty),*) => {$(
        impl From<$t> for Failure {
            fn from(e: $t) -> Self {
                Failure::data(e.kind(), e)
            }
        }
    )*};
}

data_failure!(
    dcpgraph_core::lexicon::LexiconError,
    dcpgraph_core::explorer::ExplorerError,
    dcpgraph_core::analytics::AnalyticsError,
    dcpgraph_core::session::SessionError
);

impl From<std::io::Error> for Failure {
    fn from(e: std::io::Error) -> Self {
        Failure::data("io", e)
    }
}

/// Parses `argv` (program name first) and runs the command.
pub fn run<I, T>(argv: I, out: &mut dyn Write, err: &mut dyn Write) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let text = e.render().to_string();
            if code == 0 {
                let _ = write!(out, "{text}");
            } else {
                let _ = write!(err, "{text}");
            }
            return code;
        }
    };
    match execute(cli, out, err) {
        Ok(code) => code,
        Err(f) => {
            let _ = writeln!(err, "error[{}]: {}", f.kind, f.message);
            f.code
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    std::fs::read_to_string(path)
        .map_err(|e| Failure::data("unreadable_source", format!("{}: {e}", path.display())))
}

pub fn open_store(path: &Path) -> Result<LexiconStore, Failure> {
    if path.is_dir() {
        Ok(load_lexicon(&LexiconPaths::in_dir(path), FrequencyMode::PerMillion)?.0)
    } else {
        Ok(LexiconStore::load_snapshot(path)?)
    }
}

fn store_of(cli_store: &Option<PathBuf>) -> Result<LexiconStore, Failure> {
    let path = cli_store.as_ref().ok_or_else(|| {
        Failure::usage("missing_store", format!("pass --store or set {STORE_ENV}"))
    })?;
    open_store(path)
}

fn json_line(value: &impl serde::Serialize) -> String {
    serde_json::to_string_pretty(value).expect("output serializes")
}

fn execute(cli: Cli, out: &mut dyn Write, err: &mut dyn Write) -> Result<i32, Failure> {
    match cli.command {
        Command::Ingest { dir, edges, embeddings, frequencies, pos, corpus_tokens, out: target } => {
            let base = dir.map(LexiconPaths::in_dir);
            let pick = |given: Option<PathBuf>, default: Option<&PathBuf>, name: &str| {
                given.or_else(|| default.cloned()).ok_or_else(|| {
                    Failure::usage("missing_source", format!("pass --{name} or --dir"))
                })
            };
            let paths = LexiconPaths {
                edges: pick(edges, base.as_ref().map(|b| &b.edges), "edges")?,
                embeddings: pick(embeddings, base.as_ref().map(|b| &b.embeddings), "embeddings")?,
                frequencies: pick(frequencies, base.as_ref().map(|b| &b.frequencies), "frequencies")?,
                pos: pick(pos, base.as_ref().map(|b| &b.pos), "pos")?,
            };
            let mode = match corpus_tokens {
                Some(n) => FrequencyMode::RawCounts { corpus_token_count: n },
                None => FrequencyMode::PerMillion,
            };
            let (store, report) = load_lexicon(&paths, mode)?;
            store.save_snapshot(&target)?;
            writeln!(out, "source\tloaded\tskipped")?;
            for (name, c) in [
                ("edges", report.edges),
                ("embeddings", report.vectors),
                ("frequencies", report.frequencies),
                ("pos", report.pos),
            ] {
                writeln!(out, "{name}\t{}\t{}", c.loaded, c.skipped)?;
            }
            writeln!(err, "wrote {}", target.display())?;
            Ok(0)
        }
        Command::Serve { addr, filter } => {
            let config = SessionConfig { filter: filter.config()?, allow_reorder: false };
            let store = store_of(&cli.store)?;
            let engine = Arc::new(Engine::new(Arc::new(store), config));
            let runtime = tokio::runtime::Runtime::new()?;
            runtime.block_on(async {
                let listener = tokio::net::TcpListener::bind(addr).await?;
                writeln!(err, "listening on http://{}", listener.local_addr()?)?;
                serve(listener, engine).await
            })?;
            Ok(0)
        }
        Command::Related { word, filter, json } => {
            let cfg = filter.config()?;
            let store = store_of(&cli.store)?;
            let results = search_related(&store, &word, &cfg)?;
            if json {
                writeln!(out, "{}", json_line(&results))?;
            } else {
                for r in results {
                    writeln!(out, "{}\t{}\t{:.4}\t{:.4}", r.word, r.relation, r.cos_sim, r.freq)?;
                }
            }
            Ok(0)
        }
        Command::Antonyms { word, filter, json } => {
            let cfg = filter.config()?;
            let store = store_of(&cli.store)?;
            let hits = search_antonym_hits(&store, &word, &cfg)?;
            if json {
                writeln!(out, "{}", json_line(&hits))?;
            } else {
                for h in hits {
                    writeln!(out, "{}\t{}", h.word, h.via)?;
                }
            }
            Ok(0)
        }
        Command::Score { w1, w2, filter, json } => {
            let cfg = filter.config()?;
            let store = store_of(&cli.store)?;
            let report = score_dcp(&store, &w1, &w2, &cfg);
            if json {
                writeln!(out, "{}", json_line(&report))?;
            } else {
                writeln!(out, "{REPORT_HEADER}\n{}", render_report_row(&report))?;
            }
            Ok(0)
        }
        Command::Report { file, filter } => {
            let cfg = filter.config()?;
            let text = read(&file)?;
            let store = store_of(&cli.store)?;
            let (phrases, errors) = parse_phrases(&text);
            write!(out, "{}", render_report_tsv(&batch_report(&store, &phrases, &cfg)))?;
            for e in &errors {
                writeln!(err, "error[{}]: {}: {e}", e.kind(), file.display())?;
            }
            Ok(if errors.is_empty() { 0 } else { 2 })
        }
        Command::Map { log, k, json } => {
            let text = read(&log)?;
            let store = store_of(&cli.store)?;
            let session = ExplorationSession::replay(&store, &text)?;
            let map = session.exploration_map(&store, k)?;
            if json {
                writeln!(out, "{}", json_line(&map))?;
                return Ok(0);
            }
            let mut header = String::from("word");
            for i in 1..=k {
                write!(header, "\tpc{i}").unwrap();
            }
            writeln!(out, "{header}\tevents")?;
            for p in &map.points {
                let coords: Vec<String> = p.coords.iter().map(|c| format!("{c:.6}")).collect();
                let events: Vec<String> =
                    p.events.iter().map(|e| format!("{}:{}", e.seq, e.kind.as_str())).collect();
                writeln!(out, "{}\t{}\t{}", p.word, coords.join("\t"), events.join(","))?;
            }
            for w in &map.unplottable {
                writeln!(out, "{w}{}\t", "\tnull".repeat(k))?;
            }
            Ok(0)
        }
        Command::Correlate { report, ratings, metric } => {
            let metric: Metric = metric
                .parse()
                .map_err(|e: dcpgraph_core::analytics::AnalyticsError| Failure::usage(e.kind(), e))?;
            let reports = parse_report_tsv(&read(&report)?)?;
            let ratings = parse_ratings(&read(&ratings)?)?;
            let c = correlate(&reports, &ratings, metric)?;
            writeln!(out, "metric\tr\tn\tdropped")?;
            writeln!(out, "{}\t{:.4}\t{}\t{}", metric.as_str(), c.result.r, c.result.n, c.dropped)?;
            Ok(0)
        }
        Command::Replay { log } => {
            let text = read(&log)?;
            let store = store_of(&cli.store)?;
            let session = ExplorationSession::replay(&store, &text)?;
            writeln!(out, "{}", session.state_json())?;
            Ok(0)
        }
    }
}

/// Router sending every request through [`Engine::dispatch`].
pub fn router(engine: Arc<Engine>) -> Router {
    Router::new().fallback(move |method: Method, uri: Uri, body: Bytes| {
        let engine = engine.clone();
        async move { handle(&engine, method, uri, body) }
    })
}

fn handle(engine: &Engine, method: Method, uri: Uri, body: Bytes) -> Response {
    let target = uri.path_and_query().map(|p| p.as_str()).unwrap_or("/");
    let parsed = if body.iter().all(u8::is_ascii_whitespace) {
        Ok(None)
    } else {
        serde_json::from_slice(&body).map(Some)
    };
    let response = match parsed {
        Ok(body) => engine.dispatch(&ApiRequest::new(method.as_str(), target, body)),
        Err(e) => dcpgraph_core::service::ApiResponse {
            status: 400,
            body: serde_json::json!({
                "schema_version": dcpgraph_core::service::API_SCHEMA_VERSION,
                "error_kind": "bad_request",
                "message": format!("body is not JSON: {e}"),
            }),
        },
    };
    let status = StatusCode::from_u16(response.status).unwrap_or(StatusCode::INTERNAL_SERVER_ERROR);
    (status, axum::Json(response.body)).into_response()
}

pub async fn serve(listener: tokio::net::TcpListener, engine: Arc<Engine>) -> std::io::Result<()> {
    axum::serve(listener, router(engine)).await
}
