//! Python bindings. Results cross the boundary as plain dicts and lists;
//! failures raise `dcpgraph.DcpError(kind, message)`.
#![allow(clippy::too_many_arguments)]

use std::path::Path;
use std::sync::Arc;

use dcpgraph_core::analytics::score_dcp;
use dcpgraph_core::explorer::{search_antonyms, search_related, FilterConfig};
use dcpgraph_core::lexicon::{load_lexicon, FrequencyMode, LexiconPaths, LexiconStore};
use dcpgraph_core::metrics;
use dcpgraph_core::session::{
    ExpandVia, ExplorationSession, PoolSource, SessionConfig, Slot, SystemClock,
};
use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

create_exception!(dcpgraph, DcpError, PyException, "Error carrying a machine-readable kind.");

fn err(kind: &str, message: impl ToString) -> PyErr {
    DcpError::new_err((kind.to_string(), message.to_string()))
}

trait Kinded: std::fmt::Display {
    fn kind_str(&self) -> &'static str;
}

macro_rules! kinded {
    ($($t:ty),*) => {$(
        impl Kinded for $t {
            fn kind_str(&self) -> &'static str {
                self.kind()
            }
        }
    )*};
}

kinded!(
    dcpgraph_core::lexicon::LexiconError,
    dcpgraph_core::explorer::ExplorerError,
    dcpgraph_core::metrics::MetricsError,
    dcpgraph_core::session::SessionError
);

fn py_err<E: Kinded>(e: E) -> PyErr {
    err(e.kind_str(), e)
}

fn to_py<'py>(py: Python<'py>, value: &impl serde::Serialize) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| err("internal", e))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn filter(
    min_cos: Option<f64>,
    max_cos: Option<f64>,
    min_freq: Option<f64>,
    max_freq: Option<f64>,
    max_results: Option<usize>,
) -> PyResult<FilterConfig> {
    let d = FilterConfig::default();
    let cfg = FilterConfig {
        cos_min: min_cos.unwrap_or(d.cos_min),
        cos_max: max_cos.unwrap_or(d.cos_max),
        freq_min: min_freq.unwrap_or(d.freq_min),
        freq_max: max_freq.unwrap_or(d.freq_max),
        max_results: max_results.unwrap_or(d.max_results),
    };
    cfg.validate().map_err(py_err)?;
    Ok(cfg)
}

/// An immutable lexicon store.
#[pyclass(frozen, module = "dcpgraph")]
struct Lexicon {
    store: Arc<LexiconStore>,
}

#[pymethods]
impl Lexicon {
    /// Opens a snapshot file or a directory of lexicon source files.
    #[staticmethod]
    fn open(path: &str) -> PyResult<Self> {
        let p = Path::new(path);
        let store = if p.is_dir() {
            load_lexicon(&LexiconPaths::in_dir(p), FrequencyMode::PerMillion).map_err(py_err)?.0
        } else {
            LexiconStore::load_snapshot(p).map_err(py_err)?
        };
        Ok(Lexicon { store: Arc::new(store) })
    }

    #[staticmethod]
    #[pyo3(signature = (edges, embeddings, frequencies, pos, corpus_tokens=None))]
    fn from_files(
        edges: &str,
        embeddings: &str,
        frequencies: &str,
        pos: &str,
        corpus_tokens: Option<u64>,
    ) -> PyResult<Self> {
        let paths = LexiconPaths {
            edges: edges.into(),
            embeddings: embeddings.into(),
            frequencies: frequencies.into(),
            pos: pos.into(),
        };
        let mode = match corpus_tokens {
            Some(n) => FrequencyMode::RawCounts { corpus_token_count: n },
            None => FrequencyMode::PerMillion,
        };
        let (store, _) = load_lexicon(&paths, mode).map_err(py_err)?;
        Ok(Lexicon { store: Arc::new(store) })
    }

    fn save(&self, path: &str) -> PyResult<()> {
        self.store.save_snapshot(Path::new(path)).map_err(py_err)
    }

    #[getter]
    fn dimension(&self) -> usize {
        self.store.dimension()
    }

    #[getter]
    fn vector_count(&self) -> usize {
        self.store.vector_count()
    }

    #[pyo3(signature = (word, *, min_cos=None, max_cos=None, min_freq=None, max_freq=None, max_results=None))]
    fn related<'py>(
        &self,
        py: Python<'py>,
        word: &str,
        min_cos: Option<f64>,
        max_cos: Option<f64>,
        min_freq: Option<f64>,
        max_freq: Option<f64>,
        max_results: Option<usize>,
    ) -> PyResult<Bound<'py, PyAny>> {
        let cfg = filter(min_cos, max_cos, min_freq, max_freq, max_results)?;
        to_py(py, &search_related(&self.store, word, &cfg).map_err(py_err)?)
    }

    #[pyo3(signature = (word, *, min_cos=None, max_cos=None, min_freq=None, max_freq=None, max_results=None))]
    fn antonyms(
        &self,
        word: &str,
        min_cos: Option<f64>,
        max_cos: Option<f64>,
        min_freq: Option<f64>,
        max_freq: Option<f64>,
        max_results: Option<usize>,
    ) -> PyResult<Vec<String>> {
        let cfg = filter(min_cos, max_cos, min_freq, max_freq, max_results)?;
        search_antonyms(&self.store, word, &cfg).map_err(py_err)
    }

    fn score<'py>(&self, py: Python<'py>, w1: &str, w2: &str) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &score_dcp(&self.store, w1, w2, &FilterConfig::default()))
    }

    fn cos_sim(&self, w1: &str, w2: &str) -> Option<f64> {
        score_dcp(&self.store, w1, w2, &FilterConfig::default()).cos_sim
    }

    fn freq(&self, word: &str) -> Option<f64> {
        self.store.freq_of(word)
    }

    fn is_adjective(&self, word: &str) -> bool {
        self.store.is_adjective(word)
    }
}

fn slot_of(name: &str) -> PyResult<Slot> {
    name.parse().map_err(|e: String| err("bad_request", e))
}

/// An exploration session over a [`Lexicon`].
#[pyclass(module = "dcpgraph")]
struct Session {
    store: Arc<LexiconStore>,
    inner: ExplorationSession,
}

#[pymethods]
impl Session {
    #[new]
    #[pyo3(signature = (lexicon, id="session", brief_id="", *, allow_reorder=false, min_cos=None, max_cos=None, min_freq=None, max_freq=None, max_results=None))]
    fn new(
        lexicon: &Lexicon,
        id: &str,
        brief_id: &str,
        allow_reorder: bool,
        min_cos: Option<f64>,
        max_cos: Option<f64>,
        min_freq: Option<f64>,
        max_freq: Option<f64>,
        max_results: Option<usize>,
    ) -> PyResult<Self> {
        let config = SessionConfig {
            filter: filter(min_cos, max_cos, min_freq, max_freq, max_results)?,
            allow_reorder,
        };
        Ok(Session {
            store: lexicon.store.clone(),
            inner: ExplorationSession::new(id, brief_id, config, Arc::new(SystemClock)),
        })
    }

    #[staticmethod]
    fn replay(lexicon: &Lexicon, log: &str) -> PyResult<Self> {
        Ok(Session {
            store: lexicon.store.clone(),
            inner: ExplorationSession::replay(&lexicon.store, log).map_err(py_err)?,
        })
    }

    /// `via` is "query" or "expand_click".
    #[pyo3(signature = (word, via="query"))]
    fn expand<'py>(&mut self, py: Python<'py>, word: &str, via: &str) -> PyResult<Bound<'py, PyAny>> {
        let via = match via {
            "query" => ExpandVia::Query,
            "expand_click" => ExpandVia::ExpandClick,
            other => return Err(err("bad_request", format!("unknown via {other:?}"))),
        };
        let delta = self.inner.expand(&self.store, word, via).map_err(py_err)?;
        to_py(py, &delta)
    }

    #[pyo3(signature = (word, source="graph_drag"))]
    fn add_to_pool(&mut self, word: &str, source: &str) -> PyResult<Vec<String>> {
        let source = match source {
            "graph_drag" => PoolSource::GraphDrag,
            "query_auto" => PoolSource::QueryAuto,
            "slot_drop" => PoolSource::SlotDrop,
            other => return Err(err("bad_request", format!("unknown source {other:?}"))),
        };
        Ok(self.inner.add_to_pool(&self.store, word, source).map_err(py_err)?.to_vec())
    }

    fn set_slot<'py>(&mut self, py: Python<'py>, slot: &str, word: &str) -> PyResult<Bound<'py, PyAny>> {
        let outcome = self.inner.set_slot(&self.store, slot_of(slot)?, word).map_err(py_err)?;
        to_py(py, &outcome)
    }

    fn clear(&mut self) -> PyResult<()> {
        self.inner.clear_playground(&self.store).map_err(py_err)
    }

    fn close(&mut self) -> PyResult<()> {
        self.inner.close().map_err(py_err)
    }

    fn report<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.session_report(&self.store).map_err(py_err)?)
    }

    #[pyo3(name = "map", signature = (k=2))]
    fn exploration_map<'py>(&self, py: Python<'py>, k: usize) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.exploration_map(&self.store, k).map_err(py_err)?)
    }

    fn to_log(&self) -> String {
        self.inner.to_log()
    }

    fn state_json(&self) -> String {
        self.inner.state_json()
    }

    #[getter]
    fn pool(&self) -> Vec<String> {
        self.inner.pool().to_vec()
    }

    #[getter]
    fn cs<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, self.inner.cs())
    }

    #[getter]
    fn event_count(&self) -> usize {
        self.inner.events().len()
    }
}

#[pyfunction]
fn cosine_similarity(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    metrics::cosine_similarity(&a, &b).map_err(py_err)
}

#[pyfunction]
fn pearson(xs: Vec<f64>, ys: Vec<f64>) -> PyResult<f64> {
    Ok(metrics::pearson(&xs, &ys).map_err(py_err)?.r)
}

#[pyfunction]
fn cohens_kappa(a: Vec<i64>, b: Vec<i64>) -> PyResult<f64> {
    metrics::cohens_kappa(&a, &b).map_err(py_err)
}

/// Fits PCA and returns the model with every point projected.
#[pyfunction]
#[pyo3(signature = (points, k=2))]
fn pca<'py>(py: Python<'py>, points: Vec<Vec<f64>>, k: usize) -> PyResult<Bound<'py, PyAny>> {
    let model = metrics::pca_fit(&points, k).map_err(py_err)?;
    let coords = points
        .iter()
        .map(|p| metrics::pca_project(&model, p))
        .collect::<Result<Vec<_>, _>>()
        .map_err(py_err)?;
    to_py(
        py,
        &serde_json::json!({
            "components": model.components,
            "explained_variance": model.explained_variance,
            "mean": model.mean,
            "coords": coords,
        }),
    )
}

#[pymodule]
fn dcpgraph(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("DcpError", m.py().get_type::<DcpError>())?;
    m.add_class::<Lexicon>()?;
    m.add_class::<Session>()?;
    m.add_function(wrap_pyfunction!(cosine_similarity, m)?)?;
    m.add_function(wrap_pyfunction!(pearson, m)?)?;
    m.add_function(wrap_pyfunction!(cohens_kappa, m)?)?;
    m.add_function(wrap_pyfunction!(pca, m)?)?;
    Ok(())
}
