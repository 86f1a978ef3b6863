//! Python bindings: scene generation/loading, episode runs, metrics, and
//! map dumps, mirroring the `eqa` CLI surface.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use eqa_core::explorer::{self, ExplorerConfig};
use eqa_core::gen::{doc_to_ron, generate_doc, GenConfig};
use eqa_core::harness::aggregate;
use eqa_core::relevance::ScorerBinding;

fn to_py_err(e: eqa_core::Error) -> PyErr {
    match &e {
        eqa_core::Error::Endpoint { .. } => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

/// A validated grid-world scene with rooms, objects, and questions.
#[pyclass(name = "Scene")]
struct PyScene {
    inner: eqa_core::scene::Scene,
}

#[pymethods]
impl PyScene {
    /// Deterministically generate a scene from a seed.
    #[staticmethod]
    #[pyo3(signature = (seed, rows=None, cols=None))]
    fn generate(seed: u64, rows: Option<usize>, cols: Option<usize>) -> PyResult<Self> {
        let mut cfg = GenConfig::default();
        if let Some(r) = rows {
            cfg.rows = r;
        }
        if let Some(c) = cols {
            cfg.cols = c;
        }
        let inner = eqa_core::gen::generate_scene(seed, &cfg).map_err(to_py_err)?;
        Ok(PyScene { inner })
    }

    /// Parse a scene from its textual form.
    #[staticmethod]
    fn from_text(text: &str) -> PyResult<Self> {
        let inner = eqa_core::scene::load_scene(text).map_err(to_py_err)?;
        Ok(PyScene { inner })
    }

    fn to_text(&self) -> PyResult<String> {
        doc_to_ron(&self.inner.to_doc()).map_err(to_py_err)
    }

    fn rooms(&self) -> Vec<String> {
        self.inner.rooms.iter().map(|r| r.name.clone()).collect()
    }

    fn question_ids(&self) -> Vec<String> {
        self.inner.questions.iter().map(|q| q.id.clone()).collect()
    }

    fn question_text(&self, id: &str) -> PyResult<String> {
        Ok(self.inner.question(id).map_err(to_py_err)?.text.clone())
    }

    #[getter]
    fn free_area_m2(&self) -> f64 {
        self.inner.room_size_m2
    }

    #[getter]
    fn start(&self) -> (usize, usize) {
        self.inner.start
    }

    /// ASCII floor plan: `#` wall, `.` free.
    fn grid(&self) -> String {
        self.inner.to_doc().grid.join("\n")
    }

    fn geodesic_distance(&self, a: (f64, f64), b: (f64, f64)) -> PyResult<f64> {
        eqa_core::metrics::geodesic_distance(&self.inner, a, b).map_err(to_py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Scene(rooms={}, questions={}, free_area_m2={})",
            self.inner.rooms.len(),
            self.inner.questions.len(),
            self.inner.room_size_m2
        )
    }
}

/// The full record of one exploration episode.
#[pyclass(name = "EpisodeLog")]
struct PyEpisodeLog {
    inner: explorer::EpisodeLog,
}

#[pymethods]
impl PyEpisodeLog {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let inner = explorer::EpisodeLog::from_json(text).map_err(to_py_err)?;
        Ok(PyEpisodeLog { inner })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    /// Serialization with timings zeroed, for determinism comparisons.
    fn canonical_json(&self) -> String {
        self.inner.canonical_json()
    }

    #[getter]
    fn question_id(&self) -> String {
        self.inner.question_id.clone()
    }

    #[getter]
    fn answer(&self) -> String {
        self.inner.answer.clone()
    }

    #[getter]
    fn correct(&self) -> bool {
        self.inner.correct
    }

    #[getter]
    fn steps_taken(&self) -> u32 {
        self.inner.steps_taken
    }

    #[getter]
    fn traveled_m(&self) -> f64 {
        self.inner.traveled_m
    }

    #[getter]
    fn stop_rationale(&self) -> String {
        self.inner.stop_rationale.clone()
    }

    #[getter]
    fn first_relevant_entry_step(&self) -> Option<u32> {
        self.inner.first_relevant_entry_step
    }

    #[getter]
    fn degradations(&self) -> Vec<String> {
        self.inner.degradations.clone()
    }

    /// (label, room, retained snapshot count) per target.
    fn memory_summary(&self) -> Vec<(String, String, usize)> {
        self.inner
            .memory
            .targets()
            .iter()
            .map(|t| {
                let n = self.inner.memory.retrieve(t).map(|e| e.len()).unwrap_or(0);
                (t.0.clone(), t.1.clone(), n)
            })
            .collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "EpisodeLog(question={}, answer={:?}, correct={}, steps={})",
            self.inner.question_id, self.inner.answer, self.inner.correct, self.inner.steps_taken
        )
    }
}

/// Run one episode with the deterministic oracle scorer.
#[pyfunction]
#[pyo3(signature = (scene, question_id, k=None, lambda_=None, fbe_only=None, stop_threshold=None))]
fn run_episode(
    scene: &PyScene,
    question_id: &str,
    k: Option<usize>,
    lambda_: Option<f64>,
    fbe_only: Option<bool>,
    stop_threshold: Option<f64>,
) -> PyResult<PyEpisodeLog> {
    let mut config = ExplorerConfig::default();
    if let Some(k) = k {
        config.k = k;
    }
    if let Some(l) = lambda_ {
        config.lambda = l;
    }
    if let Some(f) = fbe_only {
        config.fbe_only = f;
    }
    if let Some(s) = stop_threshold {
        config.stop_threshold = s;
    }
    let inner = explorer::run_episode(
        &scene.inner,
        "py",
        question_id,
        &config,
        &ScorerBinding::oracle(),
    )
    .map_err(to_py_err)?;
    Ok(PyEpisodeLog { inner })
}

/// Aggregate metrics over episode logs, as a JSON string.
#[pyfunction]
fn metrics_report(logs: Vec<PyRef<PyEpisodeLog>>) -> PyResult<String> {
    let inner: Vec<explorer::EpisodeLog> = logs.iter().map(|l| l.inner.clone()).collect();
    let report = aggregate(&inner).map_err(to_py_err)?;
    serde_json::to_string_pretty(&report).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Deterministic textual form of a generated scene without building it.
#[pyfunction]
fn generate_scene_text(seed: u64) -> PyResult<String> {
    let doc = generate_doc(seed, &GenConfig::default()).map_err(to_py_err)?;
    doc_to_ron(&doc).map_err(to_py_err)
}

#[pymodule]
fn eqa_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScene>()?;
    m.add_class::<PyEpisodeLog>()?;
    m.add_function(wrap_pyfunction!(run_episode, m)?)?;
    m.add_function(wrap_pyfunction!(metrics_report, m)?)?;
    m.add_function(wrap_pyfunction!(generate_scene_text, m)?)?;
    Ok(())
}
