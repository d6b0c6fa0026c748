use std::collections::{BTreeMap, HashMap};
use std::path::PathBuf;

use kgrefine::config::RunConfig;
use kgrefine::embed::{read_checkpoint, train, write_checkpoint, TrainingSet};
use kgrefine::eval::EvalReport;
use kgrefine::kg::{load_kg, split_kg, write_kg, EntityId, LabelId, LoadOptions, Triple};
use kgrefine::pipeline::{feedback_thresholds as thresholds, FeedbackConfig, PredictionPartition};
use kgrefine::psl::infer as psl_infer;
use kgrefine::synth::generate;
use pyo3::create_exception;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;

create_exception!(pykgrefine, KgRefineError, PyValueError);

fn err(e: kgrefine::Error) -> PyErr {
    match e {
        kgrefine::Error::Io { .. } => PyOSError::new_err(e.to_string()),
        _ => KgRefineError::new_err(e.to_string()),
    }
}

fn run_config(config: Option<&str>, seed: Option<u64>) -> PyResult<RunConfig> {
    let mut c = match config {
        Some(text) => RunConfig::from_toml(text).map_err(err)?,
        None => RunConfig::default(),
    };
    if seed.is_some() {
        c.seed = seed;
    }
    c.propagate_seed();
    c.validate().map_err(err)?;
    Ok(c)
}

fn json_to_python(py: Python<'_>, text: serde_json::Result<String>) -> PyResult<Py<PyAny>> {
    let text = text.map_err(|e| KgRefineError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

type NamedTriple = (String, String, String);

/// A candidate knowledge graph with optional gold labels.
#[pyclass(name = "KnowledgeGraph", module = "pykgrefine")]
pub struct PyKnowledgeGraph {
    inner: kgrefine::kg::KnowledgeGraph,
}

impl PyKnowledgeGraph {
    fn names(&self, t: &Triple) -> NamedTriple {
        let v = &self.inner.vocab;
        (
            v.entity_name(t.subject).to_owned(),
            v.relation_name(t.relation).to_owned(),
            v.entity_name(t.object).to_owned(),
        )
    }
}

#[pymethods]
impl PyKnowledgeGraph {
    /// Reads a graph directory (triples.tsv, labels.tsv, truth.tsv,
    /// noise.tsv, ontology/).
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = load_kg(&LoadOptions::from_dir(&path)).map_err(err)?;
        inner.validate().map_err(err)?;
        Ok(PyKnowledgeGraph { inner })
    }

    /// Generates a noisy synthetic graph from the `[synth]` section of
    /// `config`.
    #[staticmethod]
    #[pyo3(signature = (config=None, seed=None))]
    fn synthetic(py: Python<'_>, config: Option<&str>, seed: Option<u64>) -> PyResult<Self> {
        let c = run_config(config, seed)?;
        let kg = py.detach(|| generate(&c.synth)).map_err(err)?.kg;
        Ok(PyKnowledgeGraph { inner: kg })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_kg(&self.inner, &path).map_err(err)
    }

    #[getter]
    fn num_facts(&self) -> usize {
        self.inner.num_facts()
    }

    #[getter]
    fn num_entities(&self) -> usize {
        self.inner.num_entities()
    }

    #[getter]
    fn num_relations(&self) -> usize {
        self.inner.num_relations()
    }

    #[getter]
    fn num_labels(&self) -> usize {
        self.inner.num_labels()
    }

    /// `(subject, relation, object, confidence)` per candidate fact, with
    /// the highest confidence across sources.
    fn facts(&self) -> Vec<(String, String, String, f64)> {
        self.inner
            .facts()
            .iter()
            .map(|f| {
                let (s, r, o) = self.names(&f.triple);
                (s, r, o, f.max_confidence())
            })
            .collect()
    }

    /// Gold label per fact, or `None` without truth.
    fn truth(&self) -> Option<HashMap<NamedTriple, bool>> {
        self.inner
            .truth()
            .map(|t| t.iter().map(|(k, v)| (self.names(k), *v)).collect())
    }

    fn __len__(&self) -> usize {
        self.inner.num_facts()
    }

    fn __repr__(&self) -> String {
        format!(
            "KnowledgeGraph(facts={}, entities={}, relations={}, labels={})",
            self.inner.num_facts(),
            self.inner.num_entities(),
            self.inner.num_relations(),
            self.inner.num_labels()
        )
    }
}

/// A trained triple scorer.
#[pyclass(name = "EmbeddingModel", module = "pykgrefine")]
pub struct PyEmbeddingModel {
    inner: kgrefine::embed::EmbeddingModel,
}

#[pymethods]
impl PyEmbeddingModel {
    /// Trains on every candidate fact of `kg` with the `[model]` section of
    /// `config`. Typed modes use each entity's most confident label.
    #[staticmethod]
    #[pyo3(signature = (kg, config=None, seed=None))]
    fn train(
        py: Python<'_>,
        kg: &PyKnowledgeGraph,
        config: Option<&str>,
        seed: Option<u64>,
    ) -> PyResult<Self> {
        let c = run_config(config, seed)?;
        let g = &kg.inner;
        let mut best: BTreeMap<EntityId, (LabelId, f64)> = BTreeMap::new();
        for l in g.labels() {
            let conf = l.confidences.iter().map(|c| c.value).fold(0.0, f64::max);
            let entry = best.entry(l.entity).or_insert((l.label, conf));
            if conf > entry.1 {
                *entry = (l.label, conf);
            }
        }
        let types: BTreeMap<EntityId, LabelId> =
            best.into_iter().map(|(e, (l, _))| (e, l)).collect();
        let (model, _) = py
            .detach(|| train(&TrainingSet::from_kg(g)?, &types, &c.model))
            .map_err(err)?;
        Ok(PyEmbeddingModel { inner: model })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyEmbeddingModel {
            inner: read_checkpoint(&path).map_err(err)?,
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        write_checkpoint(&self.inner, &path).map_err(err)
    }

    /// Probability that each `(subject, relation, object)` is correct.
    fn predict(&self, triples: Vec<NamedTriple>) -> PyResult<Vec<f64>> {
        let m = &self.inner;
        let find = |names: &[String], name: &str, what: &str| {
            names
                .iter()
                .position(|n| n == name)
                .map(|i| i as u32)
                .ok_or_else(|| KgRefineError::new_err(format!("unknown {what} {name:?}")))
        };
        let ids = triples
            .iter()
            .map(|(s, r, o)| {
                Ok(Triple::new(
                    EntityId(find(&m.entities, s, "entity")?),
                    kgrefine::kg::RelationId(find(&m.relations, r, "relation")?),
                    EntityId(find(&m.entities, o, "entity")?),
                ))
            })
            .collect::<PyResult<Vec<_>>>()?;
        m.predict(&ids).map_err(err)
    }

    #[getter]
    fn num_parameters(&self) -> usize {
        self.inner.num_parameters()
    }

    fn __repr__(&self) -> String {
        let c = &self.inner.config;
        format!(
            "EmbeddingModel(base={:?}, mode={:?}, dim={}, entities={})",
            c.base,
            c.mode,
            c.dim,
            self.inner.entities.len()
        )
    }
}

/// One round of soft-logic inference; returns scores of relation atoms.
#[pyfunction]
#[pyo3(signature = (kg, config=None))]
fn infer(
    py: Python<'_>,
    kg: &PyKnowledgeGraph,
    config: Option<&str>,
) -> PyResult<HashMap<NamedTriple, f64>> {
    let c = run_config(config, None)?;
    let result = py
        .detach(|| psl_infer(&kg.inner, &c.psl, None, &c.solver))
        .map_err(err)?;
    Ok(result
        .rel_scores
        .iter()
        .map(|(t, s)| (kg.names(t), *s))
        .collect())
}

/// Runs the refinement loop on a graph with gold labels and returns the
/// per-iteration reports as dictionaries.
#[pyfunction]
#[pyo3(signature = (kg, config=None, seed=None))]
fn iterate(
    py: Python<'_>,
    kg: &PyKnowledgeGraph,
    config: Option<&str>,
    seed: Option<u64>,
) -> PyResult<Py<PyAny>> {
    let c = run_config(config, seed)?;
    if kg.inner.truth().is_none() {
        return Err(KgRefineError::new_err("iterate needs gold labels"));
    }
    let run = py
        .detach(|| {
            let (_, valid, test) = split_kg(&kg.inner, &c.split)?;
            kgrefine::pipeline::iterefine(&kg.inner, &c.refine(), &valid, &test)
        })
        .map_err(err)?;
    json_to_python(py, serde_json::to_string(&run.reports))
}

/// `(pos_f1, neg_f1, wf1)` of kept/rejected decisions against gold labels.
#[pyfunction]
fn weighted_f1(predictions: Vec<bool>, gold: Vec<bool>) -> PyResult<(f64, f64, f64)> {
    if predictions.len() != gold.len() {
        return Err(KgRefineError::new_err(format!(
            "{} predictions for {} gold labels",
            predictions.len(),
            gold.len()
        )));
    }
    let (mut tp, mut fp, mut tn, mut fn_) = (0, 0, 0, 0);
    for (p, g) in predictions.iter().zip(&gold) {
        match (p, g) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, false) => tn += 1,
            (false, true) => fn_ += 1,
        }
    }
    let r = EvalReport::from_counts(tp, fp, tn, fn_).map_err(err)?;
    Ok((r.pos_f1, r.neg_f1, r.wf1))
}

/// `(t2, t3)` from the classification threshold and partition means.
#[pyfunction]
#[pyo3(signature = (t1, mean_p, mean_n, phi1=0.5, phi2=0.75))]
fn feedback_thresholds(t1: f64, mean_p: f64, mean_n: f64, phi1: f64, phi2: f64) -> (f64, f64) {
    let partition = PredictionPartition {
        t1,
        mean_p,
        mean_n,
        ..Default::default()
    };
    let config = FeedbackConfig {
        phi1,
        phi2,
        ..Default::default()
    };
    thresholds(&partition, &config)
}

#[pymodule]
fn pykgrefine(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("KgRefineError", m.py().get_type::<KgRefineError>())?;
    m.add_class::<PyKnowledgeGraph>()?;
    m.add_class::<PyEmbeddingModel>()?;
    m.add_function(wrap_pyfunction!(infer, m)?)?;
    m.add_function(wrap_pyfunction!(iterate, m)?)?;
    m.add_function(wrap_pyfunction!(weighted_f1, m)?)?;
    m.add_function(wrap_pyfunction!(feedback_thresholds, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}
