//! Python bindings: the incidence index, path search, neighborhoods,
//! adjacency helpers and dataset / corpus generation.

use std::path::PathBuf;

use kgpretrain::adjacency::{self, FlatToken, IvaConfig};
use kgpretrain::corpus::{build_queries, generate_task_records};
use kgpretrain::entropy;
use kgpretrain::neighborhood;
use kgpretrain::{
    paths, AdjacencyMatrix, Dataset, DatasetKind, DatasetPaths, DegreeMode, EntityId, Error, GenerationConfig,
    KnowledgeGraph, PathSearchConfig, RelationId, RelationalPath, Split, TaskKind, Tuple, TupleId,
};
use pyo3::exceptions::{PyIOError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn err(e: Error) -> PyErr {
    match e {
        Error::Io { .. } => PyIOError::new_err(e.to_string()),
        Error::Invariant(_) | Error::EmptyCorpus => PyRuntimeError::new_err(e.to_string()),
        _ => PyValueError::new_err(e.to_string()),
    }
}

fn degree_mode(name: &str) -> PyResult<DegreeMode> {
    match name {
        "weighted" => Ok(DegreeMode::Weighted),
        "simple" => Ok(DegreeMode::Simple),
        _ => Err(PyValueError::new_err(format!("degree mode must be 'weighted' or 'simple', got {name:?}"))),
    }
}

fn dataset_kind(name: &str) -> PyResult<DatasetKind> {
    match name {
        "triples" => Ok(DatasetKind::Triples),
        "hypergraph" => Ok(DatasetKind::Hypergraph),
        _ => Err(PyValueError::new_err(format!("kind must be 'triples' or 'hypergraph', got {name:?}"))),
    }
}

fn rel_ids(path: &RelationalPath) -> Vec<u32> {
    path.relations().iter().map(|r| r.0).collect()
}

fn ent_ids(es: &[EntityId]) -> Vec<u32> {
    es.iter().map(|e| e.0).collect()
}

fn rows(m: &AdjacencyMatrix) -> Vec<Vec<u32>> {
    (0..m.size()).map(|i| (0..m.size()).map(|j| m.get(i, j)).collect()).collect()
}

/// Incidence index over a list of `(relation, [entities...])` tuples.
#[pyclass(name = "Graph", frozen)]
struct PyGraph {
    inner: KnowledgeGraph,
}

#[pymethods]
impl PyGraph {
    #[new]
    fn new(num_entities: usize, num_relations: usize, tuples: Vec<(u32, Vec<u32>)>) -> PyResult<Self> {
        let tuples = tuples
            .into_iter()
            .map(|(r, es)| Tuple::new(RelationId(r), es.into_iter().map(EntityId).collect()))
            .collect();
        let inner = KnowledgeGraph::build(num_entities, num_relations, tuples).map_err(err)?;
        Ok(PyGraph { inner })
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
    fn num_tuples(&self) -> usize {
        self.inner.num_tuples()
    }

    fn entities_of_relation(&self, r: u32) -> PyResult<Vec<u32>> {
        Ok(ent_ids(self.inner.entities_of_relation(RelationId(r)).map_err(err)?))
    }

    fn relations_of_entity(&self, e: u32) -> PyResult<Vec<u32>> {
        Ok(self.inner.relations_of_entity(EntityId(e)).map_err(err)?.iter().map(|r| r.0).collect())
    }

    fn neighbors(&self, e: u32) -> PyResult<Vec<u32>> {
        Ok(ent_ids(self.inner.neighbors(EntityId(e)).map_err(err)?))
    }

    #[pyo3(signature = (r, exclude = Vec::new()))]
    fn incident_relations(&self, r: u32, exclude: Vec<u32>) -> PyResult<Vec<u32>> {
        let exclude: Vec<RelationId> = exclude.into_iter().map(RelationId).collect();
        let rels = self.inner.incident_relations(RelationId(r), &exclude).map_err(err)?;
        Ok(rels.iter().map(|r| r.0).collect())
    }

    fn relation_entropy(&self, r: u32) -> PyResult<f64> {
        entropy::relation_entropy(&self.inner, RelationId(r)).map_err(err)
    }

    /// `H(prev | next)`.
    fn conditional_entropy(&self, prev: u32, next: u32) -> PyResult<f64> {
        entropy::conditional_entropy(&self.inner, RelationId(prev), RelationId(next)).map_err(err)
    }

    fn information_gain(&self, path: Vec<u32>) -> PyResult<f64> {
        let rels: Vec<RelationId> = path.into_iter().map(RelationId).collect();
        entropy::path_information_gain(&self.inner, &rels).map_err(err)
    }

    #[pyo3(signature = (source, target, max_hops = 4, sp_cap = 16, exclude = None))]
    fn shortest_paths(
        &self,
        source: u32,
        target: u32,
        max_hops: usize,
        sp_cap: usize,
        exclude: Option<u32>,
    ) -> PyResult<Vec<Vec<u32>>> {
        let cfg = PathSearchConfig {
            max_hops,
            sp_cap,
            ..PathSearchConfig::default()
        };
        let found = paths::shortest_relational_paths(&self.inner, EntityId(source), EntityId(target), &cfg, exclude.map(TupleId))
            .map_err(err)?;
        Ok(found.iter().map(rel_ids).collect())
    }

    #[pyo3(signature = (r, beam = 4, max_hops = 4))]
    fn information_gain_paths(&self, r: u32, beam: usize, max_hops: usize) -> PyResult<Vec<Vec<u32>>> {
        let cfg = PathSearchConfig {
            beam,
            max_hops,
            ..PathSearchConfig::default()
        };
        let found = paths::information_gain_paths(&self.inner, RelationId(r), &cfg).map_err(err)?;
        Ok(found.iter().map(rel_ids).collect())
    }

    /// Keeps the candidate relation sequences that a tuple walk from
    /// `source` to `target` can follow.
    #[pyo3(signature = (source, target, candidates, exclude = None))]
    fn ground_paths(&self, source: u32, target: u32, candidates: Vec<Vec<u32>>, exclude: Option<u32>) -> PyResult<Vec<Vec<u32>>> {
        let cands = candidates
            .into_iter()
            .map(|c| {
                RelationalPath::new(c.into_iter().map(RelationId).collect())
                    .ok_or_else(|| PyValueError::new_err("candidate paths must be non-empty and repeat-free"))
            })
            .collect::<PyResult<Vec<_>>>()?;
        let found = paths::ground_paths(&self.inner, EntityId(source), EntityId(target), &cands, exclude.map(TupleId))
            .map_err(err)?;
        Ok(found.iter().map(rel_ids).collect())
    }

    fn khop(&self, center: u32, hops: usize) -> PyResult<Vec<u32>> {
        Ok(ent_ids(&neighborhood::khop_entities(&self.inner, EntityId(center), hops).map_err(err)?.entities))
    }

    #[pyo3(signature = (center, hops, mode = "weighted"))]
    fn occurrence(&self, center: u32, hops: usize, mode: &str) -> PyResult<Vec<(u32, f64)>> {
        let dist = neighborhood::occurrence_distribution(&self.inner, EntityId(center), hops, degree_mode(mode)?).map_err(err)?;
        Ok(dist.entries.iter().map(|(e, p)| (e.0, *p)).collect())
    }

    #[pyo3(signature = (center, hops = 1, mode = "simple"))]
    fn lcc(&self, center: u32, hops: usize, mode: &str) -> PyResult<f64> {
        neighborhood::local_clustering_coefficient(&self.inner, EntityId(center), hops, degree_mode(mode)?).map_err(err)
    }

    fn adjacency(&self, entities: Vec<u32>) -> PyResult<Vec<Vec<u32>>> {
        let es: Vec<EntityId> = entities.into_iter().map(EntityId).collect();
        Ok(rows(&adjacency::relationless_adjacency(&self.inner, &es).map_err(err)?))
    }

    /// One IVA example as a dict, or `None` for an isolated center.
    #[pyo3(signature = (center, seed, negative, hops = 1, max_entities = 30, corruption_rate = 0.1))]
    fn iva_example<'py>(
        &self,
        py: Python<'py>,
        center: u32,
        seed: u64,
        negative: bool,
        hops: usize,
        max_entities: usize,
        corruption_rate: f64,
    ) -> PyResult<Option<Bound<'py, PyDict>>> {
        let cfg = IvaConfig {
            hops,
            max_entities,
            corruption_rate,
        };
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let Some(ex) = adjacency::make_iva_example(&self.inner, EntityId(center), &cfg, &mut rng, negative).map_err(err)? else {
            return Ok(None);
        };
        let d = PyDict::new(py);
        d.set_item("label", ex.label)?;
        d.set_item("left_entities", ent_ids(&ex.left.entities))?;
        d.set_item("left", rows(&ex.left))?;
        d.set_item("right_entities", ent_ids(&ex.right.entities))?;
        d.set_item("right", rows(&ex.right))?;
        Ok(Some(d))
    }

    fn __repr__(&self) -> String {
        format!(
            "Graph(entities={}, relations={}, tuples={})",
            self.inner.num_entities(),
            self.inner.num_relations(),
            self.inner.num_tuples()
        )
    }
}

/// Entity ids followed by the upper triangle of `rows`, diagonal included.
#[pyfunction]
fn flatten_adjacency(entities: Vec<u32>, rows: Vec<Vec<u32>>) -> PyResult<(Vec<u32>, Vec<u32>)> {
    let n = entities.len();
    if rows.len() != n || rows.iter().any(|r| r.len() != n) {
        return Err(PyValueError::new_err("rows must form an n × n matrix over the entities"));
    }
    let refs: Vec<&[u32]> = rows.iter().map(Vec::as_slice).collect();
    let m = AdjacencyMatrix::from_rows(entities.into_iter().map(EntityId).collect(), &refs);
    let (mut es, mut vs) = (Vec::new(), Vec::new());
    for t in adjacency::flatten_adjacency(&m) {
        match t {
            FlatToken::Entity(e) => es.push(e.0),
            FlatToken::Value(v) => vs.push(v),
        }
    }
    Ok((es, vs))
}

#[pyclass(name = "Dataset", frozen)]
struct PyDataset {
    inner: Dataset,
}

#[pymethods]
impl PyDataset {
    /// Loads `train.txt` and, when present, `valid.txt` / `test.txt`.
    #[staticmethod]
    #[pyo3(signature = (directory, kind = "triples"))]
    fn load(directory: PathBuf, kind: &str) -> PyResult<Self> {
        let paths = DatasetPaths::from_dir(&directory).map_err(err)?;
        let inner = Dataset::load(&paths, dataset_kind(kind)?).map_err(err)?;
        Ok(PyDataset { inner })
    }

    fn stats<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = self.inner.stats();
        let d = PyDict::new(py);
        d.set_item("entities", s.entities)?;
        d.set_item("relations", s.relations)?;
        d.set_item("train", s.train)?;
        d.set_item("valid", s.valid)?;
        d.set_item("test", s.test)?;
        d.set_item("max_arity", s.max_arity)?;
        Ok(d)
    }

    fn entity_id(&self, surface: &str) -> Option<u32> {
        self.inner.vocab.entity(surface).map(|e| e.0)
    }

    fn relation_id(&self, surface: &str) -> Option<u32> {
        self.inner.vocab.relation(surface).map(|r| r.0)
    }

    /// Index over the training split.
    fn graph(&self) -> PyResult<PyGraph> {
        Ok(PyGraph {
            inner: self.inner.train_graph().map_err(err)?,
        })
    }

    /// Records of one task as JSON lines. `config` takes the TOML-file keys.
    #[pyo3(signature = (task, seed, **config))]
    fn generate(&self, py: Python<'_>, task: &str, seed: u64, config: Option<&Bound<'_, PyDict>>) -> PyResult<Vec<String>> {
        let task = TaskKind::parse(task).ok_or_else(|| PyValueError::new_err(format!("unknown task {task:?}")))?;
        let mut cfg_json = serde_json::to_value(GenerationConfig::default()).expect("config serializes");
        if let Some(kw) = config {
            for (k, v) in kw.iter() {
                let key: String = k.extract()?;
                let json: String = py.import("json")?.call_method1("dumps", (v,))?.extract()?;
                let value: serde_json::Value = serde_json::from_str(&json).map_err(|e| PyValueError::new_err(e.to_string()))?;
                cfg_json[key.as_str()] = value;
            }
        }
        cfg_json["seed"] = seed.into();
        let cfg: GenerationConfig = serde_json::from_value(cfg_json).map_err(|e| PyValueError::new_err(e.to_string()))?;
        let g = self.inner.train_graph().map_err(err)?;
        let queries = build_queries(&self.inner.train, Split::Train);
        let vocab = &self.inner.vocab;
        let out = py
            .detach(|| generate_task_records(&g, vocab, task, &queries, &cfg))
            .map_err(err)?;
        Ok(out
            .records
            .iter()
            .map(|r| serde_json::to_string(r).expect("records serialize"))
            .collect())
    }
}

/// Runs the command line with `args` (program name excluded) and returns its
/// exit code.
#[pyfunction]
fn run_cli(py: Python<'_>, args: Vec<String>) -> i32 {
    let argv: Vec<String> = std::iter::once("kgpretrain".to_owned()).chain(args).collect();
    py.detach(|| kgpretrain::cli::run_command(argv))
}

#[pymodule]
fn kgpretrain_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGraph>()?;
    m.add_class::<PyDataset>()?;
    m.add_function(wrap_pyfunction!(flatten_adjacency, m)?)?;
    m.add_function(wrap_pyfunction!(run_cli, m)?)?;
    Ok(())
}
