//! Graph-structural pretraining corpora for knowledge graphs and knowledge
//! hypergraphs.
//!
//! Five tasks are derived from a training split without any external data:
//! relational shortest paths (SP), entropy-guided information-gain paths (IP),
//! k-hop neighbor occurrence prediction (KHN), invariant adjacency
//! classification (IVA) and local clustering coefficient regression (LCC).
//! [`corpus`] turns their outputs into tokenized records and mixes them.

pub mod adjacency;
pub mod cli;
pub mod corpus;
pub mod entropy;
pub mod error;
pub mod graph;
pub mod ingest;
pub mod neighborhood;
pub mod paths;
pub mod vocab;

pub use adjacency::{flatten_adjacency, make_iva_example, relationless_adjacency, AdjacencyMatrix, IvaExample};
pub use corpus::{generate_task_records, mix_multitask, read_corpus, write_corpus, GenerationConfig, MixPlan, TaskKind, TaskRecord};
pub use entropy::{conditional_entropy, path_information_gain, relation_entropy};
pub use error::{Error, Result};
pub use graph::{EntityId, KnowledgeGraph, Query, RelationId, Split, Tuple, TupleId};
pub use ingest::{Dataset, DatasetKind, DatasetPaths, DatasetStats};
pub use neighborhood::{khop_entities, local_clustering_coefficient, occurrence_distribution, DegreeMode};
pub use paths::{ground_paths, information_gain_paths, shortest_relational_paths, PathSearchConfig, RelationalPath};
pub use vocab::Vocabulary;
