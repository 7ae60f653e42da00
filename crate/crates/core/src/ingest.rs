//! Dataset ingest: tab-separated triple files (`head\trelation\ttail`) and
//! hypergraph files (`relation\te1\te2[\te3...]`).

use std::fs::File;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, Tuple};
use crate::vocab::Vocabulary;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DatasetKind {
    Triples,
    Hypergraph,
}

/// Reads every line of `reader`, handing `(line number, line)` for non-blank
/// lines to `f`. Trailing whitespace and `\r` are stripped.
fn for_each_line<R: Read>(
    reader: R,
    path: &Path,
    mut f: impl FnMut(usize, &str) -> Result<()>,
) -> Result<()> {
    let reader = BufReader::new(reader);
    for (idx, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        f(idx + 1, line)?;
    }
    Ok(())
}

fn check_fields(fields: &[&str], path: &Path, line: usize) -> Result<()> {
    if fields.iter().any(|f| f.is_empty()) {
        return Err(Error::parse(path, line, "empty field"));
    }
    Ok(())
}

pub fn parse_triples_from<R: Read>(reader: R, path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Tuple>> {
    let mut out = Vec::new();
    for_each_line(reader, path, |line, text| {
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() != 3 {
            return Err(Error::parse(
                path,
                line,
                format!("expected 3 tab-separated fields, found {}", fields.len()),
            ));
        }
        check_fields(&fields, path, line)?;
        let head = vocab.intern_entity(fields[0]);
        let relation = vocab.intern_relation(fields[1]);
        let tail = vocab.intern_entity(fields[2]);
        out.push(Tuple::new(relation, vec![head, tail]));
        Ok(())
    })?;
    Ok(out)
}

pub fn parse_hypergraph_from<R: Read>(reader: R, path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Tuple>> {
    let mut out = Vec::new();
    for_each_line(reader, path, |line, text| {
        let fields: Vec<&str> = text.split('\t').collect();
        if fields.len() < 3 {
            return Err(Error::parse(
                path,
                line,
                format!("tuple arity {} is below the minimum of 2", fields.len() - 1),
            ));
        }
        check_fields(&fields, path, line)?;
        let relation = vocab.intern_relation(fields[0]);
        let entities: Vec<EntityId> = fields[1..].iter().map(|s| vocab.intern_entity(s)).collect();
        out.push(Tuple::new(relation, entities));
        Ok(())
    })?;
    Ok(out)
}

fn open(path: &Path) -> Result<File> {
    File::open(path).map_err(|e| Error::io(path, e))
}

pub fn parse_triples(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Tuple>> {
    parse_triples_from(open(path)?, path, vocab)
}

pub fn parse_hypergraph(path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Tuple>> {
    parse_hypergraph_from(open(path)?, path, vocab)
}

pub fn parse_file(kind: DatasetKind, path: &Path, vocab: &mut Vocabulary) -> Result<Vec<Tuple>> {
    match kind {
        DatasetKind::Triples => parse_triples(path, vocab),
        DatasetKind::Hypergraph => parse_hypergraph(path, vocab),
    }
}

/// Re-emits tuples in their surface format.
pub fn write_surface<W: Write>(kind: DatasetKind, tuples: &[Tuple], vocab: &Vocabulary, mut w: W) -> std::io::Result<()> {
    for t in tuples {
        let rel = vocab.relation_surface(t.relation).unwrap_or("?");
        let ent = |e: &EntityId| vocab.entity_surface(*e).unwrap_or("?");
        match kind {
            DatasetKind::Triples => {
                debug_assert_eq!(t.arity(), 2);
                writeln!(w, "{}\t{}\t{}", ent(&t.entities[0]), rel, ent(&t.entities[1]))?;
            }
            DatasetKind::Hypergraph => {
                write!(w, "{rel}")?;
                for e in &t.entities {
                    write!(w, "\t{}", ent(e))?;
                }
                writeln!(w)?;
            }
        }
    }
    Ok(())
}

/// Writes tuples as integer ids: `relation\te1\te2...`.
pub fn write_normalized<W: Write>(tuples: &[Tuple], mut w: W) -> std::io::Result<()> {
    for t in tuples {
        write!(w, "{}", t.relation.0)?;
        for e in &t.entities {
            write!(w, "\t{}", e.0)?;
        }
        writeln!(w)?;
    }
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetPaths {
    pub train: PathBuf,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
}

impl DatasetPaths {
    /// `train.txt`, plus `valid.txt` and `test.txt` when present.
    pub fn from_dir(dir: &Path) -> Result<Self> {
        let train = dir.join("train.txt");
        if !train.is_file() {
            return Err(Error::io(
                &train,
                std::io::Error::new(std::io::ErrorKind::NotFound, "training split not found"),
            ));
        }
        let opt = |name: &str| {
            let p = dir.join(name);
            p.is_file().then_some(p)
        };
        Ok(DatasetPaths {
            train,
            valid: opt("valid.txt"),
            test: opt("test.txt"),
        })
    }
}

#[derive(Debug, Clone)]
pub struct Dataset {
    pub kind: DatasetKind,
    pub vocab: Vocabulary,
    pub train: Vec<Tuple>,
    pub valid: Vec<Tuple>,
    pub test: Vec<Tuple>,
}

impl Dataset {
    /// Ingests train, valid, test in that order. Ids cover all splits.
    pub fn load(paths: &DatasetPaths, kind: DatasetKind) -> Result<Self> {
        Self::load_with_vocab(paths, kind, Vocabulary::new())
    }

    pub fn load_with_vocab(paths: &DatasetPaths, kind: DatasetKind, mut vocab: Vocabulary) -> Result<Self> {
        let train = parse_file(kind, &paths.train, &mut vocab)?;
        let mut split = |p: &Option<PathBuf>| match p {
            Some(p) => parse_file(kind, p, &mut vocab),
            None => Ok(Vec::new()),
        };
        let valid = split(&paths.valid)?;
        let test = split(&paths.test)?;
        Ok(Dataset {
            kind,
            vocab,
            train,
            valid,
            test,
        })
    }

    /// Index over the training split only.
    pub fn train_graph(&self) -> Result<KnowledgeGraph> {
        KnowledgeGraph::build(self.vocab.num_entities(), self.vocab.num_relations(), self.train.clone())
    }

    pub fn stats(&self) -> DatasetStats {
        let entities = self.vocab.num_entities();
        let arity_sum: usize = self.train.iter().map(Tuple::arity).sum();
        let max_arity = self
            .train
            .iter()
            .chain(&self.valid)
            .chain(&self.test)
            .map(Tuple::arity)
            .max()
            .unwrap_or(2);
        let per = |x: usize| if entities == 0 { 0.0 } else { x as f64 / entities as f64 };
        DatasetStats {
            entities,
            relations: self.vocab.num_relations(),
            train: self.train.len(),
            valid: self.valid.len(),
            test: self.test.len(),
            train_tuples_per_entity: per(self.train.len()),
            train_avg_degree: per(arity_sum),
            max_arity,
        }
    }
}

/// Counts for validating an ingest. The two density figures are labeled by
/// what they compute; neither claims to match any published density column.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetStats {
    pub entities: usize,
    pub relations: usize,
    pub train: usize,
    pub valid: usize,
    pub test: usize,
    /// `#train / |E|`.
    pub train_tuples_per_entity: f64,
    /// Entity slots in train tuples per entity, `Σ arity / |E|`.
    pub train_avg_degree: f64,
    pub max_arity: usize,
}
