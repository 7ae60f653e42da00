//! Task records, per-task generation, multitask mixing and the line-delimited
//! corpus format.
//!
//! A corpus file is UTF-8 JSON lines: one header object, then one record per
//! line. Record order is `(provenance id, sub index)` for single-task corpora
//! and the seeded mixing order for the multitask corpus.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::adjacency::{make_iva_example, FlatToken, IvaConfig};
use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph, Query, Split, Tuple, TupleId};
use crate::neighborhood::{clustering_from_ball, khop_balls, occurrence_from_ball, DegreeMode};
use crate::paths::{ground_paths, information_gain_paths, shortest_relational_paths, PathSearchConfig, RelationalPath};
use crate::vocab::{Special, TokenId, Vocabulary};

pub const FORMAT_NAME: &str = "kgpretrain-corpus";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum TaskKind {
    #[serde(rename = "SP")]
    Sp,
    #[serde(rename = "IP")]
    Ip,
    #[serde(rename = "KHN")]
    Khn,
    #[serde(rename = "IVA")]
    Iva,
    #[serde(rename = "LCC")]
    Lcc,
}

impl TaskKind {
    pub const ALL: [TaskKind; 5] = [TaskKind::Sp, TaskKind::Ip, TaskKind::Khn, TaskKind::Iva, TaskKind::Lcc];

    pub fn token(self) -> TokenId {
        match self {
            TaskKind::Sp => Special::Sp,
            TaskKind::Ip => Special::Ip,
            TaskKind::Khn => Special::Khn,
            TaskKind::Iva => Special::Iva,
            TaskKind::Lcc => Special::Lcc,
        }
        .token()
    }

    pub fn name(self) -> &'static str {
        match self {
            TaskKind::Sp => "sp",
            TaskKind::Ip => "ip",
            TaskKind::Khn => "khn",
            TaskKind::Iva => "iva",
            TaskKind::Lcc => "lcc",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        TaskKind::ALL.into_iter().find(|t| t.name().eq_ignore_ascii_case(s))
    }

    /// Default corpus file name inside an output directory.
    pub fn file_name(self) -> String {
        format!("{}.jsonl", self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum Target {
    /// Relation tokens then `[EOS]`, or `[NO_PATH]` alone.
    Sequence { tokens: Vec<TokenId> },
    /// Probability per entity token.
    Distribution { entities: Vec<TokenId>, probs: Vec<f64> },
    Label { value: u8 },
    Scalar { value: f64 },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Provenance {
    /// Query index (SP, IP) or center entity id (KHN, IVA, LCC).
    pub id: u64,
    /// Path index, hop, or example index within `id`.
    pub sub: u32,
    pub seed: u64,
}

fn is_false(b: &bool) -> bool {
    !*b
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TaskRecord {
    pub task: TaskKind,
    pub input: Vec<TokenId>,
    pub target: Target,
    pub weight: f64,
    pub provenance: Provenance,
    /// Set when some adjacency count exceeded the value ceiling.
    #[serde(default, skip_serializing_if = "is_false")]
    pub clamped: bool,
}

/// Every knob that influences generated bytes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct GenerationConfig {
    /// Neighborhood radius for KHN and LCC.
    pub hops: usize,
    pub max_hops: usize,
    pub beam: usize,
    pub sp_cap: usize,
    pub iva_hops: usize,
    pub iva_cap: usize,
    pub corruption_rate: f64,
    pub max_input_len: usize,
    pub khn_degree: DegreeMode,
    pub lcc_degree: DegreeMode,
    pub seed: u64,
}

impl Default for GenerationConfig {
    fn default() -> Self {
        GenerationConfig {
            hops: 3,
            max_hops: 4,
            beam: 4,
            sp_cap: 16,
            iva_hops: 1,
            iva_cap: 30,
            corruption_rate: 0.10,
            max_input_len: 1024,
            khn_degree: DegreeMode::Weighted,
            lcc_degree: DegreeMode::Simple,
            seed: 0,
        }
    }
}

impl GenerationConfig {
    pub fn path_search(&self) -> PathSearchConfig {
        PathSearchConfig {
            beam: self.beam,
            max_hops: self.max_hops,
            sp_cap: self.sp_cap,
        }
    }

    pub fn iva(&self) -> IvaConfig {
        IvaConfig {
            hops: self.iva_hops,
            max_entities: self.iva_cap,
            corruption_rate: self.corruption_rate,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("hops", self.hops),
            ("max_hops", self.max_hops),
            ("beam", self.beam),
            ("sp_cap", self.sp_cap),
            ("iva_hops", self.iva_hops),
            ("iva_cap", self.iva_cap),
            ("max_input_len", self.max_input_len),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be positive")));
            }
        }
        if !(self.corruption_rate > 0.0 && self.corruption_rate <= 1.0) {
            return Err(Error::InvalidArgument("corruption_rate must lie in (0, 1]".into()));
        }
        if self.iva_cap < 2 {
            return Err(Error::InvalidArgument("iva_cap must be at least 2".into()));
        }
        Ok(())
    }

    pub fn digest(&self) -> String {
        hex::encode(Sha256::digest(serde_json::to_vec(self).expect("config serializes")))
    }
}

/// One query per maskable slot of every tuple, in tuple order.
pub fn build_queries(tuples: &[Tuple], split: Split) -> Vec<Query> {
    tuples
        .iter()
        .enumerate()
        .flat_map(|(i, t)| {
            (0..t.arity()).map(move |pos| {
                Query::mask(t, pos, split, Some(TupleId(i as u32))).expect("position within arity")
            })
        })
        .collect()
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct TaskOutput {
    pub records: Vec<TaskRecord>,
    /// Queries or centers that produced no record.
    pub skipped: u64,
}

/// Deterministic per-unit seed.
pub fn derive_seed(seed: u64, task: TaskKind, id: u64, sub: u64) -> u64 {
    let mut x = seed ^ (task as u64).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    for v in [id, sub] {
        x = splitmix64(x ^ v);
    }
    x
}

fn splitmix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

fn clip(mut input: Vec<TokenId>, max: usize) -> Vec<TokenId> {
    input.truncate(max);
    input
}

fn path_target(vocab: &Vocabulary, path: &RelationalPath) -> Target {
    let mut tokens: Vec<TokenId> = path.relations().iter().map(|&r| vocab.relation_token(r)).collect();
    tokens.push(Special::Eos.token());
    Target::Sequence { tokens }
}

fn no_path_target() -> Target {
    Target::Sequence {
        tokens: vec![Special::NoPath.token()],
    }
}

/// Records for one task. `g` must be the training-split index. Work is spread
/// over the current rayon pool; output order does not depend on it.
pub fn generate_task_records(
    g: &KnowledgeGraph,
    vocab: &Vocabulary,
    task: TaskKind,
    queries: &[Query],
    cfg: &GenerationConfig,
) -> Result<TaskOutput> {
    cfg.validate()?;
    let per_unit: Vec<Vec<TaskRecord>> = match task {
        TaskKind::Sp | TaskKind::Ip => path_records(g, vocab, task, queries, cfg)?,
        TaskKind::Khn | TaskKind::Lcc => neighborhood_records(g, vocab, task, cfg)?,
        TaskKind::Iva => iva_records(g, vocab, cfg)?,
    };
    let skipped = per_unit.iter().filter(|r| r.is_empty()).count() as u64;
    Ok(TaskOutput {
        records: per_unit.into_iter().flatten().collect(),
        skipped,
    })
}

fn path_records(
    g: &KnowledgeGraph,
    vocab: &Vocabulary,
    task: TaskKind,
    queries: &[Query],
    cfg: &GenerationConfig,
) -> Result<Vec<Vec<TaskRecord>>> {
    let search = cfg.path_search();
    // IP candidates depend only on the query relation
    let candidates: Vec<Vec<RelationalPath>> = if task == TaskKind::Ip {
        (0..g.num_relations() as u32)
            .into_par_iter()
            .map(|r| information_gain_paths(g, crate::graph::RelationId(r), &search))
            .collect::<Result<_>>()?
    } else {
        Vec::new()
    };

    queries
        .par_iter()
        .enumerate()
        .map(|(qi, q)| {
            let mut out = Vec::new();
            for (from, to) in q.endpoint_pairs() {
                let paths = match task {
                    TaskKind::Sp => shortest_relational_paths(g, from, to, &search, q.source)?,
                    _ => ground_paths(g, from, to, &candidates[q.relation.index()], q.source)?,
                };
                let input = clip(
                    vec![
                        task.token(),
                        vocab.entity_token(from),
                        vocab.relation_token(q.relation),
                        vocab.entity_token(to),
                    ],
                    cfg.max_input_len,
                );
                let targets: Vec<Target> = if paths.is_empty() {
                    vec![no_path_target()]
                } else {
                    paths.iter().map(|p| path_target(vocab, p)).collect()
                };
                for target in targets {
                    let sub = out.len() as u32;
                    out.push(TaskRecord {
                        task,
                        input: input.clone(),
                        target,
                        weight: 1.0,
                        provenance: Provenance {
                            id: qi as u64,
                            sub,
                            seed: cfg.seed,
                        },
                        clamped: false,
                    });
                }
            }
            Ok(out)
        })
        .collect()
}

fn neighborhood_records(
    g: &KnowledgeGraph,
    vocab: &Vocabulary,
    task: TaskKind,
    cfg: &GenerationConfig,
) -> Result<Vec<Vec<TaskRecord>>> {
    (0..g.num_entities() as u32)
        .into_par_iter()
        .map(|c| {
            let center = EntityId(c);
            let balls = khop_balls(g, center, cfg.hops)?;
            let mut out = Vec::new();
            if balls.first().is_none_or(|b| b.is_empty()) {
                return Ok(out);
            }
            let mut previous: &[EntityId] = &[];
            for (h, ball) in balls.iter().enumerate() {
                let mut input = vec![task.token(), vocab.entity_token(center), Special::Sep.token()];
                input.extend(previous.iter().map(|&e| vocab.entity_token(e)));
                let target = match task {
                    TaskKind::Khn => {
                        let dist = occurrence_from_ball(g, center, ball, cfg.khn_degree)?;
                        Target::Distribution {
                            entities: dist.entries.iter().map(|(e, _)| vocab.entity_token(*e)).collect(),
                            probs: dist.entries.iter().map(|(_, p)| *p).collect(),
                        }
                    }
                    _ => Target::Scalar {
                        value: clustering_from_ball(g, center, ball, cfg.lcc_degree),
                    },
                };
                out.push(TaskRecord {
                    task,
                    input: clip(input, cfg.max_input_len),
                    target,
                    weight: 1.0,
                    provenance: Provenance {
                        id: c as u64,
                        sub: (h + 1) as u32,
                        seed: cfg.seed,
                    },
                    clamped: false,
                });
                previous = ball;
            }
            Ok(out)
        })
        .collect()
}

fn flat_tokens(vocab: &Vocabulary, flat: &[FlatToken], clamped: &mut bool) -> Vec<TokenId> {
    flat.iter()
        .map(|t| match t {
            FlatToken::Entity(e) => vocab.entity_token(*e),
            FlatToken::Value(v) => {
                let (tok, c) = vocab.value_token(*v);
                *clamped |= c;
                tok
            }
        })
        .collect()
}

fn iva_records(g: &KnowledgeGraph, vocab: &Vocabulary, cfg: &GenerationConfig) -> Result<Vec<Vec<TaskRecord>>> {
    let iva = cfg.iva();
    (0..g.num_entities() as u32)
        .into_par_iter()
        .map(|c| {
            let mut out = Vec::new();
            for (idx, negative) in [(0u32, false), (1u32, true)] {
                let seed = derive_seed(cfg.seed, TaskKind::Iva, c as u64, idx as u64);
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let Some(ex) = make_iva_example(g, EntityId(c), &iva, &mut rng, negative)? else {
                    return Ok(Vec::new());
                };
                let mut clamped = false;
                let mut input = vec![TaskKind::Iva.token()];
                input.extend(flat_tokens(vocab, &ex.left_tokens(), &mut clamped));
                input.push(Special::Sep.token());
                input.extend(flat_tokens(vocab, &ex.right_tokens(), &mut clamped));
                out.push(TaskRecord {
                    task: TaskKind::Iva,
                    input: clip(input, cfg.max_input_len),
                    target: Target::Label { value: ex.label },
                    weight: 1.0,
                    provenance: Provenance { id: c as u64, sub: idx, seed },
                    clamped,
                });
            }
            Ok(out)
        })
        .collect()
}

/// Per-task sizes and loss weights `α_t = |D_t| / Σ |D_t'|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixPlan {
    pub sizes: BTreeMap<TaskKind, usize>,
    pub weights: BTreeMap<TaskKind, f64>,
    pub seed: u64,
}

impl MixPlan {
    pub fn new(sizes: BTreeMap<TaskKind, usize>, seed: u64) -> Result<Self> {
        let total: usize = sizes.values().sum();
        if total == 0 {
            return Err(Error::EmptyCorpus);
        }
        let weights = sizes
            .iter()
            .filter(|(_, &n)| n > 0)
            .map(|(&t, &n)| (t, n as f64 / total as f64))
            .collect();
        Ok(MixPlan { sizes, weights, seed })
    }

    pub fn weight_sum(&self) -> f64 {
        self.weights.values().sum()
    }
}

/// Draws every record once: a task with probability proportional to its
/// remaining records, then a uniform remaining record of that task. Each
/// record carries its task's `α_t` as weight.
pub fn mix_multitask(per_task: Vec<(TaskKind, Vec<TaskRecord>)>, seed: u64) -> Result<(Vec<TaskRecord>, MixPlan)> {
    let mut sizes: BTreeMap<TaskKind, usize> = BTreeMap::new();
    for (t, recs) in &per_task {
        *sizes.entry(*t).or_default() += recs.len();
    }
    let plan = MixPlan::new(sizes, seed)?;

    let mut pools: Vec<(TaskKind, Vec<TaskRecord>)> = per_task.into_iter().filter(|(_, r)| !r.is_empty()).collect();
    pools.sort_by_key(|(t, _)| *t);
    let mut remaining: usize = pools.iter().map(|(_, r)| r.len()).sum();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::with_capacity(remaining);
    while remaining > 0 {
        let mut pick = rng.gen_range(0..remaining);
        let slot = pools
            .iter()
            .position(|(_, r)| {
                if pick < r.len() {
                    true
                } else {
                    pick -= r.len();
                    false
                }
            })
            .expect("pick falls inside some pool");
        let (task, pool) = &mut pools[slot];
        let j = rng.gen_range(0..pool.len());
        let mut rec = pool.swap_remove(j);
        rec.weight = plan.weights[task];
        out.push(rec);
        remaining -= 1;
    }
    Ok((out, plan))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusHeader {
    pub format: String,
    pub version: u32,
    pub seed: u64,
    pub config_hash: String,
    pub vocab_hash: String,
    pub config: GenerationConfig,
    pub counts: BTreeMap<TaskKind, usize>,
    pub alpha: BTreeMap<TaskKind, f64>,
    pub skipped: BTreeMap<TaskKind, u64>,
    /// Lets a trainer sum task losses unweighted instead of by `alpha`.
    pub uniform_weighting: bool,
}

impl CorpusHeader {
    pub fn new(cfg: &GenerationConfig, vocab: &Vocabulary, plan: &MixPlan, skipped: BTreeMap<TaskKind, u64>) -> Self {
        CorpusHeader {
            format: FORMAT_NAME.to_owned(),
            version: FORMAT_VERSION,
            seed: plan.seed,
            config_hash: cfg.digest(),
            vocab_hash: vocab.digest(),
            config: cfg.clone(),
            counts: plan.sizes.clone(),
            alpha: plan.weights.clone(),
            skipped,
            uniform_weighting: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Corpus {
    pub header: CorpusHeader,
    pub records: Vec<TaskRecord>,
}

pub fn write_corpus_to<W: Write>(header: &CorpusHeader, records: &[TaskRecord], mut w: W) -> std::io::Result<()> {
    serde_json::to_writer(&mut w, header)?;
    w.write_all(b"\n")?;
    for r in records {
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()
}

pub fn write_corpus(path: &Path, header: &CorpusHeader, records: &[TaskRecord]) -> Result<()> {
    let f = File::create(path).map_err(|e| Error::io(path, e))?;
    write_corpus_to(header, records, BufWriter::new(f)).map_err(|e| Error::io(path, e))
}

pub fn read_corpus_from<R: BufRead>(reader: R, path: &Path) -> Result<Corpus> {
    let mut lines = reader.lines().enumerate();
    let header: CorpusHeader = match lines.next() {
        Some((_, line)) => {
            let line = line.map_err(|e| Error::io(path, e))?;
            serde_json::from_str(&line).map_err(|e| Error::parse(path, 1, format!("bad header: {e}")))?
        }
        None => return Err(Error::parse(path, 1, "missing corpus header")),
    };
    if header.format != FORMAT_NAME {
        return Err(Error::parse(path, 1, format!("unknown format {:?}", header.format)));
    }
    let mut records = Vec::new();
    for (idx, line) in lines {
        let line = line.map_err(|e| Error::io(path, e))?;
        let rec: TaskRecord =
            serde_json::from_str(&line).map_err(|e| Error::parse(path, idx + 1, format!("bad record: {e}")))?;
        records.push(rec);
    }
    Ok(Corpus { header, records })
}

pub fn read_corpus(path: &Path) -> Result<Corpus> {
    let f = File::open(path).map_err(|e| Error::io(path, e))?;
    read_corpus_from(BufReader::new(f), path)
}

/// Checks every record-level and header-level contract, returning one message
/// per violation.
pub fn verify_corpus(corpus: &Corpus, vocab: Option<&Vocabulary>) -> Vec<String> {
    let mut problems = Vec::new();
    let h = &corpus.header;
    let cfg = &h.config;
    if h.version != FORMAT_VERSION {
        problems.push(format!("unsupported version {}", h.version));
    }
    if h.config_hash != cfg.digest() {
        problems.push("config_hash does not match the embedded config".into());
    }
    if let Some(v) = vocab {
        if h.vocab_hash != v.digest() {
            problems.push("vocab_hash does not match the vocabulary".into());
        }
    }
    if !h.alpha.is_empty() && (h.alpha.values().sum::<f64>() - 1.0).abs() > 1e-12 {
        problems.push(format!("alpha sums to {}", h.alpha.values().sum::<f64>()));
    }
    let mut counts: BTreeMap<TaskKind, usize> = BTreeMap::new();
    for (i, r) in corpus.records.iter().enumerate() {
        *counts.entry(r.task).or_default() += 1;
        for p in verify_record(r, cfg, vocab) {
            problems.push(format!("record {i}: {p}"));
        }
        let expected = h.alpha.get(&r.task).copied().unwrap_or(f64::NAN);
        if r.weight != expected && r.weight != 1.0 {
            problems.push(format!("record {i}: weight {} is neither alpha nor 1", r.weight));
        }
    }
    let declared: BTreeMap<TaskKind, usize> = h.counts.iter().filter(|(_, &n)| n > 0).map(|(&t, &n)| (t, n)).collect();
    if declared != counts {
        problems.push(format!("header counts {declared:?} disagree with records {counts:?}"));
    }
    problems
}

fn verify_record(r: &TaskRecord, cfg: &GenerationConfig, vocab: Option<&Vocabulary>) -> Vec<String> {
    let mut p = Vec::new();
    if r.input.len() > cfg.max_input_len {
        p.push(format!("input length {} exceeds {}", r.input.len(), cfg.max_input_len));
    }
    if r.input.first() != Some(&r.task.token()) {
        p.push("task token is not at position 0".into());
    }
    match (&r.task, &r.target) {
        (TaskKind::Sp | TaskKind::Ip, Target::Sequence { tokens }) => {
            if tokens.as_slice() != [Special::NoPath.token()] {
                match tokens.split_last() {
                    Some((&last, rels)) if last == Special::Eos.token() => {
                        if rels.is_empty() || rels.len() > cfg.max_hops {
                            p.push(format!("path length {} outside 1..={}", rels.len(), cfg.max_hops));
                        }
                        if rels.iter().enumerate().any(|(i, t)| rels[..i].contains(t)) {
                            p.push("path repeats a relation".into());
                        }
                        if let Some(v) = vocab {
                            if rels.iter().any(|&t| !matches!(v.decode(t), Some(crate::vocab::Token::Relation(_)))) {
                                p.push("path holds a non-relation token".into());
                            }
                        }
                    }
                    _ => p.push("path target does not end with [EOS]".into()),
                }
            }
        }
        (TaskKind::Khn, Target::Distribution { entities, probs }) => {
            if entities.len() != probs.len() || entities.is_empty() {
                p.push("distribution is empty or ragged".into());
            }
            if probs.iter().any(|&x| !(x >= 0.0)) {
                p.push("negative probability".into());
            }
            let total: f64 = probs.iter().sum();
            if (total - 1.0).abs() > 1e-9 {
                p.push(format!("distribution sums to {total}"));
            }
            if r.provenance.sub as usize > cfg.hops {
                p.push(format!("hop {} exceeds {}", r.provenance.sub, cfg.hops));
            }
        }
        (TaskKind::Lcc, Target::Scalar { value }) => {
            if cfg.lcc_degree == DegreeMode::Simple && !(0.0..=1.0).contains(value) {
                p.push(format!("clustering coefficient {value} outside [0, 1]"));
            }
            if r.provenance.sub as usize > cfg.hops {
                p.push(format!("hop {} exceeds {}", r.provenance.sub, cfg.hops));
            }
        }
        (TaskKind::Iva, Target::Label { value }) => {
            if *value > 1 {
                p.push(format!("label {value} is not binary"));
            }
        }
        _ => p.push("target type does not match the task".into()),
    }
    p
}
