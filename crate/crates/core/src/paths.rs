//! Relational path search: all-shortest relational sequences between two
//! entities, and the entropy-guided beam expansion over incident relations.

use std::collections::{BTreeSet, HashMap, VecDeque};

use serde::{Deserialize, Serialize};

use crate::entropy::{conditional_entropy, relation_entropy};
use crate::error::Result;
use crate::graph::{EntityId, KnowledgeGraph, RelationId, TupleId};

/// Ordered, duplicate-free sequence of relations.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationalPath(Vec<RelationId>);

impl RelationalPath {
    /// `None` when `relations` is empty or repeats a relation.
    pub fn new(relations: Vec<RelationId>) -> Option<Self> {
        if relations.is_empty() || has_repeat(&relations) {
            return None;
        }
        Some(RelationalPath(relations))
    }

    pub fn relations(&self) -> &[RelationId] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn last(&self) -> RelationId {
        *self.0.last().expect("relational paths are non-empty")
    }

    fn extended(&self, r: RelationId) -> Self {
        let mut v = self.0.clone();
        v.push(r);
        RelationalPath(v)
    }
}

pub(crate) fn has_repeat(rels: &[RelationId]) -> bool {
    rels.iter().enumerate().any(|(i, r)| rels[..i].contains(r))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PathSearchConfig {
    /// Relations kept per expansion.
    pub beam: usize,
    pub max_hops: usize,
    /// Shortest relational sequences kept per endpoint pair.
    pub sp_cap: usize,
}

impl Default for PathSearchConfig {
    fn default() -> Self {
        PathSearchConfig {
            beam: 4,
            max_hops: 4,
            sp_cap: 16,
        }
    }
}

/// The `k` relations of `candidates` with the highest `H(r)`; ties go to the
/// smaller id.
pub fn top_entropy(g: &KnowledgeGraph, k: usize, candidates: &[RelationId]) -> Result<Vec<RelationId>> {
    let mut scored = Vec::with_capacity(candidates.len());
    for &r in candidates {
        if g.entities_of_relation(r)?.is_empty() {
            continue;
        }
        scored.push((-relation_entropy(g, r)?, r));
    }
    Ok(lowest_scores(scored, k))
}

/// The `k` relations `r''` of `candidates` with the lowest `H(r'' | prev)`;
/// ties go to the smaller id.
pub fn bottom_conditional_entropy(
    g: &KnowledgeGraph,
    k: usize,
    candidates: &[RelationId],
    prev: RelationId,
) -> Result<Vec<RelationId>> {
    let mut scored = Vec::with_capacity(candidates.len());
    for &r in candidates {
        if g.entities_of_relation(r)?.is_empty() {
            continue;
        }
        scored.push((conditional_entropy(g, r, prev)?, r));
    }
    Ok(lowest_scores(scored, k))
}

/// Scores closer than this are one tie class; equal entropies reached through
/// different counts can disagree in the last bits.
pub const SCORE_TIE_TOLERANCE: f64 = 1e-12;

/// The `k` lowest-scored relations, ties broken by ascending id.
fn lowest_scores(mut scored: Vec<(f64, RelationId)>, k: usize) -> Vec<RelationId> {
    scored.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    let mut classed = Vec::with_capacity(scored.len());
    let mut class = 0usize;
    for (i, &(s, r)) in scored.iter().enumerate() {
        if i > 0 && s - scored[i - 1].0 > SCORE_TIE_TOLERANCE {
            class += 1;
        }
        classed.push((class, r));
    }
    classed.sort_unstable();
    classed.into_iter().take(k).map(|(_, r)| r).collect()
}

/// Entropy-guided beam expansion from query relation `r`.
///
/// Seeds are the `beam` incident relations of highest entropy. Each round
/// extends every frontier path by the `beam` relations incident to its last
/// relation with the lowest conditional entropy, skipping relations already on
/// the path. Paths of every length `1..=max_hops` are returned, sorted.
pub fn information_gain_paths(g: &KnowledgeGraph, r: RelationId, cfg: &PathSearchConfig) -> Result<Vec<RelationalPath>> {
    if cfg.beam == 0 || cfg.max_hops == 0 {
        return Ok(Vec::new());
    }
    let seeds = top_entropy(g, cfg.beam, &g.incident_relations(r, &[])?)?;
    let mut frontier: Vec<RelationalPath> = seeds.into_iter().map(|s| RelationalPath(vec![s])).collect();
    let mut out = frontier.clone();

    for _ in 1..cfg.max_hops {
        let mut next = Vec::new();
        for path in &frontier {
            let last = path.last();
            let candidates = g.incident_relations(last, path.relations())?;
            for r2 in bottom_conditional_entropy(g, cfg.beam, &candidates, last)? {
                next.push(path.extended(r2));
            }
        }
        if next.is_empty() {
            break;
        }
        out.extend(next.iter().cloned());
        frontier = next;
    }
    out.sort();
    out.dedup();
    Ok(out)
}

/// Keeps the candidates that have a grounded walk from `from` to `to`: tuples
/// `t_1..t_m` with `t_n.relation = path[n]`, consecutive tuples sharing an
/// entity, `from ∈ t_1` and `to ∈ t_m`. `exclude` is never walked.
pub fn ground_paths(
    g: &KnowledgeGraph,
    from: EntityId,
    to: EntityId,
    candidates: &[RelationalPath],
    exclude: Option<TupleId>,
) -> Result<Vec<RelationalPath>> {
    g.check_entity(from)?;
    g.check_entity(to)?;
    // frontier after a prefix = every entity of every tuple that can end it
    let mut memo: HashMap<Vec<RelationId>, Vec<EntityId>> = HashMap::new();
    memo.insert(Vec::new(), vec![from]);
    let mut out = Vec::new();
    for cand in candidates {
        let rels = cand.relations();
        let mut depth = rels.len();
        while !memo.contains_key(&rels[..depth]) {
            depth -= 1;
        }
        for n in depth..rels.len() {
            let prev = &memo[&rels[..n]];
            let frontier = ground_step(g, prev, rels[n], exclude);
            memo.insert(rels[..=n].to_vec(), frontier);
        }
        if memo[rels].binary_search(&to).is_ok() {
            out.push(cand.clone());
        }
    }
    Ok(out)
}

fn ground_step(g: &KnowledgeGraph, prev: &[EntityId], r: RelationId, exclude: Option<TupleId>) -> Vec<EntityId> {
    let mut next = Vec::new();
    for &e in prev {
        for &t in g.tuples_of_entity_with_relation(e, r) {
            if Some(t) == exclude {
                continue;
            }
            next.extend_from_slice(&g.tuple(t).entities);
        }
    }
    next.sort_unstable();
    next.dedup();
    next
}

/// Distinct relational sequences of all minimum-hop walks from `from` to
/// `to`, with repeated-relation sequences dropped, sorted, and truncated to
/// `sp_cap`. Empty when `to` is farther than `max_hops`.
pub fn shortest_relational_paths(
    g: &KnowledgeGraph,
    from: EntityId,
    to: EntityId,
    cfg: &PathSearchConfig,
    exclude: Option<TupleId>,
) -> Result<Vec<RelationalPath>> {
    g.check_entity(from)?;
    g.check_entity(to)?;
    if cfg.max_hops == 0 {
        return Ok(Vec::new());
    }
    let usable = |t: &TupleId| Some(*t) != exclude;

    if from == to {
        let rels: BTreeSet<RelationId> = g
            .tuples_of_entity(from)?
            .iter()
            .filter(|t| usable(t))
            .map(|t| g.tuple(*t).relation)
            .collect();
        return Ok(rels.into_iter().take(cfg.sp_cap).map(|r| RelationalPath(vec![r])).collect());
    }

    // forward BFS, stopping once the level containing `to` is complete
    let mut dist: HashMap<EntityId, usize> = HashMap::new();
    dist.insert(from, 0);
    let mut queue = VecDeque::from([from]);
    let mut target_depth = None;
    while let Some(x) = queue.pop_front() {
        let d = dist[&x];
        if target_depth.is_some_and(|td| d >= td) || d >= cfg.max_hops {
            continue;
        }
        for t in g.tuples_of_entity(x)?.iter().filter(|t| usable(t)) {
            for &y in &g.tuple(*t).entities {
                if !dist.contains_key(&y) {
                    dist.insert(y, d + 1);
                    if y == to {
                        target_depth = Some(d + 1);
                    }
                    queue.push_back(y);
                }
            }
        }
    }
    let Some(depth) = target_depth else {
        return Ok(Vec::new());
    };

    // parent DAG restricted to entities on some shortest walk into `to`
    let mut layers: Vec<Vec<EntityId>> = vec![Vec::new(); depth + 1];
    layers[depth].push(to);
    let mut on_dag: BTreeSet<EntityId> = BTreeSet::from([to]);
    for level in (1..=depth).rev() {
        let mut parents = BTreeSet::new();
        for &y in &layers[level] {
            for t in g.tuples_of_entity(y)?.iter().filter(|t| usable(t)) {
                for &x in &g.tuple(*t).entities {
                    if dist.get(&x) == Some(&(level - 1)) {
                        parents.insert(x);
                    }
                }
            }
        }
        on_dag.extend(parents.iter().copied());
        layers[level - 1] = parents.into_iter().collect();
    }

    // forward DP over the DAG: relation sequences reaching each entity
    let mut seqs: HashMap<EntityId, BTreeSet<Vec<RelationId>>> = HashMap::new();
    seqs.insert(from, BTreeSet::from([Vec::new()]));
    for level in 1..=depth {
        for &y in &layers[level] {
            let mut acc: BTreeSet<Vec<RelationId>> = BTreeSet::new();
            for t in g.tuples_of_entity(y)?.iter().filter(|t| usable(t)) {
                let tuple = g.tuple(*t);
                let mut seen_parent = Vec::new();
                for &x in &tuple.entities {
                    if dist.get(&x) != Some(&(level - 1)) || !on_dag.contains(&x) || seen_parent.contains(&x) {
                        continue;
                    }
                    seen_parent.push(x);
                    if let Some(prefixes) = seqs.get(&x) {
                        for p in prefixes {
                            if !p.contains(&tuple.relation) {
                                let mut s = p.clone();
                                s.push(tuple.relation);
                                acc.insert(s);
                            }
                        }
                    }
                }
            }
            seqs.insert(y, acc);
        }
    }
    Ok(seqs
        .remove(&to)
        .unwrap_or_default()
        .into_iter()
        .take(cfg.sp_cap)
        .map(RelationalPath)
        .collect())
}
