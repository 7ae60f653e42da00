//! Relation-less adjacency matrices and the invariant-adjacency (IVA)
//! classification examples built from them.

use std::collections::HashMap;

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph};
use crate::neighborhood::khop_entities;

/// Symmetric count matrix over an ordered entity list. Off-diagonal cells
/// count the tuples holding both entities; the diagonal counts tuples that
/// list the entity more than once.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AdjacencyMatrix {
    pub entities: Vec<EntityId>,
    /// Row-major, `n × n`.
    pub values: Vec<u32>,
}

impl AdjacencyMatrix {
    pub fn from_rows(entities: Vec<EntityId>, rows: &[&[u32]]) -> Self {
        let values = rows.iter().flat_map(|r| r.iter().copied()).collect();
        AdjacencyMatrix { entities, values }
    }

    pub fn size(&self) -> usize {
        self.entities.len()
    }

    pub fn get(&self, i: usize, j: usize) -> u32 {
        self.values[i * self.size() + j]
    }

    fn set(&mut self, i: usize, j: usize, v: u32) {
        let n = self.size();
        self.values[i * n + j] = v;
    }

    pub fn is_symmetric(&self) -> bool {
        let n = self.size();
        (0..n).all(|i| (i + 1..n).all(|j| self.get(i, j) == self.get(j, i)))
    }

    pub fn row_sums(&self) -> Vec<u64> {
        let n = self.size();
        (0..n).map(|i| (0..n).map(|j| self.get(i, j) as u64).sum()).collect()
    }

    /// Simultaneous row and column permutation: entry `i` of the result is
    /// entry `perm[i]` of `self`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        let n = self.size();
        let entities = perm.iter().map(|&p| self.entities[p]).collect();
        let mut values = vec![0; n * n];
        for i in 0..n {
            for j in 0..n {
                values[i * n + j] = self.get(perm[i], perm[j]);
            }
        }
        AdjacencyMatrix { entities, values }
    }

    /// Mirrors the upper triangle (diagonal included) onto the lower one.
    fn symmetrized_from_upper(&self) -> Self {
        let mut out = self.clone();
        let n = self.size();
        for i in 0..n {
            for j in i + 1..n {
                out.set(j, i, self.get(i, j));
            }
        }
        out
    }

    fn upper_cells(&self) -> Vec<(usize, usize)> {
        let n = self.size();
        (0..n).flat_map(|i| (i..n).map(move |j| (i, j))).collect()
    }
}

/// Adjacency of `entities` summed over every relation.
pub fn relationless_adjacency(g: &KnowledgeGraph, entities: &[EntityId]) -> Result<AdjacencyMatrix> {
    let mut index: HashMap<EntityId, usize> = HashMap::with_capacity(entities.len());
    for (i, &e) in entities.iter().enumerate() {
        g.check_entity(e)?;
        if index.insert(e, i).is_some() {
            return Err(Error::InvalidArgument(format!("entity {e} listed twice")));
        }
    }
    let n = entities.len();
    let mut m = AdjacencyMatrix {
        entities: entities.to_vec(),
        values: vec![0; n * n],
    };
    // visit each tuple once, from its smallest listed member
    for (i, &e) in entities.iter().enumerate() {
        for &t in g.tuples_of_entity(e)? {
            let tuple = g.tuple(t);
            let mut members: Vec<usize> = tuple.entities.iter().filter_map(|x| index.get(x).copied()).collect();
            members.sort_unstable();
            if members.first() != Some(&i) {
                continue;
            }
            let mut distinct = members.clone();
            distinct.dedup();
            for (a, &p) in distinct.iter().enumerate() {
                if members.iter().filter(|&&x| x == p).count() > 1 {
                    m.values[p * n + p] += 1;
                }
                for &q in &distinct[a + 1..] {
                    m.values[p * n + q] += 1;
                    m.values[q * n + p] += 1;
                }
            }
        }
    }
    Ok(m)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FlatToken {
    Entity(EntityId),
    Value(u32),
}

/// Column entities, then the upper triangle (diagonal included) row by row.
pub fn flatten_adjacency(a: &AdjacencyMatrix) -> Vec<FlatToken> {
    let n = a.size();
    let mut out = Vec::with_capacity(n + n * (n + 1) / 2);
    out.extend(a.entities.iter().map(|&e| FlatToken::Entity(e)));
    for i in 0..n {
        for j in i..n {
            out.push(FlatToken::Value(a.get(i, j)));
        }
    }
    out
}

pub fn unflatten_adjacency(tokens: &[FlatToken]) -> Result<AdjacencyMatrix> {
    let n = tokens.iter().take_while(|t| matches!(t, FlatToken::Entity(_))).count();
    if tokens.len() != n + n * (n + 1) / 2 {
        return Err(Error::InvalidArgument(format!(
            "{} tokens do not flatten a {n}×{n} matrix",
            tokens.len()
        )));
    }
    let entities = tokens[..n]
        .iter()
        .map(|t| match t {
            FlatToken::Entity(e) => *e,
            FlatToken::Value(_) => unreachable!(),
        })
        .collect();
    let mut m = AdjacencyMatrix {
        entities,
        values: vec![0; n * n],
    };
    let mut it = tokens[n..].iter();
    for i in 0..n {
        for j in i..n {
            match it.next() {
                Some(FlatToken::Value(v)) => {
                    m.set(i, j, *v);
                    m.set(j, i, *v);
                }
                _ => return Err(Error::InvalidArgument("entity token inside the value block".into())),
            }
        }
    }
    Ok(m)
}

/// Whether some simultaneous row+column permutation maps `a`'s values onto
/// `b`'s. Entity labels are ignored. Exhaustive backtracking with cheap
/// invariant rejection up front.
pub fn permutation_equivalent(a: &AdjacencyMatrix, b: &AdjacencyMatrix) -> bool {
    let n = a.size();
    if n != b.size() {
        return false;
    }
    let sorted = |mut v: Vec<u64>| {
        v.sort_unstable();
        v
    };
    let diag = |m: &AdjacencyMatrix| sorted((0..n).map(|i| m.get(i, i) as u64).collect());
    if sorted(a.row_sums()) != sorted(b.row_sums()) || diag(a) != diag(b) {
        return false;
    }
    // find sigma with b[i][j] == a[sigma[i]][sigma[j]]
    fn extend(a: &AdjacencyMatrix, b: &AdjacencyMatrix, sigma: &mut Vec<usize>, used: &mut [bool]) -> bool {
        let n = a.size();
        let i = sigma.len();
        if i == n {
            return true;
        }
        for cand in 0..n {
            if used[cand] {
                continue;
            }
            let fits = b.get(i, i) == a.get(cand, cand)
                && (0..i).all(|j| b.get(i, j) == a.get(cand, sigma[j]) && b.get(j, i) == a.get(sigma[j], cand));
            if fits {
                used[cand] = true;
                sigma.push(cand);
                if extend(a, b, sigma, used) {
                    return true;
                }
                sigma.pop();
                used[cand] = false;
            }
        }
        false
    }
    extend(a, b, &mut Vec::with_capacity(n), &mut vec![false; n])
}

/// True when `right` is `left` under some relabeling of its entities.
pub fn is_relabeling(left: &AdjacencyMatrix, right: &AdjacencyMatrix) -> bool {
    let n = left.size();
    if right.size() != n {
        return false;
    }
    let pos: HashMap<EntityId, usize> = left.entities.iter().enumerate().map(|(i, &e)| (e, i)).collect();
    let Some(perm) = right.entities.iter().map(|e| pos.get(e).copied()).collect::<Option<Vec<_>>>() else {
        return false;
    };
    let mut seen = vec![false; n];
    for &p in &perm {
        if std::mem::replace(&mut seen[p], true) {
            return false;
        }
    }
    &left.permuted(&perm) == right
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum IvaMode {
    Permuted,
    ColumnSwap,
    ValueResample,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IvaExample {
    pub left: AdjacencyMatrix,
    /// The matrix as the flattened right-hand side presents it.
    pub right: AdjacencyMatrix,
    /// 1 for a permuted copy, 0 for a corruption.
    pub label: u8,
    pub mode: IvaMode,
}

impl IvaExample {
    pub fn left_tokens(&self) -> Vec<FlatToken> {
        flatten_adjacency(&self.left)
    }

    pub fn right_tokens(&self) -> Vec<FlatToken> {
        flatten_adjacency(&self.right)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IvaConfig {
    pub hops: usize,
    /// Max matrix size, center included.
    pub max_entities: usize,
    /// Share of upper-triangle cells resampled by value corruption.
    pub corruption_rate: f64,
}

impl Default for IvaConfig {
    fn default() -> Self {
        IvaConfig {
            hops: 1,
            max_entities: 30,
            corruption_rate: 0.10,
        }
    }
}

/// Largest matrix for which negatives are checked against every permutation.
pub const EXHAUSTIVE_CHECK_LIMIT: usize = 8;
const CORRUPTION_ATTEMPTS: usize = 16;

/// Entities of the IVA matrix for `center`: the center plus its k-hop ball,
/// uniformly subsampled down to `max_entities`, ascending. `None` when the
/// ball is empty.
pub fn iva_entities<R: Rng>(g: &KnowledgeGraph, center: EntityId, cfg: &IvaConfig, rng: &mut R) -> Result<Option<Vec<EntityId>>> {
    let ball = khop_entities(g, center, cfg.hops)?.entities;
    if ball.is_empty() {
        return Ok(None);
    }
    let keep = cfg.max_entities.saturating_sub(1).max(1);
    let mut chosen: Vec<EntityId> = if ball.len() > keep {
        let mut idx = sample(rng, ball.len(), keep).into_vec();
        idx.sort_unstable();
        idx.into_iter().map(|i| ball[i]).collect()
    } else {
        ball
    };
    chosen.push(center);
    chosen.sort_unstable();
    Ok(Some(chosen))
}

/// One IVA example around `center`; `None` when the center is isolated.
pub fn make_iva_example<R: Rng>(
    g: &KnowledgeGraph,
    center: EntityId,
    cfg: &IvaConfig,
    rng: &mut R,
    negative: bool,
) -> Result<Option<IvaExample>> {
    let Some(entities) = iva_entities(g, center, cfg, rng)? else {
        return Ok(None);
    };
    let left = relationless_adjacency(g, &entities)?;
    let ex = if negative {
        corrupt(&left, cfg.corruption_rate, rng)
    } else {
        let mut perm: Vec<usize> = (0..left.size()).collect();
        perm.shuffle(rng);
        IvaExample {
            right: left.permuted(&perm),
            left,
            label: 1,
            mode: IvaMode::Permuted,
        }
    };
    check_example(&ex)?;
    Ok(Some(ex))
}

fn corrupt<R: Rng>(left: &AdjacencyMatrix, rate: f64, rng: &mut R) -> IvaExample {
    let n = left.size();
    for _ in 0..CORRUPTION_ATTEMPTS {
        let mut perm: Vec<usize> = (0..n).collect();
        perm.shuffle(rng);
        let base = left.permuted(&perm);
        let mode = if n >= 2 && rng.gen_bool(0.5) {
            IvaMode::ColumnSwap
        } else {
            IvaMode::ValueResample
        };
        let right = match mode {
            IvaMode::ColumnSwap => swap_columns(&base, rng),
            _ => resample_values(&base, rate, rng),
        };
        if n > EXHAUSTIVE_CHECK_LIMIT || !permutation_equivalent(left, &right) {
            return IvaExample {
                left: left.clone(),
                right,
                label: 0,
                mode,
            };
        }
    }
    // Changing one cell shifts the upper-triangle sum, which every
    // permutation preserves.
    let mut right = left.clone();
    let cells = right.upper_cells();
    let (i, j) = cells[rng.gen_range(0..cells.len())];
    let v = right.get(i, j) + 1;
    right.set(i, j, v);
    right.set(j, i, v);
    IvaExample {
        left: left.clone(),
        right,
        label: 0,
        mode: IvaMode::ValueResample,
    }
}

/// Swaps two columns (rows untouched) and keeps what the upper triangle shows.
fn swap_columns<R: Rng>(m: &AdjacencyMatrix, rng: &mut R) -> AdjacencyMatrix {
    let n = m.size();
    let picked = sample(rng, n, 2);
    let (a, b) = (picked.index(0), picked.index(1));
    let mut out = m.clone();
    for row in 0..n {
        let (x, y) = (m.get(row, a), m.get(row, b));
        out.set(row, a, y);
        out.set(row, b, x);
    }
    out.symmetrized_from_upper()
}

/// Reassigns `max(1, round(rate · cells))` upper-triangle cells to a value
/// drawn from the other observed values (or `+1` when all values agree).
fn resample_values<R: Rng>(m: &AdjacencyMatrix, rate: f64, rng: &mut R) -> AdjacencyMatrix {
    let cells = m.upper_cells();
    let observed: Vec<u32> = cells.iter().map(|&(i, j)| m.get(i, j)).collect();
    let count = ((rate * cells.len() as f64).round() as usize).clamp(1, cells.len());
    let mut out = m.clone();
    for c in sample(rng, cells.len(), count) {
        let (i, j) = cells[c];
        let current = m.get(i, j);
        let pool: Vec<u32> = observed.iter().copied().filter(|&v| v != current).collect();
        let v = if pool.is_empty() {
            current + 1
        } else {
            pool[rng.gen_range(0..pool.len())]
        };
        out.set(i, j, v);
        out.set(j, i, v);
    }
    out
}

fn check_example(ex: &IvaExample) -> Result<()> {
    if !ex.left.is_symmetric() || !ex.right.is_symmetric() {
        return Err(Error::Invariant("IVA matrices must be symmetric".into()));
    }
    if ex.label == 1 {
        let mut a = ex.left.row_sums();
        let mut b = ex.right.row_sums();
        a.sort_unstable();
        b.sort_unstable();
        if a != b || !is_relabeling(&ex.left, &ex.right) {
            return Err(Error::Invariant("positive IVA pair is not a permutation".into()));
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{RelationId, Tuple};
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn graph(n: usize, ts: &[(u32, &[u32])]) -> KnowledgeGraph {
        let nr = ts.iter().map(|(r, _)| *r as usize + 1).max().unwrap_or(1);
        let tuples = ts
            .iter()
            .map(|(r, es)| Tuple::new(RelationId(*r), es.iter().map(|&e| EntityId(e)).collect()))
            .collect();
        KnowledgeGraph::build(n, nr, tuples).unwrap()
    }

    fn ents(es: &[u32]) -> Vec<EntityId> {
        es.iter().map(|&e| EntityId(e)).collect()
    }

    /// Tuple multiset whose adjacency is [[1,2,1],[2,0,3],[1,3,1]].
    fn worked_example_graph() -> KnowledgeGraph {
        graph(
            3,
            &[
                (0, &[0, 1]),
                (1, &[0, 1]),
                (0, &[0, 2]),
                (0, &[1, 2]),
                (1, &[1, 2]),
                (2, &[1, 2]),
                (3, &[0, 0]),
                (3, &[2, 2]),
            ],
        )
    }

    #[test]
    fn zero_matrix_without_tuples() {
        let g = graph(3, &[]);
        let m = relationless_adjacency(&g, &ents(&[0, 1, 2])).unwrap();
        assert!(m.values.iter().all(|&v| v == 0));
    }

    #[test]
    fn parallel_relations_add_up() {
        let g = graph(2, &[(0, &[0, 1]), (1, &[0, 1])]);
        let m = relationless_adjacency(&g, &ents(&[0, 1])).unwrap();
        assert_eq!(m.get(0, 1), 2);
        assert_eq!(m.get(1, 0), 2);
    }

    #[test]
    fn duplicate_entities_rejected() {
        let g = graph(2, &[]);
        assert!(relationless_adjacency(&g, &ents(&[0, 0])).is_err());
    }

    #[test]
    fn worked_matrix_and_flattening() {
        let g = worked_example_graph();
        let m = relationless_adjacency(&g, &ents(&[0, 1, 2])).unwrap();
        assert_eq!(m.values, vec![1, 2, 1, 2, 0, 3, 1, 3, 1]);
        let flat = flatten_adjacency(&m);
        let values: Vec<u32> = flat
            .iter()
            .filter_map(|t| match t {
                FlatToken::Value(v) => Some(*v),
                _ => None,
            })
            .collect();
        assert_eq!(&flat[..3], &[FlatToken::Entity(EntityId(0)), FlatToken::Entity(EntityId(1)), FlatToken::Entity(EntityId(2))]);
        assert_eq!(values, vec![1, 2, 1, 0, 3, 1]);
    }

    #[test]
    fn one_by_one() {
        let m = AdjacencyMatrix::from_rows(ents(&[7]), &[&[0]]);
        assert_eq!(flatten_adjacency(&m), vec![FlatToken::Entity(EntityId(7)), FlatToken::Value(0)]);
    }

    #[test]
    fn unflatten_rejects_bad_length() {
        let toks = vec![FlatToken::Entity(EntityId(0)), FlatToken::Entity(EntityId(1)), FlatToken::Value(0)];
        assert!(unflatten_adjacency(&toks).is_err());
    }

    #[test]
    fn identity_permutation_positive() {
        let m = AdjacencyMatrix::from_rows(ents(&[0, 1]), &[&[1, 2], &[2, 0]]);
        let p = m.permuted(&[0, 1]);
        assert_eq!(p, m);
        assert!(is_relabeling(&m, &p));
    }

    #[test]
    fn column_swap_on_distinct_diagonal_is_not_a_permutation() {
        // [[1,0],[0,2]] with its columns swapped reads [[0,1],[1,0]] from the upper triangle
        let m = AdjacencyMatrix::from_rows(ents(&[0, 1]), &[&[1, 0], &[0, 2]]);
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let swapped = swap_columns(&m, &mut rng);
        assert_eq!(swapped.values, vec![0, 1, 1, 0]);
        // both 2-permutations, checked by hand
        assert_ne!(m.permuted(&[0, 1]).values, swapped.values);
        assert_ne!(m.permuted(&[1, 0]).values, swapped.values);
        assert!(!permutation_equivalent(&m, &swapped));
    }

    #[test]
    fn value_corruption_on_zero_matrix() {
        let m = AdjacencyMatrix::from_rows(ents(&[0, 1, 2]), &[&[0, 0, 0], &[0, 0, 0], &[0, 0, 0]]);
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let out = resample_values(&m, 0.1, &mut rng);
        assert!(out.values.iter().any(|&v| v > 0));
        assert!(!permutation_equivalent(&m, &out));
    }

    #[test]
    fn isolated_center_yields_nothing() {
        let g = graph(3, &[(0, &[1, 2])]);
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        assert!(make_iva_example(&g, EntityId(0), &IvaConfig::default(), &mut rng, false).unwrap().is_none());
    }

    #[test]
    fn subsampling_caps_size() {
        let ts: Vec<(u32, Vec<u32>)> = (1..50).map(|i| (0, vec![0, i])).collect();
        let refs: Vec<(u32, &[u32])> = ts.iter().map(|(r, v)| (*r, v.as_slice())).collect();
        let g = graph(50, &refs);
        let cfg = IvaConfig {
            max_entities: 10,
            ..IvaConfig::default()
        };
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let ex = make_iva_example(&g, EntityId(0), &cfg, &mut rng, true).unwrap().unwrap();
        assert_eq!(ex.left.size(), 10);
        assert!(ex.left.entities.contains(&EntityId(0)));
    }

    fn small_matrix() -> impl Strategy<Value = AdjacencyMatrix> {
        (1usize..6).prop_flat_map(|n| {
            proptest::collection::vec(0u32..4, n * (n + 1) / 2).prop_map(move |upper| {
                let mut m = AdjacencyMatrix {
                    entities: (0..n as u32).map(EntityId).collect(),
                    values: vec![0; n * n],
                };
                let mut it = upper.into_iter();
                for i in 0..n {
                    for j in i..n {
                        let v = it.next().unwrap();
                        m.set(i, j, v);
                        m.set(j, i, v);
                    }
                }
                m
            })
        })
    }

    proptest! {
        #[test]
        fn flatten_round_trips(m in small_matrix()) {
            let flat = flatten_adjacency(&m);
            let n = m.size();
            prop_assert_eq!(flat.len(), n + n * (n + 1) / 2);
            prop_assert_eq!(unflatten_adjacency(&flat).unwrap(), m);
        }

        #[test]
        fn permutations_are_equivalent(m in small_matrix(), seed in any::<u64>()) {
            let mut perm: Vec<usize> = (0..m.size()).collect();
            perm.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
            let p = m.permuted(&perm);
            prop_assert!(permutation_equivalent(&m, &p));
            prop_assert!(is_relabeling(&m, &p));
        }
    }
}
