//! Relation entropy, conditional entropy between consecutive relations, and
//! the information gain of a relational path. Natural log throughout, with
//! `0 · ln 0 = 0`.

use crate::error::{Error, Result};
use crate::graph::{sorted_intersection_len, KnowledgeGraph, RelationId};

fn x_ln_x(x: f64) -> f64 {
    if x == 0.0 {
        0.0
    } else {
        x * x.ln()
    }
}

/// Binary entropy of a relation covering `covered` of `total` entities.
pub fn entropy_from_counts(covered: usize, total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let p = covered as f64 / total as f64;
    let q = (total - covered) as f64 / total as f64;
    -(x_ln_x(p) + x_ln_x(q))
}

/// `-(|prev|/|E|) (U ln U + V ln V)` with `U = |prev Δ next| / |prev|` and
/// `V = |prev ∩ next| / |prev|`. `U` may exceed 1, so the value can be
/// negative when the two sets are mostly disjoint.
pub fn conditional_entropy_from_counts(prev: usize, next: usize, shared: usize, total: usize) -> Option<f64> {
    if prev == 0 {
        return None;
    }
    let sym_diff = prev + next - 2 * shared;
    let u = sym_diff as f64 / prev as f64;
    let v = shared as f64 / prev as f64;
    Some(-(prev as f64 / total as f64) * (x_ln_x(u) + x_ln_x(v)))
}

/// `H(r)` from the share of all entities that `r` touches.
pub fn relation_entropy(g: &KnowledgeGraph, r: RelationId) -> Result<f64> {
    let covered = g.entities_of_relation(r)?.len();
    Ok(entropy_from_counts(covered, g.num_entities()))
}

/// `H(prev | next)`.
pub fn conditional_entropy(g: &KnowledgeGraph, prev: RelationId, next: RelationId) -> Result<f64> {
    let a = g.entities_of_relation(prev)?;
    let b = g.entities_of_relation(next)?;
    let shared = sorted_intersection_len(a, b);
    conditional_entropy_from_counts(a.len(), b.len(), shared, g.num_entities()).ok_or(Error::UndefinedEntropy(prev.0))
}

/// `IG(r_1..r_l) = H(r_l) - Σ_{i=1}^{l-1} H(r_{l-i} | r_{l-i+1})`.
pub fn path_information_gain(g: &KnowledgeGraph, path: &[RelationId]) -> Result<f64> {
    let last = *path
        .last()
        .ok_or_else(|| Error::InvalidArgument("information gain of an empty path".into()))?;
    let mut ig = relation_entropy(g, last)?;
    for pair in path.windows(2).rev() {
        ig -= conditional_entropy(g, pair[0], pair[1])?;
    }
    Ok(ig)
}
