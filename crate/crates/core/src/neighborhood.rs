//! k-hop neighborhoods, occurrence distributions and local clustering
//! coefficients.
//!
//! `N_k(e)` is the ball of entities within `k` co-occurrence hops of `e`,
//! with `e` itself left out.

use std::collections::{HashSet, VecDeque};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{EntityId, KnowledgeGraph};

/// How an entity's degree is counted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum DegreeMode {
    /// Row sums of the relation-less adjacency: one unit per tuple shared.
    Weighted,
    /// Distinct co-occurring entities.
    Simple,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Neighborhood {
    pub center: EntityId,
    pub hops: usize,
    /// Ascending.
    pub entities: Vec<EntityId>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct OccurrenceDistribution {
    /// `(entity, probability)`, ascending by entity.
    pub entries: Vec<(EntityId, f64)>,
}

impl OccurrenceDistribution {
    pub fn total(&self) -> f64 {
        self.entries.iter().map(|(_, p)| p).sum()
    }
}

/// Balls of radius `1..=hops` around `center`, each sorted ascending.
pub fn khop_balls(g: &KnowledgeGraph, center: EntityId, hops: usize) -> Result<Vec<Vec<EntityId>>> {
    let mut layers: Vec<Vec<EntityId>> = Vec::with_capacity(hops);
    let mut seen: HashSet<EntityId> = HashSet::from([center]);
    let mut queue = VecDeque::from([(center, 0usize)]);
    let mut rings: Vec<Vec<EntityId>> = vec![Vec::new(); hops];
    while let Some((x, d)) = queue.pop_front() {
        if d == hops {
            continue;
        }
        for &y in g.neighbors(x)? {
            if seen.insert(y) {
                rings[d].push(y);
                queue.push_back((y, d + 1));
            }
        }
    }
    let mut ball = Vec::new();
    for ring in rings {
        ball.extend(ring);
        ball.sort_unstable();
        layers.push(ball.clone());
    }
    Ok(layers)
}

pub fn khop_entities(g: &KnowledgeGraph, center: EntityId, hops: usize) -> Result<Neighborhood> {
    if hops == 0 {
        return Err(Error::InvalidArgument("hop radius must be at least 1".into()));
    }
    let entities = khop_balls(g, center, hops)?.pop().unwrap_or_default();
    Ok(Neighborhood {
        center,
        hops,
        entities,
    })
}

/// Degree of each `ball` entity within the subgraph induced by `ball ∪ {center}`.
pub(crate) fn ball_degrees(g: &KnowledgeGraph, center: EntityId, ball: &[EntityId], mode: DegreeMode) -> Vec<u64> {
    let in_scope = |e: &EntityId| *e == center || ball.binary_search(e).is_ok();
    match mode {
        DegreeMode::Simple => ball
            .iter()
            .map(|&x| g.neighbors(x).map(|ns| ns.iter().filter(|y| in_scope(y)).count() as u64).unwrap_or(0))
            .collect(),
        DegreeMode::Weighted => ball
            .iter()
            .map(|&x| {
                let tuples = g.tuples_of_entity(x).unwrap_or(&[]);
                tuples
                    .iter()
                    .map(|&t| {
                        let members = g.tuple(t).distinct_entities();
                        members.iter().filter(|y| **y != x && in_scope(y)).count() as u64
                    })
                    .sum()
            })
            .collect(),
    }
}

pub fn occurrence_from_ball(
    g: &KnowledgeGraph,
    center: EntityId,
    ball: &[EntityId],
    mode: DegreeMode,
) -> Result<OccurrenceDistribution> {
    if ball.is_empty() {
        return Err(Error::EmptyNeighborhood(center.0));
    }
    let degrees = ball_degrees(g, center, ball, mode);
    let total: u64 = degrees.iter().sum();
    if total == 0 {
        return Err(Error::EmptyNeighborhood(center.0));
    }
    let entries = ball
        .iter()
        .zip(&degrees)
        .map(|(&e, &d)| (e, d as f64 / total as f64))
        .collect();
    Ok(OccurrenceDistribution { entries })
}

/// `O(e_j) = d_{e_j} / Σ d` over the k-hop ball of `center`.
pub fn occurrence_distribution(
    g: &KnowledgeGraph,
    center: EntityId,
    hops: usize,
    mode: DegreeMode,
) -> Result<OccurrenceDistribution> {
    let n = khop_entities(g, center, hops)?;
    occurrence_from_ball(g, center, &n.entities, mode)
}

/// Distinct connected pairs `{a, b} ⊆ ball`.
pub(crate) fn connected_pairs(g: &KnowledgeGraph, ball: &[EntityId]) -> u64 {
    let mut count = 0u64;
    for (i, &a) in ball.iter().enumerate() {
        let ns = g.neighbors(a).unwrap_or(&[]);
        // neighbors are sorted: count those in the ball above `a`
        let start = ns.partition_point(|x| *x <= a);
        count += ns[start..]
            .iter()
            .filter(|x| ball[i + 1..].binary_search(x).is_ok())
            .count() as u64;
    }
    count
}

pub fn clustering_from_ball(g: &KnowledgeGraph, center: EntityId, ball: &[EntityId], mode: DegreeMode) -> f64 {
    let d = match mode {
        DegreeMode::Simple => ball.len() as u64,
        DegreeMode::Weighted => g
            .tuples_of_entity(center)
            .unwrap_or(&[])
            .iter()
            .map(|&t| {
                g.tuple(t)
                    .distinct_entities()
                    .iter()
                    .filter(|y| **y != center && ball.binary_search(y).is_ok())
                    .count() as u64
            })
            .sum(),
    };
    if d < 2 {
        return 0.0;
    }
    let possible = d * (d - 1) / 2;
    connected_pairs(g, ball) as f64 / possible as f64
}

/// Share of entity pairs in `N_k(center)` that co-occur in some tuple.
///
/// With [`DegreeMode::Simple`] the denominator is `C(|N_k|, 2)`, which is the
/// usual local clustering coefficient at `k = 1` and stays within `[0, 1]` for
/// any `k`. [`DegreeMode::Weighted`] divides by `C(d, 2)` with `d` the
/// center's tuple-weighted degree into the ball and can exceed 1.
pub fn local_clustering_coefficient(g: &KnowledgeGraph, center: EntityId, hops: usize, mode: DegreeMode) -> Result<f64> {
    let n = khop_entities(g, center, hops)?;
    Ok(clustering_from_ball(g, center, &n.entities, mode))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{RelationId, Tuple};

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

    #[test]
    fn chain_balls() {
        let g = graph(4, &[(0, &[1, 2]), (0, &[2, 3])]);
        assert_eq!(khop_entities(&g, EntityId(1), 1).unwrap().entities, ents(&[2]));
        assert_eq!(khop_entities(&g, EntityId(1), 2).unwrap().entities, ents(&[2, 3]));
        assert!(khop_entities(&g, EntityId(0), 2).unwrap().entities.is_empty());
        assert!(khop_entities(&g, EntityId(1), 0).is_err());
    }

    #[test]
    fn symmetric_occurrence() {
        // center 0 with two leaves
        let g = graph(3, &[(0, &[0, 1]), (0, &[0, 2])]);
        let o = occurrence_distribution(&g, EntityId(0), 1, DegreeMode::Weighted).unwrap();
        assert_eq!(o.entries, vec![(EntityId(1), 0.5), (EntityId(2), 0.5)]);
    }

    #[test]
    fn multi_edges_weigh_occurrence() {
        // 0-1 twice, 0-2 once, 1-2 once: d1 = 3, d2 = 2
        let g = graph(3, &[(0, &[0, 1]), (1, &[0, 1]), (0, &[0, 2]), (2, &[1, 2])]);
        let o = occurrence_distribution(&g, EntityId(0), 1, DegreeMode::Weighted).unwrap();
        assert_eq!(o.entries, vec![(EntityId(1), 0.6), (EntityId(2), 0.4)]);
        let o = occurrence_distribution(&g, EntityId(0), 1, DegreeMode::Simple).unwrap();
        assert_eq!(o.entries, vec![(EntityId(1), 0.5), (EntityId(2), 0.5)]);
    }

    #[test]
    fn empty_neighborhood_is_an_error() {
        let g = graph(2, &[]);
        assert!(matches!(
            occurrence_distribution(&g, EntityId(1), 1, DegreeMode::Weighted),
            Err(Error::EmptyNeighborhood(1))
        ));
    }

    #[test]
    fn triangle_and_star() {
        let tri = graph(3, &[(0, &[0, 1]), (0, &[1, 2]), (0, &[0, 2])]);
        assert_eq!(local_clustering_coefficient(&tri, EntityId(0), 1, DegreeMode::Simple).unwrap(), 1.0);
        let star = graph(4, &[(0, &[0, 1]), (0, &[0, 2]), (0, &[0, 3])]);
        assert_eq!(local_clustering_coefficient(&star, EntityId(0), 1, DegreeMode::Simple).unwrap(), 0.0);
        let leaf = graph(2, &[(0, &[0, 1])]);
        assert_eq!(local_clustering_coefficient(&leaf, EntityId(0), 1, DegreeMode::Simple).unwrap(), 0.0);
    }

    #[test]
    fn hyperedge_closes_its_pairs() {
        // r(0,1,2,3) gives C(3,2) = 3 closed pairs among the center's neighbors
        let g = graph(5, &[(0, &[0, 1, 2, 3]), (0, &[0, 4])]);
        let c = local_clustering_coefficient(&g, EntityId(0), 1, DegreeMode::Simple).unwrap();
        assert_eq!(c, 3.0 / 6.0);
    }

    #[test]
    fn weighted_lcc_can_exceed_one() {
        // center 0 tied to 1 and 2 once each; 1-2 connected; but second hop adds more pairs
        let g = graph(5, &[(0, &[0, 1]), (0, &[0, 2]), (0, &[1, 2]), (0, &[1, 3]), (0, &[2, 3]), (0, &[3, 4])]);
        let c = local_clustering_coefficient(&g, EntityId(0), 2, DegreeMode::Weighted).unwrap();
        assert!(c > 1.0);
        let c = local_clustering_coefficient(&g, EntityId(0), 2, DegreeMode::Simple).unwrap();
        assert!((0.0..=1.0).contains(&c));
    }
}
