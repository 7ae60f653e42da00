#![allow(dead_code)]

use std::collections::BTreeSet;
use std::ops::RangeInclusive;

use kgpretrain::{EntityId, KnowledgeGraph, RelationId, Tuple};
use rand::Rng;

/// `tuples` random tuples over `n` entities and `nr` relations. Entities are
/// drawn independently, so a tuple may list an entity twice.
pub fn random_tuples<R: Rng>(rng: &mut R, n: usize, nr: usize, tuples: usize, arity: RangeInclusive<usize>) -> Vec<Tuple> {
    (0..tuples)
        .map(|_| {
            let a = rng.gen_range(arity.clone());
            let r = RelationId(rng.gen_range(0..nr as u32));
            Tuple::new(r, (0..a).map(|_| EntityId(rng.gen_range(0..n as u32))).collect())
        })
        .collect()
}

/// Random graph with `2..=max_entities` entities, `1..=max_relations`
/// relations and between n/2 and 2n tuples.
pub fn random_graph<R: Rng>(
    rng: &mut R,
    max_entities: usize,
    max_relations: usize,
    arity: RangeInclusive<usize>,
) -> KnowledgeGraph {
    let n = rng.gen_range(2..=max_entities);
    let nr = rng.gen_range(1..=max_relations);
    let m = rng.gen_range(n / 2..=2 * n);
    let tuples = random_tuples(rng, n, nr, m, arity);
    KnowledgeGraph::build(n, nr, tuples).expect("valid random graph")
}

/// Off-diagonal tuple co-occurrence counts straight from the tuple list.
pub fn dense_counts(g: &KnowledgeGraph) -> Vec<Vec<u32>> {
    let n = g.num_entities();
    let mut a = vec![vec![0u32; n]; n];
    for t in g.tuples() {
        let members: BTreeSet<usize> = t.entities.iter().map(|e| e.0 as usize).collect();
        for &x in &members {
            for &y in &members {
                if x != y {
                    a[x][y] += 1;
                }
            }
        }
    }
    a
}

/// Entity sets of every relation, from the tuple list.
pub fn relation_sets(g: &KnowledgeGraph) -> Vec<BTreeSet<u32>> {
    let mut sets = vec![BTreeSet::new(); g.num_relations()];
    for t in g.tuples() {
        sets[t.relation.index()].extend(t.entities.iter().map(|e| e.0));
    }
    sets
}

pub fn ids(es: &[EntityId]) -> Vec<u32> {
    es.iter().map(|e| e.0).collect()
}
