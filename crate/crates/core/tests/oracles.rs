mod common;

use std::collections::BTreeSet;

use kgpretrain::paths::PathSearchConfig;
use kgpretrain::{
    ground_paths, information_gain_paths, local_clustering_coefficient, shortest_relational_paths, DegreeMode, EntityId,
    KnowledgeGraph, RelationId, RelationalPath, Tuple, TupleId,
};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use common::{dense_counts, ids, random_tuples, relation_sets};

fn graph_strategy(max_entities: usize, max_relations: usize) -> impl Strategy<Value = (usize, usize, Vec<Tuple>)> {
    (2..=max_entities, 1..=max_relations, any::<u64>()).prop_map(|(n, nr, seed)| {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let m = n + (seed % n as u64) as usize;
        (n, nr, random_tuples(&mut rng, n, nr, m, 2..=4))
    })
}

/// Whether a tuple walk with relations `rels` joins `from` to `to`.
fn walk_exists(g: &KnowledgeGraph, from: EntityId, to: EntityId, rels: &[RelationId], exclude: Option<usize>) -> bool {
    fn go(g: &KnowledgeGraph, prev: Option<usize>, rels: &[RelationId], to: EntityId, from: EntityId, exclude: Option<usize>) -> bool {
        let Some((&r, rest)) = rels.split_first() else {
            return prev.is_some_and(|p| g.tuples()[p].entities.contains(&to));
        };
        (0..g.num_tuples()).any(|t| {
            let tuple = &g.tuples()[t];
            let joins = match prev {
                None => tuple.entities.contains(&from),
                Some(p) => tuple.entities.iter().any(|e| g.tuples()[p].entities.contains(e)),
            };
            Some(t) != exclude && tuple.relation == r && joins && go(g, Some(t), rest, to, from, exclude)
        })
    }
    go(g, None, rels, to, from, exclude)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn index_matches_tuple_scan((n, nr, tuples) in graph_strategy(30, 6)) {
        let g = KnowledgeGraph::build(n, nr, tuples.clone()).unwrap();
        let sets = relation_sets(&g);
        let counts = dense_counts(&g);
        for r in 0..nr {
            let rid = RelationId(r as u32);
            prop_assert_eq!(ids(g.entities_of_relation(rid).unwrap()), sets[r].iter().copied().collect::<Vec<_>>());
            let incident: Vec<u32> = (0..nr)
                .filter(|&x| x != r && !sets[r].is_disjoint(&sets[x]))
                .map(|x| x as u32)
                .collect();
            let got: Vec<u32> = g.incident_relations(rid, &[]).unwrap().iter().map(|x| x.0).collect();
            prop_assert_eq!(got, incident);
        }
        for e in 0..n {
            let eid = EntityId(e as u32);
            let neighbors: Vec<u32> = (0..n).filter(|&y| counts[e][y] > 0).map(|y| y as u32).collect();
            prop_assert_eq!(ids(g.neighbors(eid).unwrap()), neighbors);
            let rels: BTreeSet<u32> = tuples.iter().filter(|t| t.contains(eid)).map(|t| t.relation.0).collect();
            let got: BTreeSet<u32> = g.relations_of_entity(eid).unwrap().iter().map(|r| r.0).collect();
            prop_assert_eq!(got, rels);
            let held = tuples.iter().filter(|t| t.contains(eid)).count();
            prop_assert_eq!(g.tuples_of_entity(eid).unwrap().len(), held);
        }
    }

    #[test]
    fn incidence_is_symmetric((n, nr, tuples) in graph_strategy(25, 8)) {
        let g = KnowledgeGraph::build(n, nr, tuples).unwrap();
        for a in 0..nr as u32 {
            for b in g.incident_relations(RelationId(a), &[]).unwrap() {
                prop_assert!(g.incident_relations(b, &[]).unwrap().contains(&RelationId(a)));
            }
        }
    }

    #[test]
    fn grounding_matches_walk_search((n, nr, tuples) in graph_strategy(12, 4), picks in prop::collection::vec((0u32..12, 0u32..12, prop::collection::vec(0u32..4, 1..=3)), 6)) {
        let g = KnowledgeGraph::build(n, nr, tuples).unwrap();
        for (a, b, rels) in picks {
            let (from, to) = (EntityId(a % n as u32), EntityId(b % n as u32));
            let rels: Vec<RelationId> = rels.into_iter().map(|r| RelationId(r % nr as u32)).collect();
            let Some(cand) = RelationalPath::new(rels.clone()) else { continue };
            for exclude in [None, Some(0usize)] {
                let exclude = exclude.filter(|_| g.num_tuples() > 0);
                let got = ground_paths(&g, from, to, std::slice::from_ref(&cand), exclude.map(|t| TupleId(t as u32))).unwrap();
                prop_assert_eq!(!got.is_empty(), walk_exists(&g, from, to, &rels, exclude));
            }
        }
    }

    #[test]
    fn results_ignore_tuple_order((n, nr, tuples) in graph_strategy(20, 5), shuffle in any::<u64>()) {
        let g = KnowledgeGraph::build(n, nr, tuples.clone()).unwrap();
        let mut shuffled = tuples;
        shuffled.shuffle(&mut ChaCha8Rng::seed_from_u64(shuffle));
        let h = KnowledgeGraph::build(n, nr, shuffled).unwrap();
        let cfg = PathSearchConfig::default();
        for r in 0..nr as u32 {
            prop_assert_eq!(
                information_gain_paths(&g, RelationId(r), &cfg).unwrap(),
                information_gain_paths(&h, RelationId(r), &cfg).unwrap()
            );
        }
        for a in 0..n as u32 {
            prop_assert_eq!(g.neighbors(EntityId(a)).unwrap(), h.neighbors(EntityId(a)).unwrap());
            let to = EntityId((a * 7 + 3) % n as u32);
            prop_assert_eq!(
                shortest_relational_paths(&g, EntityId(a), to, &cfg, None).unwrap(),
                shortest_relational_paths(&h, EntityId(a), to, &cfg, None).unwrap()
            );
        }
    }

    #[test]
    fn simple_lcc_stays_in_unit_interval((n, nr, tuples) in graph_strategy(40, 4), k in 1usize..=3) {
        let g = KnowledgeGraph::build(n, nr, tuples).unwrap();
        for c in 0..n as u32 {
            let v = local_clustering_coefficient(&g, EntityId(c), k, DegreeMode::Simple).unwrap();
            prop_assert!((0.0..=1.0).contains(&v));
            let w = local_clustering_coefficient(&g, EntityId(c), k, DegreeMode::Weighted).unwrap();
            prop_assert!(w >= 0.0);
        }
    }

    #[test]
    fn ip_paths_are_chains_of_incident_relations((n, nr, tuples) in graph_strategy(15, 6), beam in 1usize..=4, hops in 1usize..=4) {
        let g = KnowledgeGraph::build(n, nr, tuples).unwrap();
        let cfg = PathSearchConfig { beam, max_hops: hops, sp_cap: 16 };
        for r in 0..nr as u32 {
            let paths = information_gain_paths(&g, RelationId(r), &cfg).unwrap();
            prop_assert!(paths.windows(2).all(|w| w[0] < w[1]));
            for p in &paths {
                let rels = p.relations();
                prop_assert!(rels.len() <= hops);
                prop_assert!(g.incident_relations(RelationId(r), &[]).unwrap().contains(&rels[0]));
                for w in rels.windows(2) {
                    prop_assert!(g.incident_relations(w[0], &[]).unwrap().contains(&w[1]));
                }
            }
            for l in 1..=hops {
                prop_assert!(paths.iter().filter(|p| p.len() == l).count() <= beam.pow(l as u32));
            }
        }
    }
}
