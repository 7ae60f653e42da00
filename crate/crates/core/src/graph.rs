//! Immutable incidence index over knowledge (hyper)graph tuples.
//!
//! A tuple `r(e_1, ..., e_n)` carries one relation and an ordered entity list of
//! arity at least two. The index materializes, at build time:
//!
//! * `E(r)`: the distinct entities appearing in any tuple of relation `r`,
//! * `R(e)`: the distinct relations of tuples containing `e`,
//! * the co-occurrence neighbors of every entity,
//! * the relation-level incidence lists (`E(r) ∩ E(r') ≠ ∅`).
//!
//! Every list is sorted ascending, so answers never depend on input order.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct RelationId(pub u32);

/// Position of a tuple in the list handed to [`KnowledgeGraph::build`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TupleId(pub u32);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl TupleId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "r{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Tuple {
    pub relation: RelationId,
    pub entities: Vec<EntityId>,
}

impl Tuple {
    pub fn new(relation: RelationId, entities: Vec<EntityId>) -> Self {
        Tuple { relation, entities }
    }

    pub fn arity(&self) -> usize {
        self.entities.len()
    }

    pub fn contains(&self, e: EntityId) -> bool {
        self.entities.contains(&e)
    }

    /// Entities of the tuple with repeats removed, ascending.
    pub fn distinct_entities(&self) -> Vec<EntityId> {
        let mut out = self.entities.clone();
        out.sort_unstable();
        out.dedup();
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Valid,
    Test,
}

/// A tuple with exactly one entity slot masked out.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Query {
    pub relation: RelationId,
    /// `None` marks the masked slot.
    pub entities: Vec<Option<EntityId>>,
    pub split: Split,
    /// Ground-truth tuple this query was cut from, when known.
    pub source: Option<TupleId>,
    answer: EntityId,
    masked: usize,
}

impl Query {
    pub fn mask(tuple: &Tuple, position: usize, split: Split, source: Option<TupleId>) -> Result<Self> {
        let answer = *tuple.entities.get(position).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "mask position {position} outside tuple of arity {}",
                tuple.arity()
            ))
        })?;
        let entities = tuple
            .entities
            .iter()
            .enumerate()
            .map(|(i, &e)| (i != position).then_some(e))
            .collect();
        Ok(Query {
            relation: tuple.relation,
            entities,
            split,
            source,
            answer,
            masked: position,
        })
    }

    pub fn masked_position(&self) -> usize {
        self.masked
    }

    /// Ground truth for the masked slot.
    pub fn answer(&self) -> EntityId {
        self.answer
    }

    /// `(e_i, e_j)` endpoint pairs: the answer paired with every other slot.
    pub fn endpoint_pairs(&self) -> Vec<(EntityId, EntityId)> {
        self.entities
            .iter()
            .flatten()
            .map(|&other| (self.answer, other))
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    num_entities: usize,
    num_relations: usize,
    tuples: Vec<Tuple>,
    /// Per entity: tuple ids ordered by `(relation, tuple id)`, each tuple once.
    entity_tuples: Vec<Vec<TupleId>>,
    relation_tuples: Vec<Vec<TupleId>>,
    relation_entities: Vec<Vec<EntityId>>,
    entity_relations: Vec<Vec<RelationId>>,
    neighbors: Vec<Vec<EntityId>>,
    incident: Vec<Vec<RelationId>>,
}

impl KnowledgeGraph {
    /// Builds the index. `num_entities` / `num_relations` come from the
    /// vocabulary, so entities that never occur in `tuples` still exist.
    pub fn build(num_entities: usize, num_relations: usize, tuples: Vec<Tuple>) -> Result<Self> {
        for (index, t) in tuples.iter().enumerate() {
            if t.arity() < 2 {
                return Err(Error::MalformedTuple {
                    index,
                    arity: t.arity(),
                });
            }
            if t.relation.index() >= num_relations {
                return Err(Error::OutOfVocabulary {
                    index,
                    kind: "relation",
                    id: t.relation.0,
                    bound: num_relations,
                });
            }
            if let Some(e) = t.entities.iter().find(|e| e.index() >= num_entities) {
                return Err(Error::OutOfVocabulary {
                    index,
                    kind: "entity",
                    id: e.0,
                    bound: num_entities,
                });
            }
        }

        let mut entity_tuples = vec![Vec::new(); num_entities];
        let mut relation_tuples = vec![Vec::new(); num_relations];
        let mut relation_entities = vec![Vec::new(); num_relations];
        let mut entity_relations = vec![Vec::new(); num_entities];
        let mut neighbors: Vec<Vec<EntityId>> = vec![Vec::new(); num_entities];

        for (i, t) in tuples.iter().enumerate() {
            let id = TupleId(i as u32);
            relation_tuples[t.relation.index()].push(id);
            let distinct = t.distinct_entities();
            for &e in &distinct {
                entity_tuples[e.index()].push(id);
                entity_relations[e.index()].push(t.relation);
                relation_entities[t.relation.index()].push(e);
                neighbors[e.index()].extend(distinct.iter().copied().filter(|&o| o != e));
            }
        }

        for list in &mut entity_tuples {
            list.sort_unstable_by_key(|t| (tuples[t.index()].relation, *t));
        }
        for list in &mut relation_entities {
            list.sort_unstable();
            list.dedup();
        }
        for list in &mut entity_relations {
            list.sort_unstable();
            list.dedup();
        }
        for list in &mut neighbors {
            list.sort_unstable();
            list.dedup();
        }

        // Two relations are incident iff some entity carries both.
        let mut incident: Vec<Vec<RelationId>> = vec![Vec::new(); num_relations];
        for rels in &entity_relations {
            for &a in rels {
                incident[a.index()].extend(rels.iter().copied().filter(|&b| b != a));
            }
        }
        for list in &mut incident {
            list.sort_unstable();
            list.dedup();
        }

        Ok(KnowledgeGraph {
            num_entities,
            num_relations,
            tuples,
            entity_tuples,
            relation_tuples,
            relation_entities,
            entity_relations,
            neighbors,
            incident,
        })
    }

    pub fn num_entities(&self) -> usize {
        self.num_entities
    }

    pub fn num_relations(&self) -> usize {
        self.num_relations
    }

    pub fn num_tuples(&self) -> usize {
        self.tuples.len()
    }

    pub fn tuples(&self) -> &[Tuple] {
        &self.tuples
    }

    pub fn tuple(&self, id: TupleId) -> &Tuple {
        &self.tuples[id.index()]
    }

    pub fn check_entity(&self, e: EntityId) -> Result<()> {
        if e.index() < self.num_entities {
            Ok(())
        } else {
            Err(Error::UnknownEntity(e.0))
        }
    }

    pub fn check_relation(&self, r: RelationId) -> Result<()> {
        if r.index() < self.num_relations {
            Ok(())
        } else {
            Err(Error::UnknownRelation(r.0))
        }
    }

    /// `E(r)`, ascending. Empty when `r` has no tuples.
    pub fn entities_of_relation(&self, r: RelationId) -> Result<&[EntityId]> {
        self.check_relation(r)?;
        Ok(&self.relation_entities[r.index()])
    }

    /// `R(e)`, ascending.
    pub fn relations_of_entity(&self, e: EntityId) -> Result<&[RelationId]> {
        self.check_entity(e)?;
        Ok(&self.entity_relations[e.index()])
    }

    /// Relations `r' != r` with `E(r') ∩ E(r) ≠ ∅` and `r'` not in `exclude`.
    pub fn incident_relations(&self, r: RelationId, exclude: &[RelationId]) -> Result<Vec<RelationId>> {
        self.check_relation(r)?;
        Ok(self.incident[r.index()]
            .iter()
            .copied()
            .filter(|x| !exclude.contains(x))
            .collect())
    }

    /// Entities co-occurring with `e` in some tuple, `e` itself excluded.
    pub fn neighbors(&self, e: EntityId) -> Result<&[EntityId]> {
        self.check_entity(e)?;
        Ok(&self.neighbors[e.index()])
    }

    pub fn tuples_of_entity(&self, e: EntityId) -> Result<&[TupleId]> {
        self.check_entity(e)?;
        Ok(&self.entity_tuples[e.index()])
    }

    pub fn tuples_of_relation(&self, r: RelationId) -> Result<&[TupleId]> {
        self.check_relation(r)?;
        Ok(&self.relation_tuples[r.index()])
    }

    /// Tuples of relation `r` that contain `e`, ascending by tuple id.
    pub fn tuples_of_entity_with_relation(&self, e: EntityId, r: RelationId) -> &[TupleId] {
        let list = &self.entity_tuples[e.index()];
        let lo = list.partition_point(|t| self.tuples[t.index()].relation < r);
        let hi = list.partition_point(|t| self.tuples[t.index()].relation <= r);
        &list[lo..hi]
    }

    pub fn max_arity(&self) -> usize {
        self.tuples.iter().map(Tuple::arity).max().unwrap_or(0)
    }
}

/// Size of the intersection of two ascending, duplicate-free slices.
pub(crate) fn sorted_intersection_len<T: Ord>(a: &[T], b: &[T]) -> usize {
    let (mut i, mut j, mut n) = (0, 0, 0);
    while i < a.len() && j < b.len() {
        match a[i].cmp(&b[j]) {
            std::cmp::Ordering::Less => i += 1,
            std::cmp::Ordering::Greater => j += 1,
            std::cmp::Ordering::Equal => {
                n += 1;
                i += 1;
                j += 1;
            }
        }
    }
    n
}
