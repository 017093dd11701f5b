use rand::seq::index;
use rand::RngCore;

use super::graph::{EntityId, KnowledgeGraph, RelationId, SELF_RELATION};
use crate::error::Result;

/// Default neighbor cap of the entity encoder.
pub const DEFAULT_MAX_NEIGHBORS: usize = 30;

pub type Neighbor = (RelationId, EntityId);

/// How to pick neighbors when an entity has more than the cap.
pub enum Sampling<'a> {
    /// First `max` of the neighbors sorted by `(relation, entity)` id.
    Canonical,
    /// Uniform without replacement.
    Random(&'a mut dyn RngCore),
}

/// Bounded neighbor list of `entity`; an isolated entity gets the single
/// pseudo-neighbor `(SELF_RELATION, entity)`.
pub fn sample_neighbors(
    graph: &KnowledgeGraph,
    entity: EntityId,
    max_neighbors: usize,
    sampling: Sampling<'_>,
) -> Result<Vec<Neighbor>> {
    let all = graph.neighbors(entity)?;
    if all.is_empty() || max_neighbors == 0 {
        return Ok(vec![(SELF_RELATION, entity)]);
    }
    match sampling {
        Sampling::Canonical => {
            let mut sorted = all.to_vec();
            sorted.sort_unstable();
            sorted.truncate(max_neighbors);
            Ok(sorted)
        }
        Sampling::Random(_) if all.len() <= max_neighbors => Ok(all.to_vec()),
        Sampling::Random(rng) => {
            let mut picked = index::sample(rng, all.len(), max_neighbors).into_vec();
            picked.sort_unstable();
            Ok(picked.into_iter().map(|i| all[i]).collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::error::Error;
    use crate::rng;

    fn star(n: usize) -> KnowledgeGraph {
        let names: Vec<String> = (0..n).map(|i| format!("t{i}")).collect();
        let rels: Vec<String> = (0..n).map(|i| format!("r{}", i % 7)).collect();
        KnowledgeGraph::from_named(
            names
                .iter()
                .zip(&rels)
                .map(|(t, r)| ("hub", r.as_str(), t.as_str())),
        )
    }

    #[test]
    fn small_neighborhoods_are_returned_whole() {
        let g = star(3);
        let hub = g.entity("hub").unwrap();
        let got = sample_neighbors(&g, hub, 30, Sampling::Canonical).unwrap();
        assert_eq!(got.len(), 3);
        let mut r = rng::seeded(1);
        assert_eq!(sample_neighbors(&g, hub, 30, Sampling::Random(&mut r)).unwrap().len(), 3);
    }

    #[test]
    fn isolated_entity_gets_self_loop() {
        let g = star(3);
        let leaf = g.entity("t0").unwrap();
        assert_eq!(
            sample_neighbors(&g, leaf, 30, Sampling::Canonical).unwrap(),
            vec![(SELF_RELATION, leaf)]
        );
    }

    #[test]
    fn seeded_sampling_is_reproducible() {
        let g = star(100);
        let hub = g.entity("hub").unwrap();
        let mut a = rng::seeded(5);
        let mut b = rng::seeded(5);
        let x = sample_neighbors(&g, hub, 30, Sampling::Random(&mut a)).unwrap();
        let y = sample_neighbors(&g, hub, 30, Sampling::Random(&mut b)).unwrap();
        assert_eq!(x.len(), 30);
        assert_eq!(x, y);
    }

    #[test]
    fn canonical_mode_is_pure_and_sorted() {
        let g = star(100);
        let hub = g.entity("hub").unwrap();
        let x = sample_neighbors(&g, hub, 30, Sampling::Canonical).unwrap();
        assert_eq!(x, sample_neighbors(&g, hub, 30, Sampling::Canonical).unwrap());
        assert!(x.windows(2).all(|w| w[0] <= w[1]));
    }

    #[test]
    fn unknown_entity_is_a_lookup_error() {
        let g = star(2);
        let err = sample_neighbors(&g, EntityId(999), 30, Sampling::Canonical);
        assert!(matches!(err, Err(Error::UnknownEntity(_))));
    }
}
