use std::collections::BTreeSet;

use rand::seq::index;
use serde::{Deserialize, Serialize};

use super::graph::{EntityId, KnowledgeGraph, RelationId};
use super::types::TypeMap;
use crate::error::{Error, Result};
use crate::rng;

/// Default cap on candidate tails per query.
pub const DEFAULT_MAX_CANDIDATES: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum RankingMode {
    /// Other known true tails of `(head, relation)` are removed.
    #[default]
    Filtered,
    /// Other known true tails stay in the list as ordinary candidates.
    Raw,
}

/// `C_{h,r}` for one scored tail.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct CandidateSet {
    pub query_head: EntityId,
    pub relation: RelationId,
    /// Sorted by entity id.
    pub candidates: Vec<EntityId>,
    pub true_tails: Vec<EntityId>,
}

/// Entities whose type matches the type of some true tail of `relation`.
pub fn tail_pool(graph: &KnowledgeGraph, relation: RelationId, types: &TypeMap) -> Vec<EntityId> {
    let wanted: BTreeSet<_> = graph
        .triples()
        .iter()
        .filter(|t| t.relation == relation)
        .map(|t| types.type_of(t.tail))
        .collect();
    graph
        .entity_ids()
        .filter(|&e| wanted.contains(&types.type_of(e)))
        .collect()
}

/// Candidates for ranking `tail` as the answer to `(head, relation, ?)`,
/// drawn from a precomputed type pool.
#[allow(clippy::too_many_arguments)]
pub fn candidates_from_pool(
    pool: &[EntityId],
    known_tails: &[EntityId],
    head: EntityId,
    relation: RelationId,
    tail: EntityId,
    max_candidates: usize,
    mode: RankingMode,
    seed: u64,
) -> Result<CandidateSet> {
    if max_candidates == 0 {
        return Err(Error::Config("max_candidates must be positive".into()));
    }
    if !known_tails.contains(&tail) {
        return Err(Error::Config(format!(
            "{tail} is not a true tail of ({head}, {relation})"
        )));
    }
    let mut others: Vec<EntityId> = pool
        .iter()
        .copied()
        .filter(|&e| e != tail)
        .filter(|e| mode == RankingMode::Raw || !known_tails.contains(e))
        .collect();
    if others.len() + 1 > max_candidates {
        let mut rng = rng::derived(seed, &[relation.0 as u64, head.0 as u64, tail.0 as u64]);
        let mut keep: Vec<usize> = index::sample(&mut rng, others.len(), max_candidates - 1).into_vec();
        keep.sort_unstable();
        others = keep.into_iter().map(|i| others[i]).collect();
    }
    others.push(tail);
    others.sort_unstable();
    Ok(CandidateSet {
        query_head: head,
        relation,
        candidates: others,
        true_tails: vec![tail],
    })
}

/// Type-constrained candidate set for one true `(head, relation, tail)`.
#[allow(clippy::too_many_arguments)]
pub fn build_candidates(
    graph: &KnowledgeGraph,
    head: EntityId,
    relation: RelationId,
    tail: EntityId,
    types: &TypeMap,
    max_candidates: usize,
    mode: RankingMode,
    seed: u64,
) -> Result<CandidateSet> {
    let known = graph.tails_of(head, relation);
    if known.is_empty() {
        return Err(Error::EmptyTruth {
            head: graph.entity_name(head).to_string(),
            relation: graph.relation_name(relation).to_string(),
        });
    }
    let pool = tail_pool(graph, relation, types);
    candidates_from_pool(&pool, known, head, relation, tail, max_candidates, mode, seed)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kg::types::TypeMap;

    /// `n` person entities, one company; `q` relates heads to persons.
    fn people(n: usize, truths: &[usize]) -> (KnowledgeGraph, TypeMap) {
        let names: Vec<String> = (0..n).map(|i| format!("c:person:p{i}")).collect();
        let mut rows: Vec<(&str, &str, &str)> = names
            .iter()
            .map(|p| ("c:company:acme", "employs", p.as_str()))
            .collect();
        for &t in truths {
            rows.push(("c:exec:boss", "q", names[t].as_str()));
        }
        let g = KnowledgeGraph::from_named(rows);
        let tm = TypeMap::from_prefix_rule(&g);
        (g, tm)
    }

    #[test]
    fn type_constraint_yields_all_matching_entities() {
        let (g, tm) = people(10, &[3]);
        let q = g.relation("q").unwrap();
        let h = g.entity("c:exec:boss").unwrap();
        let t = g.entity("c:person:p3").unwrap();
        let c = build_candidates(&g, h, q, t, &tm, 1000, RankingMode::Filtered, 0).unwrap();
        assert_eq!(c.candidates.len(), 10);
        assert!(c.candidates.contains(&t));
        assert_eq!(c.true_tails, vec![t]);
    }

    #[test]
    fn truncation_retains_truth() {
        let (g, tm) = people(5000, &[4321]);
        let q = g.relation("q").unwrap();
        let h = g.entity("c:exec:boss").unwrap();
        let t = g.entity("c:person:p4321").unwrap();
        let c = build_candidates(&g, h, q, t, &tm, 1000, RankingMode::Filtered, 9).unwrap();
        assert_eq!(c.candidates.len(), 1000);
        assert!(c.candidates.contains(&t));
        let again = build_candidates(&g, h, q, t, &tm, 1000, RankingMode::Filtered, 9).unwrap();
        assert_eq!(c, again);
    }

    #[test]
    fn filtered_mode_drops_other_true_tails() {
        let (g, tm) = people(6, &[1, 2]);
        let q = g.relation("q").unwrap();
        let h = g.entity("c:exec:boss").unwrap();
        let t1 = g.entity("c:person:p1").unwrap();
        let t2 = g.entity("c:person:p2").unwrap();
        let c = build_candidates(&g, h, q, t1, &tm, 1000, RankingMode::Filtered, 0).unwrap();
        assert!(!c.candidates.contains(&t2));
        let raw = build_candidates(&g, h, q, t1, &tm, 1000, RankingMode::Raw, 0).unwrap();
        assert!(raw.candidates.contains(&t2));
    }

    #[test]
    fn missing_truth_is_an_error() {
        let (g, tm) = people(3, &[0]);
        let q = g.relation("q").unwrap();
        let other = g.entity("c:person:p1").unwrap();
        let err = build_candidates(&g, other, q, other, &tm, 10, RankingMode::Filtered, 0);
        assert!(matches!(err, Err(Error::EmptyTruth { .. })));
    }
}
