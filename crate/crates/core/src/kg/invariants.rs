//! Structural checks over graphs and splits, written as a direct pass over
//! the emitted data rather than through the construction code paths.

use std::collections::{BTreeSet, HashSet};

use super::candidates::RankingMode;
use super::graph::KnowledgeGraph;
use super::split::TaskSplit;

pub fn check_graph(graph: &KnowledgeGraph) -> Vec<String> {
    let mut bad = Vec::new();
    let (ne, nr) = (graph.num_entities(), graph.num_relations());
    let mut seen = HashSet::new();
    for t in graph.triples() {
        if t.head.index() >= ne || t.tail.index() >= ne || t.relation.index() >= nr {
            bad.push(format!("triple {t:?} out of vocabulary"));
        }
        if !seen.insert(*t) {
            bad.push(format!("duplicate triple {t:?}"));
        }
    }
    let mut total = 0;
    for e in graph.entity_ids() {
        let listed: BTreeSet<_> = graph.neighbors(e).map(|n| n.iter().copied().collect()).unwrap_or_default();
        let expected: BTreeSet<_> = graph
            .triples()
            .iter()
            .filter(|t| t.head == e)
            .map(|t| (t.relation, t.tail))
            .collect();
        total += graph.neighbors(e).map(<[_]>::len).unwrap_or(0);
        if listed != expected {
            bad.push(format!("neighbor index of {e} disagrees with triples"));
        }
    }
    if total != graph.triples().len() {
        bad.push(format!(
            "neighbor index holds {total} entries for {} triples",
            graph.triples().len()
        ));
    }
    bad
}

pub fn check_split(
    split: &TaskSplit,
    full: &KnowledgeGraph,
    background: &KnowledgeGraph,
    max_candidates: usize,
    ranking: RankingMode,
) -> Vec<String> {
    let mut bad = Vec::new();
    let parts = [&split.meta_train, &split.meta_valid, &split.meta_test];
    let sets: Vec<HashSet<_>> = parts
        .iter()
        .map(|p| p.iter().map(|t| t.relation).collect())
        .collect();
    for i in 0..3 {
        for j in i + 1..3 {
            if !sets[i].is_disjoint(&sets[j]) {
                bad.push(format!("partitions {i} and {j} share relations"));
            }
        }
    }
    let task_rels: HashSet<_> = sets.iter().flatten().copied().collect();
    if background.triples().iter().any(|t| task_rels.contains(&t.relation)) {
        bad.push("background graph contains a task relation".into());
    }
    for task in parts.iter().flat_map(|p| p.iter()) {
        let r = task.relation;
        let train: HashSet<_> = task.train_pairs.iter().copied().collect();
        for &(h, t) in &task.train_pairs {
            if !full.contains(h, r, t) {
                bad.push(format!("train pair ({h}, {t}) of {r} is not a triple"));
            }
        }
        for p in &task.test_pairs {
            if !full.contains(p.head, r, p.tail) {
                bad.push(format!("test pair ({}, {}) of {r} is not a triple", p.head, p.tail));
            }
            if train.contains(&(p.head, p.tail)) {
                bad.push(format!("test pair ({}, {}) of {r} is also a train pair", p.head, p.tail));
            }
            let c = &p.candidates;
            if c.candidates.len() > max_candidates {
                bad.push(format!("candidate set of ({}, {r}) exceeds cap", p.head));
            }
            if c.candidates.iter().any(|e| e.index() >= full.num_entities()) {
                bad.push("candidate outside entity vocabulary".into());
            }
            if !c.true_tails.iter().all(|t| c.candidates.contains(t)) {
                bad.push(format!("truth missing from candidates of ({}, {r})", p.head));
            }
            if ranking == RankingMode::Filtered
                && c.candidates
                    .iter()
                    .any(|&e| e != p.tail && full.contains(p.head, r, e))
            {
                bad.push(format!("unfiltered true tail among candidates of ({}, {r})", p.head));
            }
        }
    }
    bad
}
