//! Ranking evaluation: pessimistic-tie ranks, Hits@k and MRR, per-relation
//! reports, variant and few-shot-size experiments, embedding export.

pub mod experiments;
pub mod export;

use std::collections::HashSet;
use std::fmt::Write as _;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub use experiments::{
    median, run_ablation_matrix, sweep_few_shot_size, AblationReport, AblationRow, SweepPoint, SweepReport,
};
pub use export::{export_embeddings, principal_components, ExportRow, ExportTable};

use crate::error::{Error, Result};
use crate::kg::{EmbeddingTable, EntityId, KnowledgeGraph, RelationId, RelationTask, TestPair};
use crate::model::{EncodingCache, Forward, Fsrl, NeighborSampling};
use crate::scalar::Scalar;

/// Cutoffs reported as Hits@k.
pub const HITS_AT: [usize; 3] = [1, 5, 10];

/// Ranking outcome of one query.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct QueryResult {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
    pub rank: usize,
    pub candidates: usize,
}

/// `1 + #{j ≠ truth : s_j ≥ s_truth}`; ties rank against the truth, and
/// so does any incomparable (NaN) score.
pub fn rank_of<S: Scalar>(scores: &[S], truth: usize) -> Result<usize> {
    if scores.is_empty() {
        return Err(Error::Empty("rank_of"));
    }
    let s = *scores.get(truth).ok_or(Error::LengthMismatch {
        op: "rank_of",
        left: truth,
        right: scores.len(),
    })?;
    Ok(1 + scores
        .iter()
        .enumerate()
        .filter(|&(j, &x)| j != truth && !(x < s))
        .count())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    pub hits_at_1: f64,
    pub hits_at_5: f64,
    pub hits_at_10: f64,
    pub mrr: f64,
    pub queries: usize,
}

impl Metrics {
    pub fn hits(&self) -> [f64; 3] {
        [self.hits_at_1, self.hits_at_5, self.hits_at_10]
    }

    /// `0 ≤ H@1 ≤ H@5 ≤ H@10 ≤ 1` and `0 < MRR ≤ 1`.
    pub fn is_lawful(&self) -> bool {
        let h = self.hits();
        (0.0..=1.0).contains(&h[0])
            && h[0] <= h[1]
            && h[1] <= h[2]
            && h[2] <= 1.0
            && self.mrr > 0.0
            && self.mrr <= 1.0
    }
}

/// Query-averaged metrics.
pub fn compute_metrics(results: &[QueryResult]) -> Result<Metrics> {
    if results.is_empty() {
        return Err(Error::Empty("compute_metrics"));
    }
    let n = results.len() as f64;
    let hits = |k: usize| results.iter().filter(|r| r.rank <= k).count() as f64 / n;
    Ok(Metrics {
        hits_at_1: hits(HITS_AT[0]),
        hits_at_5: hits(HITS_AT[1]),
        hits_at_10: hits(HITS_AT[2]),
        mrr: results.iter().map(|r| 1.0 / r.rank as f64).sum::<f64>() / n,
        queries: results.len(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RelationMetrics {
    pub relation: String,
    pub metrics: Metrics,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub fingerprint: String,
    pub aggregate: Metrics,
    pub relations: Vec<RelationMetrics>,
}

impl EvalReport {
    pub fn is_lawful(&self) -> bool {
        self.aggregate.is_lawful() && self.relations.iter().all(|r| r.metrics.is_lawful())
    }

    pub fn with_fingerprint(mut self, fingerprint: impl Into<String>) -> Self {
        self.fingerprint = fingerprint.into();
        self
    }

    /// Aligned human-readable table; the aggregate row comes last.
    pub fn table(&self) -> String {
        let width = self
            .relations
            .iter()
            .map(|r| r.relation.len())
            .chain([9])
            .max()
            .unwrap_or(9);
        let mut out = String::new();
        let _ = writeln!(out, "# fingerprint {}", self.fingerprint);
        let _ = writeln!(
            out,
            "{:<width$}  {:>7}  {:>7}  {:>7}  {:>7}  {:>7}",
            "relation", "queries", "hits@1", "hits@5", "hits@10", "mrr"
        );
        let row = |out: &mut String, name: &str, m: &Metrics| {
            let _ = writeln!(
                out,
                "{name:<width$}  {:>7}  {:>7.4}  {:>7.4}  {:>7.4}  {:>7.4}",
                m.queries, m.hits_at_1, m.hits_at_5, m.hits_at_10, m.mrr
            );
        };
        for r in &self.relations {
            row(&mut out, &r.relation, &r.metrics);
        }
        row(&mut out, "aggregate", &self.aggregate);
        out
    }
}

/// Hex SHA-256 of the canonical JSON of a configuration value.
pub fn fingerprint<T: Serialize>(config: &T) -> Result<String> {
    let value = serde_json::to_value(config)?;
    let bytes = serde_json::to_vec(&value)?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

/// Scores every candidate of `pair` against the encoded reference; one
/// result per true tail in the candidate set.
pub fn rank_candidates<S: Scalar>(
    fwd: &mut Forward<'_, S>,
    reference: &crate::model::Reference,
    relation: RelationId,
    pair: &TestPair,
) -> Result<Vec<QueryResult>> {
    let c = &pair.candidates;
    if c.candidates.is_empty() {
        return Err(Error::Empty("rank_candidates"));
    }
    let scores = c
        .candidates
        .iter()
        .map(|&t| {
            let s = fwd.score_pair(pair.head, t, reference)?;
            Ok(fwd.tape().scalar_value(s))
        })
        .collect::<Result<Vec<S>>>()?;
    c.true_tails
        .iter()
        .map(|&truth| {
            let idx = c.candidates.iter().position(|&e| e == truth).ok_or_else(|| Error::EmptyTruth {
                head: pair.head.to_string(),
                relation: relation.to_string(),
            })?;
            Ok(QueryResult {
                head: pair.head,
                relation,
                tail: truth,
                rank: rank_of(&scores, idx)?,
                candidates: scores.len(),
            })
        })
        .collect()
}

fn task_entities(task: &RelationTask) -> impl Iterator<Item = EntityId> + '_ {
    task.train_pairs
        .iter()
        .flat_map(|&(h, t)| [h, t])
        .chain(task.test_pairs.iter().flat_map(|p| {
            std::iter::once(p.head).chain(p.candidates.candidates.iter().copied())
        }))
}

/// Per-query results of every task, in task then query order.
pub fn rank_tasks<S: Scalar>(
    model: &Fsrl<S>,
    tasks: &[RelationTask],
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
) -> Result<Vec<Vec<QueryResult>>> {
    let entities: HashSet<EntityId> = tasks.iter().flat_map(task_entities).collect();
    let mut entities: Vec<_> = entities.into_iter().collect();
    entities.sort_unstable();
    let cache: EncodingCache<S> = entities
        .par_iter()
        .map(|&e| {
            let one = model.encode_entities(graph, table, [e])?;
            Ok((e, one.into_values().next().expect("one encoding")))
        })
        .collect::<Result<_>>()?;
    tasks
        .iter()
        .map(|task| {
            let reference = task.reference();
            task.test_pairs
                .par_iter()
                .map(|pair| {
                    let mut fwd = model
                        .forward(graph, table, NeighborSampling::Canonical)
                        .with_cache(&cache);
                    let r = fwd.reference(&reference)?;
                    rank_candidates(&mut fwd, &r, task.relation, pair)
                })
                .collect::<Result<Vec<_>>>()
                .map(|v| v.into_iter().flatten().collect())
        })
        .collect()
}

/// Deterministic evaluation of `tasks` against their fixed reference sets.
/// Tasks without test queries are left out of the per-relation rows.
pub fn evaluate_split<S: Scalar>(
    model: &Fsrl<S>,
    tasks: &[RelationTask],
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
) -> Result<EvalReport> {
    let per_task = rank_tasks(model, tasks, graph, table)?;
    let mut relations = Vec::new();
    for (task, results) in tasks.iter().zip(&per_task) {
        if results.is_empty() {
            continue;
        }
        relations.push(RelationMetrics {
            relation: graph.relation_name(task.relation).to_string(),
            metrics: compute_metrics(results)?,
        });
    }
    let all: Vec<QueryResult> = per_task.into_iter().flatten().collect();
    Ok(EvalReport {
        fingerprint: String::new(),
        aggregate: compute_metrics(&all)?,
        relations,
    })
}

/// `H_n / n`: expected MRR of a uniformly random ranking of `n` candidates.
pub fn random_ranking_mrr(n: usize) -> f64 {
    (1..=n).map(|r| 1.0 / r as f64).sum::<f64>() / n as f64
}
