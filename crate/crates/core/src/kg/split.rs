use std::collections::{BTreeMap, HashSet};
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::candidates::{candidates_from_pool, tail_pool, CandidateSet, RankingMode};
use super::graph::{EntityId, KnowledgeGraph, RelationId};
use super::types::TypeMap;
use crate::error::{Error, Result};
use crate::rng;

/// Split construction parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitConfig {
    pub min_triples: usize,
    pub max_triples: usize,
    /// Reference pairs fixed per meta-valid/meta-test relation.
    pub few_shot: usize,
    pub max_candidates: usize,
    pub ranking: RankingMode,
    pub seed: u64,
}

impl Default for SplitConfig {
    fn default() -> Self {
        Self {
            min_triples: 50,
            max_triples: 500,
            few_shot: 3,
            max_candidates: super::candidates::DEFAULT_MAX_CANDIDATES,
            ranking: RankingMode::Filtered,
            seed: 0,
        }
    }
}

/// `split.json`: relation names per partition, plus an optional frequency
/// band the split was built with.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize, Default)]
pub struct SplitFile {
    pub meta_train: Vec<String>,
    pub meta_valid: Vec<String>,
    pub meta_test: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_triples: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_triples: Option<usize>,
}

impl SplitFile {
    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text)?;
        Ok(())
    }

    pub fn all(&self) -> impl Iterator<Item = &String> {
        self.meta_train
            .iter()
            .chain(&self.meta_valid)
            .chain(&self.meta_test)
    }
}

/// How task relations are distributed over the three partitions.
#[derive(Debug, Clone, PartialEq)]
pub enum Assignment {
    Explicit(SplitFile),
    /// Seeded shuffle of the task relations, then cut into these sizes.
    Counts { train: usize, valid: usize, test: usize },
}

impl Assignment {
    /// Sizes from fractions; the test partition takes the remainder.
    pub fn fractions(n: usize, train: f64, valid: f64) -> Self {
        let tr = (n as f64 * train).round() as usize;
        let va = ((n as f64 * valid).round() as usize).min(n.saturating_sub(tr));
        Assignment::Counts {
            train: tr,
            valid: va,
            test: n - tr - va,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestPair {
    pub head: EntityId,
    pub tail: EntityId,
    pub candidates: CandidateSet,
}

/// One few-shot relation `D_r = {P_train, P_test}`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationTask {
    pub relation: RelationId,
    pub train_pairs: Vec<(EntityId, EntityId)>,
    pub test_pairs: Vec<TestPair>,
    /// Type-constrained tail candidates of the relation.
    pub tail_pool: Vec<EntityId>,
    /// All known tails per head in the full graph.
    pub true_tails: BTreeMap<EntityId, Vec<EntityId>>,
}

impl RelationTask {
    pub fn is_true(&self, head: EntityId, tail: EntityId) -> bool {
        self.true_tails
            .get(&head)
            .is_some_and(|ts| ts.contains(&tail))
    }

    /// Every known pair of this relation.
    pub fn all_pairs(&self) -> Vec<(EntityId, EntityId)> {
        self.true_tails
            .iter()
            .flat_map(|(&h, ts)| ts.iter().map(move |&t| (h, t)))
            .collect()
    }

    /// Reference set with canonical `(head, tail)` order.
    pub fn reference(&self) -> Vec<(EntityId, EntityId)> {
        let mut r = self.train_pairs.clone();
        r.sort_unstable();
        r
    }

    /// Fixes `k` reference pairs and turns the rest into ranked queries.
    fn partition(
        &mut self,
        pairs: &[(EntityId, EntityId)],
        k: usize,
        cfg: &SplitConfig,
        graph: &KnowledgeGraph,
    ) -> Result<()> {
        if pairs.len() <= k {
            return Err(Error::SkipTask(graph.relation_name(self.relation).to_string()));
        }
        let mut order = pairs.to_vec();
        order.shuffle(&mut rng::derived(cfg.seed, &[0x5eed, self.relation.0 as u64]));
        self.train_pairs = order[..k].to_vec();
        self.test_pairs = order[k..]
            .iter()
            .map(|&(head, tail)| {
                let known = &self.true_tails[&head];
                let candidates = candidates_from_pool(
                    &self.tail_pool,
                    known,
                    head,
                    self.relation,
                    tail,
                    cfg.max_candidates,
                    cfg.ranking,
                    cfg.seed,
                )?;
                Ok(TestPair {
                    head,
                    tail,
                    candidates,
                })
            })
            .collect::<Result<_>>()?;
        Ok(())
    }

    /// Re-draws the fixed reference set with a different few-shot size.
    pub fn with_few_shot(
        &self,
        k: usize,
        cfg: &SplitConfig,
        graph: &KnowledgeGraph,
    ) -> Result<Self> {
        let mut pairs: Vec<_> = self.train_pairs.clone();
        pairs.extend(self.test_pairs.iter().map(|p| (p.head, p.tail)));
        pairs.sort_unstable();
        let mut task = self.clone();
        task.partition(&pairs, k, cfg, graph)?;
        Ok(task)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TaskSplit {
    pub meta_train: Vec<RelationTask>,
    pub meta_valid: Vec<RelationTask>,
    pub meta_test: Vec<RelationTask>,
}

impl TaskSplit {
    pub fn relations(&self) -> impl Iterator<Item = RelationId> + '_ {
        self.meta_train
            .iter()
            .chain(&self.meta_valid)
            .chain(&self.meta_test)
            .map(|t| t.relation)
    }

    pub fn to_file(&self, graph: &KnowledgeGraph) -> SplitFile {
        let names = |ts: &[RelationTask]| {
            ts.iter()
                .map(|t| graph.relation_name(t.relation).to_string())
                .collect()
        };
        SplitFile {
            meta_train: names(&self.meta_train),
            meta_valid: names(&self.meta_valid),
            meta_test: names(&self.meta_test),
            min_triples: None,
            max_triples: None,
        }
    }

    /// Same partitions with evaluation reference sets of size `k`.
    pub fn with_few_shot(&self, k: usize, cfg: &SplitConfig, graph: &KnowledgeGraph) -> Result<Self> {
        let redo = |ts: &[RelationTask]| {
            ts.iter()
                .map(|t| t.with_few_shot(k, cfg, graph))
                .collect::<Result<Vec<_>>>()
        };
        Ok(Self {
            meta_train: self.meta_train.clone(),
            meta_valid: redo(&self.meta_valid)?,
            meta_test: redo(&self.meta_test)?,
        })
    }
}

fn resolve(graph: &KnowledgeGraph, names: &[String]) -> Result<Vec<RelationId>> {
    names.iter().map(|n| graph.relation(n)).collect()
}

/// Partitions the task relations and derives the background graph `G′`
/// (the full graph minus every task-relation triple).
pub fn build_split(
    graph: &KnowledgeGraph,
    task_relations: &[RelationId],
    assignment: &Assignment,
    types: &TypeMap,
    cfg: &SplitConfig,
) -> Result<(TaskSplit, KnowledgeGraph)> {
    let counts = graph.relation_counts();
    let out_of_band: Vec<String> = task_relations
        .iter()
        .filter(|r| {
            let c = counts.get(r.index()).copied().unwrap_or(0);
            c < cfg.min_triples || c > cfg.max_triples
        })
        .map(|&r| graph.relation_name(r).to_string())
        .collect();
    if !out_of_band.is_empty() {
        return Err(Error::FrequencyBand {
            min: cfg.min_triples,
            max: cfg.max_triples,
            relations: out_of_band,
        });
    }

    let (train, valid, test) = match assignment {
        Assignment::Explicit(file) => (
            resolve(graph, &file.meta_train)?,
            resolve(graph, &file.meta_valid)?,
            resolve(graph, &file.meta_test)?,
        ),
        Assignment::Counts { train, valid, test } => {
            if train + valid + test != task_relations.len() {
                return Err(Error::Config(format!(
                    "split sizes {train}/{valid}/{test} do not cover {} task relations",
                    task_relations.len()
                )));
            }
            let mut shuffled = task_relations.to_vec();
            shuffled.shuffle(&mut rng::derived(cfg.seed, &[0xa55]));
            let (a, rest) = shuffled.split_at(*train);
            let (b, c) = rest.split_at(*valid);
            (a.to_vec(), b.to_vec(), c.to_vec())
        }
    };
    if train.is_empty() || valid.is_empty() || test.is_empty() {
        return Err(Error::Config(format!(
            "every partition must be nonempty (got {}/{}/{})",
            train.len(),
            valid.len(),
            test.len()
        )));
    }
    let wanted: HashSet<RelationId> = task_relations.iter().copied().collect();
    let mut seen = HashSet::new();
    for r in train.iter().chain(&valid).chain(&test) {
        if !wanted.contains(r) || !seen.insert(*r) {
            return Err(Error::Config(format!(
                "relation `{}` is unassigned, foreign or assigned twice",
                graph.relation_name(*r)
            )));
        }
    }
    if seen.len() != wanted.len() {
        return Err(Error::Config("assignment leaves task relations uncovered".into()));
    }

    let make = |r: RelationId, partition: bool| -> Result<RelationTask> {
        let mut pairs = graph.pairs_of(r);
        pairs.sort_unstable();
        let mut true_tails: BTreeMap<EntityId, Vec<EntityId>> = BTreeMap::new();
        for &(h, t) in &pairs {
            true_tails.entry(h).or_default().push(t);
        }
        let mut task = RelationTask {
            relation: r,
            train_pairs: pairs.clone(),
            test_pairs: Vec::new(),
            tail_pool: tail_pool(graph, r, types),
            true_tails,
        };
        if partition {
            task.partition(&pairs, cfg.few_shot, cfg, graph)?;
        }
        Ok(task)
    };
    let split = TaskSplit {
        meta_train: train.iter().map(|&r| make(r, false)).collect::<Result<_>>()?,
        meta_valid: valid.iter().map(|&r| make(r, true)).collect::<Result<_>>()?,
        meta_test: test.iter().map(|&r| make(r, true)).collect::<Result<_>>()?,
    };
    let background = graph.restrict(|r| !wanted.contains(&r));
    Ok((split, background))
}

/// Relations whose triple count lies in `[min, max]`.
pub fn relations_in_band(graph: &KnowledgeGraph, min: usize, max: usize) -> Vec<RelationId> {
    graph
        .relation_counts()
        .into_iter()
        .enumerate()
        .filter(|&(_, c)| c >= min && c <= max)
        .map(|(i, _)| RelationId(i as u32))
        .collect()
}
