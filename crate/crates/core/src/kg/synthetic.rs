//! Seeded synthetic knowledge graphs with a learnable few-shot structure.
//!
//! Each task relation gets a slot `k` from a seeded permutation; it has tail
//! type `k mod n_types` and hub `x_{k mod n_hubs}`.
//! A handful of tail-type entities carry the background triple
//! `(t, b_x, x)`, with the signature relation `b_x` fixed per hub; true
//! tails of the relation are drawn from those entities (or, with
//! probability `noise_rate`, uniformly from the tail type). All entities
//! also get generic noise triples, so the signature has to be picked out of
//! a heterogeneous neighborhood.
//!
//! Hubs are shared across relations, and when `n_types` and `n_hubs` are
//! coprime every `(tail type, hub)` combination belongs to one relation.
//! Slots `0..train` form meta-train, so every hub and type is seen in
//! training about equally often. Being linked to a hub is therefore
//! positive evidence only relative to the reference pairs: memorizing which
//! hubs or tails were positive during training does not transfer.

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::graph::{EntityId, KnowledgeGraph, RelationId, Triple, Vocab};
use super::split::{build_split, Assignment, SplitConfig, SplitFile, TaskSplit};
use super::types::{TypeId, TypeMap};
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_entities: usize,
    pub n_types: usize,
    pub n_background_relations: usize,
    pub n_task_relations: usize,
    pub pairs_per_relation: usize,
    pub noise_rate: f64,
    /// Entities carrying a relation's signature triple.
    pub signature_tails: usize,
    /// Hub entities shared among the task relations.
    pub n_hubs: usize,
    /// Generic background triples emitted per entity.
    pub noise_degree: usize,
    /// `(train, valid, test)` relation counts; derived 60/15/25 when absent.
    pub split_counts: Option<(usize, usize, usize)>,
    pub few_shot: usize,
    pub max_candidates: usize,
}

impl Default for SynthSpec {
    fn default() -> Self {
        Self {
            n_entities: 200,
            n_types: 4,
            n_background_relations: 12,
            n_task_relations: 20,
            pairs_per_relation: 30,
            noise_rate: 0.0,
            signature_tails: 4,
            n_hubs: 5,
            noise_degree: 2,
            split_counts: None,
            few_shot: 3,
            max_candidates: 1000,
        }
    }
}

/// The structure planted for one task relation.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PlantedRule {
    pub relation: RelationId,
    pub tail_type: TypeId,
    pub signature: RelationId,
    pub hub: EntityId,
    pub signature_tails: Vec<EntityId>,
}

#[derive(Debug, Clone)]
pub struct SyntheticKg {
    pub graph: KnowledgeGraph,
    pub background: KnowledgeGraph,
    pub split: TaskSplit,
    pub split_file: SplitFile,
    pub split_config: SplitConfig,
    pub types: TypeMap,
    pub rules: Vec<PlantedRule>,
}

impl SyntheticKg {
    /// Whether `(head, relation, tail)` follows the planted rule.
    pub fn follows_rule(&self, relation: RelationId, tail: EntityId) -> bool {
        self.rules
            .iter()
            .find(|r| r.relation == relation)
            .is_some_and(|r| r.signature_tails.contains(&tail))
    }
}

impl SynthSpec {
    pub fn counts(&self) -> (usize, usize, usize) {
        self.split_counts.unwrap_or_else(|| {
            let n = self.n_task_relations;
            let valid = ((n as f64 * 0.15).round() as usize).max(1);
            let train = ((n as f64 * 0.6).round() as usize).max(1);
            (train, valid, n.saturating_sub(train + valid))
        })
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            ("n_entities", self.n_entities),
            ("n_types", self.n_types),
            ("n_task_relations", self.n_task_relations),
            ("pairs_per_relation", self.pairs_per_relation),
            ("signature_tails", self.signature_tails),
            ("n_hubs", self.n_hubs),
        ];
        for (name, v) in positive {
            if v == 0 {
                return Err(Error::Generation(format!("{name} must be positive")));
            }
        }
        if self.n_background_relations < 2 {
            return Err(Error::Generation(
                "need at least 2 background relations (signature + noise)".into(),
            ));
        }
        if !(0.0..1.0).contains(&self.noise_rate) {
            return Err(Error::Generation("noise_rate must lie in [0, 1)".into()));
        }
        if self.n_types > self.n_entities {
            return Err(Error::Generation("more types than entities".into()));
        }
        let smallest = self.n_entities / self.n_types;
        if self.pairs_per_relation > self.n_entities {
            return Err(Error::Generation(format!(
                "pairs_per_relation {} exceeds the {} distinct heads",
                self.pairs_per_relation, self.n_entities
            )));
        }
        if self.signature_tails >= smallest {
            return Err(Error::Generation("signature_tails must be smaller than a type".into()));
        }
        if self.n_hubs >= self.n_entities {
            return Err(Error::Generation("not enough entities for the hubs".into()));
        }
        let (train, valid, test) = self.counts();
        if train + valid + test != self.n_task_relations {
            return Err(Error::Generation(format!(
                "split counts {train}/{valid}/{test} do not cover {} task relations",
                self.n_task_relations
            )));
        }
        if self.pairs_per_relation <= self.few_shot {
            return Err(Error::Generation("pairs_per_relation must exceed few_shot".into()));
        }
        Ok(())
    }
}

pub fn generate_synthetic_kg(spec: &SynthSpec, seed: u64) -> Result<SyntheticKg> {
    spec.validate()?;
    let mut rng = rng::seeded(seed);

    let mut entities = Vocab::new();
    let mut by_type: Vec<Vec<EntityId>> = vec![Vec::new(); spec.n_types];
    let mut type_rows = Vec::with_capacity(spec.n_entities);
    for i in 0..spec.n_entities {
        let ty = i % spec.n_types;
        let id = EntityId(entities.intern(&format!("synth:t{ty}:e{i:04}")));
        by_type[ty].push(id);
        type_rows.push(format!("synth:t{ty}"));
    }
    let n_sig = (spec.n_background_relations / 2).max(1);
    let mut relations = Vocab::new();
    let signature: Vec<RelationId> = (0..n_sig)
        .map(|j| RelationId(relations.intern(&format!("bg:sig{j}"))))
        .collect();
    let noise: Vec<RelationId> = (n_sig..spec.n_background_relations)
        .map(|j| RelationId(relations.intern(&format!("bg:noise{j}"))))
        .collect();
    let tasks: Vec<RelationId> = (0..spec.n_task_relations)
        .map(|j| RelationId(relations.intern(&format!("task:r{j:02}"))))
        .collect();

    let n = spec.n_entities as u32;
    let mut triples = Vec::new();
    for e in 0..n {
        for _ in 0..spec.noise_degree {
            let rel = noise[rng.gen_range(0..noise.len())];
            let mut tail = rng.gen_range(0..n - 1);
            if tail >= e {
                tail += 1;
            }
            triples.push(Triple {
                head: EntityId(e),
                relation: rel,
                tail: EntityId(tail),
            });
        }
    }

    let hubs: Vec<EntityId> = index::sample(&mut rng, spec.n_entities, spec.n_hubs)
        .into_iter()
        .map(|i| EntityId(i as u32))
        .collect();
    let slots: Vec<usize> = index::sample(&mut rng, tasks.len(), tasks.len()).into_vec();
    let mut rules = Vec::with_capacity(tasks.len());
    for (&rel, &k) in tasks.iter().zip(&slots) {
        let tail_type = k % spec.n_types;
        let head_type = rng.gen_range(0..spec.n_types);
        let hub = hubs[k % hubs.len()];
        let sig = signature[(k % hubs.len()) % signature.len()];
        let pool: Vec<EntityId> = by_type[tail_type]
            .iter()
            .copied()
            .filter(|e| !hubs.contains(e))
            .collect();
        if pool.len() < spec.signature_tails {
            return Err(Error::Generation("tail type too small for its signature tails".into()));
        }
        let sig_tails: Vec<EntityId> = index::sample(&mut rng, pool.len(), spec.signature_tails)
            .into_iter()
            .map(|i| pool[i])
            .collect();
        for &t in &sig_tails {
            triples.push(Triple {
                head: t,
                relation: sig,
                tail: hub,
            });
        }
        // heads come from one type, spilling into the following types if it is too small
        let mut heads: Vec<EntityId> = Vec::new();
        for step in 0..spec.n_types {
            if heads.len() >= spec.pairs_per_relation {
                break;
            }
            heads.extend(&by_type[(head_type + step) % spec.n_types]);
        }
        for i in index::sample(&mut rng, heads.len(), spec.pairs_per_relation) {
            let tail = if rng.gen_bool(spec.noise_rate) {
                by_type[tail_type][rng.gen_range(0..by_type[tail_type].len())]
            } else {
                sig_tails[rng.gen_range(0..sig_tails.len())]
            };
            triples.push(Triple {
                head: heads[i],
                relation: rel,
                tail,
            });
        }
        rules.push(PlantedRule {
            relation: rel,
            tail_type: TypeId(tail_type as u32),
            signature: sig,
            hub,
            signature_tails: sig_tails,
        });
    }

    let graph = KnowledgeGraph::new(entities, relations, triples);
    let types = TypeMap::from_rows(
        &graph,
        graph
            .entities()
            .iter()
            .zip(type_rows.iter())
            .map(|(e, t)| (e, t.as_str())),
    )?;
    let (train, valid, _) = spec.counts();
    let split_config = SplitConfig {
        min_triples: 1,
        max_triples: spec.pairs_per_relation,
        few_shot: spec.few_shot,
        max_candidates: spec.max_candidates,
        seed,
        ..SplitConfig::default()
    };
    let mut file = SplitFile {
        meta_train: Vec::new(),
        meta_valid: Vec::new(),
        meta_test: Vec::new(),
        min_triples: None,
        max_triples: None,
    };
    for (&rel, &k) in tasks.iter().zip(&slots) {
        let part = if k < train {
            &mut file.meta_train
        } else if k < train + valid {
            &mut file.meta_valid
        } else {
            &mut file.meta_test
        };
        part.push(graph.relation_name(rel).to_string());
    }
    let (split, background) = build_split(
        &graph,
        &tasks,
        &Assignment::Explicit(file),
        &types,
        &split_config,
    )?;
    let mut split_file = split.to_file(&graph);
    split_file.min_triples = Some(split_config.min_triples);
    split_file.max_triples = Some(split_config.max_triples);
    Ok(SyntheticKg {
        graph,
        background,
        split,
        split_file,
        split_config,
        types,
        rules,
    })
}
