//! Translation-based input embeddings: `score(h, r, t) = −‖e_h + e_r − e_t‖`
//! trained with a margin hinge against uniformly corrupted triples.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::kg::{EmbeddingTable, EntityId, KnowledgeGraph, RelationId, TaskSplit, Triple};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PretrainConfig {
    pub dim: usize,
    pub epochs: usize,
    pub margin: f64,
    pub lr: f64,
    pub seed: u64,
}

impl Default for PretrainConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            epochs: 50,
            margin: 1.0,
            lr: 0.01,
            seed: 0,
        }
    }
}

/// Background triples, every meta-train pair and the fixed reference pairs
/// of meta-valid and meta-test relations. Query pairs stay unseen.
pub fn pretraining_graph(full: &KnowledgeGraph, background: &KnowledgeGraph, split: &TaskSplit) -> KnowledgeGraph {
    let mut triples: Vec<Triple> = background.triples().to_vec();
    for task in split.meta_train.iter().chain(&split.meta_valid).chain(&split.meta_test) {
        triples.extend(task.train_pairs.iter().map(|&(head, tail)| Triple {
            head,
            relation: task.relation,
            tail,
        }));
    }
    KnowledgeGraph::new(full.entities().clone(), full.relations().clone(), triples)
}

pub fn transe_score<S: Scalar>(table: &EmbeddingTable<S>, h: EntityId, r: RelationId, t: EntityId) -> Result<S> {
    let (eh, er, et) = (table.entity(h)?, table.relation(r)?, table.entity(t)?);
    let sq: S = eh
        .iter()
        .zip(er)
        .zip(et)
        .map(|((&a, &b), &c)| (a + b - c) * (a + b - c))
        .sum();
    Ok(-sq.sqrt())
}

fn normalize<S: Scalar>(v: &mut [S]) {
    let n = v.iter().map(|&x| x * x).sum::<S>().sqrt();
    if n > S::zero() {
        v.iter_mut().for_each(|x| *x = *x / n);
    }
}

/// `x / ‖x‖` with `x = e_h + e_r − e_t`, zero at the origin.
fn direction<S: Scalar>(table: &EmbeddingTable<S>, t: &Triple) -> Result<(S, Vec<S>)> {
    let (eh, er, et) = (table.entity(t.head)?, table.relation(t.relation)?, table.entity(t.tail)?);
    let x: Vec<S> = (0..eh.len()).map(|i| eh[i] + er[i] - et[i]).collect();
    let n = x.iter().map(|&v| v * v).sum::<S>().sqrt();
    let dir = if n > S::zero() {
        x.iter().map(|&v| v / n).collect()
    } else {
        vec![S::zero(); x.len()]
    };
    Ok((n, dir))
}

fn apply<S: Scalar>(table: &mut EmbeddingTable<S>, t: &Triple, dir: &[S], step: S) {
    for (v, &g) in table.entity_mut(t.head).iter_mut().zip(dir) {
        *v = *v - step * g;
    }
    for (v, &g) in table.relation_mut(t.relation).iter_mut().zip(dir) {
        *v = *v - step * g;
    }
    for (v, &g) in table.entity_mut(t.tail).iter_mut().zip(dir) {
        *v = *v + step * g;
    }
}

/// SGD over shuffled triples; entity vectors are kept on the unit sphere.
pub fn pretrain_embeddings<S: Scalar>(graph: &KnowledgeGraph, cfg: &PretrainConfig) -> Result<EmbeddingTable<S>> {
    if cfg.dim == 0 {
        return Err(Error::Config("embedding dim must be positive".into()));
    }
    if !(cfg.margin > 0.0) || !(cfg.lr >= 0.0) {
        return Err(Error::Config("pretraining needs margin > 0 and lr >= 0".into()));
    }
    if graph.triples().is_empty() {
        return Err(Error::EmptyGraph("no pretraining triples".into()));
    }
    let mut r = rng::derived(cfg.seed, &[0x7e5e]);
    let bound = 6.0 / (cfg.dim as f64).sqrt();
    let draw = |n: usize, r: &mut rng::Rng| -> Vec<Vec<S>> {
        (0..n)
            .map(|_| (0..cfg.dim).map(|_| S::lit(r.gen_range(-bound..bound))).collect())
            .collect()
    };
    let mut entities = draw(graph.num_entities(), &mut r);
    let mut relations = draw(graph.num_relations(), &mut r);
    entities.iter_mut().for_each(|v| normalize(v));
    relations.iter_mut().for_each(|v| normalize(v));
    let mut table = EmbeddingTable::new(cfg.dim, entities, relations)?;

    let n = graph.num_entities() as u32;
    let (margin, lr) = (S::lit(cfg.margin), S::lit(cfg.lr));
    let mut order: Vec<Triple> = graph.triples().to_vec();
    for _ in 0..cfg.epochs {
        order.shuffle(&mut r);
        for pos in &order {
            let mut neg = *pos;
            for _ in 0..10 {
                let e = EntityId(r.gen_range(0..n));
                if r.gen_bool(0.5) {
                    neg.head = e;
                } else {
                    neg.tail = e;
                }
                if !graph.contains(neg.head, neg.relation, neg.tail) {
                    break;
                }
                neg = *pos;
            }
            if neg == *pos {
                continue;
            }
            let (dp, gp) = direction(&table, pos)?;
            let (dn, gn) = direction(&table, &neg)?;
            if margin + dp - dn <= S::zero() {
                continue;
            }
            apply(&mut table, pos, &gp, lr);
            apply(&mut table, &neg, &gn, -lr);
            for e in [pos.head, pos.tail, neg.head, neg.tail] {
                normalize(table.entity_mut(e));
            }
        }
    }
    Ok(table)
}
