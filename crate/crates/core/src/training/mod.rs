//! Episodic meta-training: episode sampling, the joint hinge plus
//! reconstruction objective, and the clipped-Adam loop with early stopping
//! on meta-valid MRR.

pub mod pretrain;

use rand::seq::{index, SliceRandom};
use serde::{Deserialize, Serialize};

pub use pretrain::{pretrain_embeddings, pretraining_graph, transe_score, PretrainConfig};

use crate::diff::{adam_step, AdamConfig, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::evaluation::evaluate_split;
use crate::kg::{EmbeddingTable, EntityId, KnowledgeGraph, RelationId, RelationTask, TaskSplit};
use crate::model::{Forward, Fsrl, NeighborSampling};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    /// Reference pairs per episode, `K`.
    pub few_shot: usize,
    /// Positive queries per episode.
    pub batch_size: usize,
    /// Hinge margin `ξ`.
    pub margin: f64,
    /// Reconstruction weight `γ`.
    pub gamma: f64,
    pub adam: AdamConfig,
    pub max_episodes: usize,
    /// Episodes between meta-valid evaluations.
    pub eval_interval: usize,
    /// Evaluations without improvement before stopping.
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            few_shot: 3,
            batch_size: 64,
            margin: 5.0,
            gamma: 1e-4,
            adam: AdamConfig::default(),
            max_episodes: 20_000,
            eval_interval: 500,
            patience: 10,
            seed: 0,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Config(m.to_string()));
        if self.few_shot == 0 {
            return bad("few_shot must be at least 1");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be at least 1");
        }
        if !(self.margin > 0.0) {
            return bad("margin must be positive");
        }
        if !(self.gamma >= 0.0) {
            return bad("gamma must be non-negative");
        }
        if self.eval_interval == 0 {
            return bad("eval_interval must be positive");
        }
        if !(self.adam.lr >= 0.0) {
            return bad("learning rate must be non-negative");
        }
        Ok(())
    }
}

/// One meta-training unit.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Episode {
    pub relation: RelationId,
    pub reference: Vec<(EntityId, EntityId)>,
    pub positives: Vec<(EntityId, EntityId)>,
    /// `negatives[l]` pollutes the tail of `positives[l]`.
    pub negatives: Vec<(EntityId, EntityId)>,
}

/// Tails of the relation's pool that are not known tails of `head`.
fn negative_pool(task: &RelationTask, head: EntityId) -> Vec<EntityId> {
    task.tail_pool
        .iter()
        .copied()
        .filter(|&t| !task.is_true(head, t))
        .collect()
}

/// Samples `k` reference pairs in random order, up to `batch` positives
/// from the remaining pairs, and one polluted tail per positive.
pub fn sample_episode<R: rand::Rng + ?Sized>(
    task: &RelationTask,
    graph: &KnowledgeGraph,
    k: usize,
    batch: usize,
    rng: &mut R,
) -> Result<Episode> {
    let pairs = &task.train_pairs;
    if pairs.len() <= k {
        return Err(Error::SkipTask(graph.relation_name(task.relation).to_string()));
    }
    let mut order: Vec<usize> = index::sample(rng, pairs.len(), pairs.len()).into_vec();
    let rest = order.split_off(k);
    let reference = order.iter().map(|&i| pairs[i]).collect();

    let mut positives = Vec::new();
    let mut negatives = Vec::new();
    for &i in &rest {
        if positives.len() == batch {
            break;
        }
        let (h, t) = pairs[i];
        let pool = negative_pool(task, h);
        if pool.is_empty() {
            continue;
        }
        positives.push((h, t));
        negatives.push((h, pool[rng.gen_range(0..pool.len())]));
    }
    if positives.is_empty() {
        return Err(Error::Config(format!(
            "relation `{}` has no positive with a negative candidate",
            graph.relation_name(task.relation)
        )));
    }
    Ok(Episode {
        relation: task.relation,
        reference,
        positives,
        negatives,
    })
}

/// `Σ_l [ξ + s⁻_l − s⁺_l]₊`.
pub fn ranking_loss<S: Scalar>(pos: &[S], neg: &[S], margin: S) -> Result<S> {
    if pos.len() != neg.len() {
        return Err(Error::LengthMismatch {
            op: "ranking_loss",
            left: pos.len(),
            right: neg.len(),
        });
    }
    Ok(pos
        .iter()
        .zip(neg)
        .map(|(&p, &n)| (margin + n - p).max(S::zero()))
        .sum())
}

/// `Σ_k ‖d_k − E_k‖²`.
pub fn reconstruction_loss<S: Scalar>(decoded: &[Vec<S>], pairs: &[Vec<S>]) -> Result<S> {
    if decoded.len() != pairs.len() {
        return Err(Error::LengthMismatch {
            op: "reconstruction_loss",
            left: decoded.len(),
            right: pairs.len(),
        });
    }
    let mut total = S::zero();
    for (d, e) in decoded.iter().zip(pairs) {
        if d.len() != e.len() {
            return Err(Error::LengthMismatch {
                op: "reconstruction_loss",
                left: d.len(),
                right: e.len(),
            });
        }
        total = total + d.iter().zip(e).map(|(&a, &b)| (a - b) * (a - b)).sum();
    }
    Ok(total)
}

/// Recorded hinge loss over aligned score nodes.
pub fn ranking_loss_var<S: Scalar>(tape: &mut Tape<S>, pos: &[Var], neg: &[Var], margin: S) -> Result<Var> {
    if pos.len() != neg.len() || pos.is_empty() {
        return Err(Error::LengthMismatch {
            op: "ranking_loss",
            left: pos.len(),
            right: neg.len(),
        });
    }
    let mut terms = Vec::with_capacity(pos.len());
    for (&p, &n) in pos.iter().zip(neg) {
        let diff = tape.sub(n, p)?;
        let shifted = tape.add_const(diff, margin);
        terms.push(tape.relu(shifted));
    }
    sum_scalars(tape, &terms)
}

/// Recorded reconstruction loss.
pub fn reconstruction_loss_var<S: Scalar>(tape: &mut Tape<S>, decoded: &[Var], pairs: &[Var]) -> Result<Var> {
    if decoded.len() != pairs.len() || decoded.is_empty() {
        return Err(Error::LengthMismatch {
            op: "reconstruction_loss",
            left: decoded.len(),
            right: pairs.len(),
        });
    }
    let mut terms = Vec::with_capacity(pairs.len());
    for (&d, &e) in decoded.iter().zip(pairs) {
        let diff = tape.sub(d, e)?;
        terms.push(tape.squared_l2(diff));
    }
    sum_scalars(tape, &terms)
}

fn sum_scalars<S: Scalar>(tape: &mut Tape<S>, terms: &[Var]) -> Result<Var> {
    let mut acc = terms[0];
    for &t in &terms[1..] {
        acc = tape.add(acc, t)?;
    }
    Ok(acc)
}

/// Nodes of the joint objective on one tape.
#[derive(Debug, Clone, Copy)]
pub struct LossNodes {
    pub total: Var,
    pub rank: Var,
    /// Absent for aggregators without a decoder.
    pub reconstruction: Option<Var>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossValues {
    pub total: f64,
    pub rank: f64,
    pub reconstruction: f64,
}

/// Records `L_rank + γ·L_re` for `episode` on the forward pass.
pub fn joint_loss<S: Scalar>(
    fwd: &mut Forward<'_, S>,
    episode: &Episode,
    margin: f64,
    gamma: f64,
) -> Result<LossNodes> {
    let reference = fwd.reference(&episode.reference)?;
    let mut pos = Vec::with_capacity(episode.positives.len());
    let mut neg = Vec::with_capacity(episode.negatives.len());
    for (&(h, t), &(nh, nt)) in episode.positives.iter().zip(&episode.negatives) {
        pos.push(fwd.score_pair(h, t, &reference)?);
        neg.push(fwd.score_pair(nh, nt, &reference)?);
    }
    let tape = fwd.tape_mut();
    let rank = ranking_loss_var(tape, &pos, &neg, S::lit(margin))?;
    let decoded = &reference.aggregate.decoder_outputs;
    if decoded.is_empty() {
        return Ok(LossNodes {
            total: rank,
            rank,
            reconstruction: None,
        });
    }
    let re = reconstruction_loss_var(tape, decoded, &reference.pairs)?;
    let weighted = tape.scale(re, S::lit(gamma));
    let total = tape.add(rank, weighted)?;
    Ok(LossNodes {
        total,
        rank,
        reconstruction: Some(re),
    })
}

/// Builds the loss of one episode against `store` (which must share the
/// model's layout) on `tape`; the finite-difference checker's entry point.
pub fn episode_loss<S: Scalar>(
    model: &Fsrl<S>,
    store: &ParamStore<S>,
    tape: &mut Tape<S>,
    episode: &Episode,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
    margin: f64,
    gamma: f64,
) -> Result<LossNodes> {
    let mut fwd = model
        .forward_with(store, graph, table, NeighborSampling::Canonical)
        .with_tape(std::mem::take(tape));
    let nodes = joint_loss(&mut fwd, episode, margin, gamma);
    *tape = fwd.into_tape();
    nodes
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    Step {
        step: u64,
        relation: String,
        loss: f64,
        l_rank: f64,
        l_re: f64,
        lr: f64,
    },
    Eval {
        step: u64,
        mrr: f64,
        best: bool,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub records: Vec<LogRecord>,
}

impl TrainLog {
    pub fn steps(&self) -> impl Iterator<Item = &LogRecord> {
        self.records.iter().filter(|r| matches!(r, LogRecord::Step { .. }))
    }

    /// Per-step reconstruction losses in step order.
    pub fn reconstruction_series(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Step { l_re, .. } => Some(*l_re),
                LogRecord::Eval { .. } => None,
            })
            .collect()
    }

    pub fn loss_series(&self) -> Vec<f64> {
        self.records
            .iter()
            .filter_map(|r| match r {
                LogRecord::Step { loss, .. } => Some(*loss),
                LogRecord::Eval { .. } => None,
            })
            .collect()
    }

    pub fn to_jsonl(&self) -> Result<String> {
        let mut out = String::new();
        for r in &self.records {
            out.push_str(&serde_json::to_string(r)?);
            out.push('\n');
        }
        Ok(out)
    }
}

/// Hooks into the training loop; all default to no-ops.
pub trait TrainObserver<S> {
    fn on_record(&mut self, _record: &LogRecord) -> Result<()> {
        Ok(())
    }
    fn on_best(&mut self, _model: &Fsrl<S>) -> Result<()> {
        Ok(())
    }
    /// Called with the last finite state before a divergence error.
    fn on_divergence(&mut self, _model: &Fsrl<S>) -> Result<()> {
        Ok(())
    }
}

impl<S> TrainObserver<S> for () {}

pub struct TrainOutcome<S> {
    /// Parameters with the best meta-valid MRR.
    pub model: Fsrl<S>,
    pub best_mrr: f64,
    pub episodes: u64,
    pub log: TrainLog,
}

/// Meta-trains `model` on the meta-train tasks, choosing the snapshot with
/// the best meta-valid MRR. `graph` is the background graph used for
/// neighbor lookups.
pub fn meta_train<S: Scalar>(
    mut model: Fsrl<S>,
    split: &TaskSplit,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
    cfg: &TrainConfig,
    observer: &mut dyn TrainObserver<S>,
) -> Result<TrainOutcome<S>> {
    cfg.validate()?;
    if split.meta_train.is_empty() {
        return Err(Error::Config("meta-train partition is empty".into()));
    }
    let mut rng = rng::derived(cfg.seed, &[0x7a1]);
    let mut order: Vec<usize> = (0..split.meta_train.len()).collect();
    let mut log = TrainLog::default();
    let mut best: Option<(f64, ParamStore<S>)> = None;
    let mut stale = 0usize;
    let mut step = 0u64;
    let mut last_eval = None;

    'outer: while (step as usize) < cfg.max_episodes {
        order.shuffle(&mut rng);
        let mut progressed = false;
        for &i in &order {
            if step as usize >= cfg.max_episodes {
                break 'outer;
            }
            let task = &split.meta_train[i];
            let episode = match sample_episode(task, graph, cfg.few_shot, cfg.batch_size, &mut rng) {
                Ok(e) => e,
                Err(Error::SkipTask(_)) => continue,
                Err(e) => return Err(e),
            };
            progressed = true;
            let sampling = NeighborSampling::Random(rng::derived(cfg.seed, &[0xe915, step]));
            let mut fwd = model.forward(graph, table, sampling);
            let nodes = joint_loss(&mut fwd, &episode, cfg.margin, cfg.gamma)?;
            let tape = fwd.into_tape();
            let values = LossValues {
                total: tape.scalar_value(nodes.total).as_f64(),
                rank: tape.scalar_value(nodes.rank).as_f64(),
                reconstruction: nodes.reconstruction.map_or(0.0, |v| tape.scalar_value(v).as_f64()),
            };
            if !values.total.is_finite() {
                observer.on_divergence(&model)?;
                return Err(Error::Divergence { step });
            }
            tape.backward(nodes.total, &mut model.store, false)?;
            let lr = cfg.adam.effective_lr(model.store.step());
            match adam_step(&mut model.store, &cfg.adam) {
                Ok(()) => {}
                Err(Error::NonFiniteGradient(_)) => {
                    observer.on_divergence(&model)?;
                    return Err(Error::Divergence { step });
                }
                Err(e) => return Err(e),
            }
            step += 1;
            push_record(
                &mut log,
                observer,
                LogRecord::Step {
                    step,
                    relation: graph.relation_name(episode.relation).to_string(),
                    loss: values.total,
                    l_rank: values.rank,
                    l_re: values.reconstruction,
                    lr,
                },
            )?;
            if step % cfg.eval_interval as u64 == 0 {
                last_eval = Some(step);
                if validate(&model, split, graph, table, step, &mut best, &mut stale, &mut log, observer)?
                    && stale >= cfg.patience
                {
                    break 'outer;
                }
            }
        }
        if !progressed {
            return Err(Error::Config("no meta-train task has more than K pairs".into()));
        }
    }
    if last_eval != Some(step) {
        validate(&model, split, graph, table, step, &mut best, &mut stale, &mut log, observer)?;
    }
    let (best_mrr, store) = best.expect("at least one validation ran");
    model.store = store;
    Ok(TrainOutcome {
        model,
        best_mrr,
        episodes: step,
        log,
    })
}

fn push_record<S>(log: &mut TrainLog, observer: &mut dyn TrainObserver<S>, r: LogRecord) -> Result<()> {
    observer.on_record(&r)?;
    log.records.push(r);
    Ok(())
}

/// Evaluates meta-valid and updates the best snapshot. Returns `true` when
/// this evaluation did not improve.
#[allow(clippy::too_many_arguments)]
fn validate<S: Scalar>(
    model: &Fsrl<S>,
    split: &TaskSplit,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
    step: u64,
    best: &mut Option<(f64, ParamStore<S>)>,
    stale: &mut usize,
    log: &mut TrainLog,
    observer: &mut dyn TrainObserver<S>,
) -> Result<bool> {
    let mrr = if split.meta_valid.iter().any(|t| !t.test_pairs.is_empty()) {
        evaluate_split(model, &split.meta_valid, graph, table)?.aggregate.mrr
    } else {
        0.0
    };
    let improved = best.as_ref().map_or(true, |(b, _)| mrr > *b);
    if improved {
        *best = Some((mrr, model.store.clone()));
        *stale = 0;
        observer.on_best(model)?;
    } else {
        *stale += 1;
    }
    push_record(log, observer, LogRecord::Eval { step, mrr, best: improved })?;
    Ok(!improved)
}
