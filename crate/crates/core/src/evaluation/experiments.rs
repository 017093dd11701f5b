use serde::{Deserialize, Serialize};
use serde_json::json;

use super::{evaluate_split, fingerprint, EvalReport};
use crate::error::{Error, Result};
use crate::kg::{EmbeddingTable, KnowledgeGraph, SplitConfig, TaskSplit};
use crate::model::{Fsrl, ModelConfig, Variant};
use crate::scalar::Scalar;
use crate::training::{meta_train, TrainConfig};

/// Median; the mean of the middle two for even lengths.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return f64::NAN;
    }
    let mut v = values.to_vec();
    v.sort_by(f64::total_cmp);
    let m = v.len() / 2;
    if v.len() % 2 == 1 {
        v[m]
    } else {
        (v[m - 1] + v[m]) / 2.0
    }
}

/// Trains from scratch with `seed` and evaluates on meta-test.
fn train_and_test<S: Scalar>(
    split: &TaskSplit,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
    model_cfg: ModelConfig,
    train_cfg: &TrainConfig,
    seed: u64,
) -> Result<EvalReport> {
    let cfg = TrainConfig {
        seed,
        ..train_cfg.clone()
    };
    let model = Fsrl::new(model_cfg, seed)?;
    let out = meta_train(model, split, graph, table, &cfg, &mut ())?;
    let report = evaluate_split(&out.model, &split.meta_test, graph, table)?;
    Ok(report.with_fingerprint(fingerprint(&json!({ "model": model_cfg, "train": cfg }))?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationRow {
    pub variant: Variant,
    /// One report per seed, in seed order.
    pub reports: Vec<EvalReport>,
    pub median_mrr: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AblationReport {
    pub seeds: Vec<u64>,
    pub rows: Vec<AblationRow>,
}

impl AblationReport {
    pub fn row(&self, variant: Variant) -> Option<&AblationRow> {
        self.rows.iter().find(|r| r.variant == variant)
    }

    pub fn table(&self) -> String {
        let mut out = format!("{:<16} {:>10}  per-seed meta-test MRR\n", "variant", "median");
        for r in &self.rows {
            let seeds: Vec<String> = r.reports.iter().map(|x| format!("{:.4}", x.aggregate.mrr)).collect();
            out.push_str(&format!("{:<16} {:>10.4}  {}\n", r.variant.name(), r.median_mrr, seeds.join(" ")));
        }
        out
    }
}

/// Trains and tests each variant under identical seeds and budgets.
pub fn run_ablation_matrix<S: Scalar>(
    split: &TaskSplit,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
    base: ModelConfig,
    train_cfg: &TrainConfig,
    variants: &[Variant],
    seeds: &[u64],
) -> Result<AblationReport> {
    if seeds.is_empty() {
        return Err(Error::Config("ablation needs at least one seed".into()));
    }
    let rows = variants
        .iter()
        .map(|&variant| {
            let cfg = ModelConfig {
                variant: variant.config(),
                ..base
            };
            let reports = seeds
                .iter()
                .map(|&s| train_and_test(split, graph, table, cfg, train_cfg, s))
                .collect::<Result<Vec<_>>>()?;
            let mrrs: Vec<f64> = reports.iter().map(|r| r.aggregate.mrr).collect();
            Ok(AblationRow {
                variant,
                median_mrr: median(&mrrs),
                reports,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(AblationReport {
        seeds: seeds.to_vec(),
        rows,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub few_shot: usize,
    pub reports: Vec<EvalReport>,
    pub median_mrr: f64,
    /// Relations dropped for having too few pairs at this `K`.
    pub skipped: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub seeds: Vec<u64>,
    pub points: Vec<SweepPoint>,
}

impl SweepReport {
    pub fn point(&self, k: usize) -> Option<&SweepPoint> {
        self.points.iter().find(|p| p.few_shot == k)
    }

    /// TAB-separated `K, median, per-seed MRR...` for plotting.
    pub fn series(&self) -> String {
        let mut out = String::from("k\tmedian_mrr\tmrr_per_seed\n");
        for p in &self.points {
            let seeds: Vec<String> = p.reports.iter().map(|r| format!("{:.6}", r.aggregate.mrr)).collect();
            out.push_str(&format!("{}\t{:.6}\t{}\n", p.few_shot, p.median_mrr, seeds.join(",")));
        }
        out
    }
}

/// One full train and test per `K`: both the episode reference size and
/// the fixed evaluation reference sets change.
#[allow(clippy::too_many_arguments)]
pub fn sweep_few_shot_size<S: Scalar>(
    split: &TaskSplit,
    split_cfg: &SplitConfig,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
    model_cfg: ModelConfig,
    train_cfg: &TrainConfig,
    ks: &[usize],
    seeds: &[u64],
) -> Result<SweepReport> {
    if seeds.is_empty() || ks.is_empty() {
        return Err(Error::Config("sweep needs at least one K and one seed".into()));
    }
    let points = ks
        .iter()
        .map(|&k| {
            let mut skipped = Vec::new();
            let cfg = SplitConfig {
                few_shot: k,
                ..split_cfg.clone()
            };
            let mut redo = |tasks: &[crate::kg::RelationTask]| -> Result<Vec<_>> {
                let mut kept = Vec::new();
                for t in tasks {
                    match t.with_few_shot(k, &cfg, graph) {
                        Ok(t) => kept.push(t),
                        Err(Error::SkipTask(name)) => skipped.push(name),
                        Err(e) => return Err(e),
                    }
                }
                Ok(kept)
            };
            let resplit = TaskSplit {
                meta_train: split.meta_train.clone(),
                meta_valid: redo(&split.meta_valid)?,
                meta_test: redo(&split.meta_test)?,
            };
            if resplit.meta_test.is_empty() {
                return Err(Error::Config(format!("no meta-test relation has more than {k} pairs")));
            }
            let train = TrainConfig {
                few_shot: k,
                ..train_cfg.clone()
            };
            let reports = seeds
                .iter()
                .map(|&s| train_and_test(&resplit, graph, table, model_cfg, &train, s))
                .collect::<Result<Vec<_>>>()?;
            let mrrs: Vec<f64> = reports.iter().map(|r| r.aggregate.mrr).collect();
            Ok(SweepPoint {
                few_shot: k,
                median_mrr: median(&mrrs),
                reports,
                skipped,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(SweepReport {
        seeds: seeds.to_vec(),
        points,
    })
}
