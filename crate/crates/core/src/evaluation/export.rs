use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::kg::{EmbeddingTable, EntityId, KnowledgeGraph, RelationTask};
use crate::model::{Fsrl, NeighborSampling};
use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq)]
pub struct ExportRow {
    pub head: EntityId,
    pub tail: EntityId,
    pub positive: bool,
    /// Refined matcher-space embedding `g_T`.
    pub embedding: Vec<f64>,
    pub projection: [f64; 2],
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExportTable {
    pub relation: String,
    pub rows: Vec<ExportRow>,
}

impl ExportTable {
    /// Header, then `label  head  tail  g_1..g_2d  pc_1  pc_2` per row.
    pub fn to_tsv(&self, graph: &KnowledgeGraph, fingerprint: &str) -> String {
        let width = self.rows.first().map_or(0, |r| r.embedding.len());
        let mut out = String::new();
        let _ = writeln!(out, "# relation {} fingerprint {fingerprint}", self.relation);
        let mut header = vec!["label".to_string(), "head".into(), "tail".into()];
        header.extend((0..width).map(|i| format!("g{i}")));
        header.extend(["pc1".to_string(), "pc2".into()]);
        let _ = writeln!(out, "{}", header.join("\t"));
        for r in &self.rows {
            let mut cols = vec![
                if r.positive { "positive" } else { "negative" }.to_string(),
                graph.entity_name(r.head).to_string(),
                graph.entity_name(r.tail).to_string(),
            ];
            cols.extend(r.embedding.iter().map(|v| v.to_string()));
            cols.extend(r.projection.iter().map(|v| v.to_string()));
            let _ = writeln!(out, "{}", cols.join("\t"));
        }
        out
    }

    pub fn save(&self, path: &Path, graph: &KnowledgeGraph, fingerprint: &str) -> Result<()> {
        fs::write(path, self.to_tsv(graph, fingerprint))?;
        Ok(())
    }
}

/// Projections onto the top two principal axes of the centered rows.
pub fn principal_components(rows: &[Vec<f64>]) -> Vec<[f64; 2]> {
    let n = rows.len();
    if n == 0 {
        return Vec::new();
    }
    let dim = rows[0].len();
    let mut mean = vec![0.0; dim];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v / n as f64;
        }
    }
    let centered: Vec<Vec<f64>> = rows
        .iter()
        .map(|r| r.iter().zip(&mean).map(|(v, m)| v - m).collect())
        .collect();
    let mut cov = vec![0.0; dim * dim];
    for r in &centered {
        for i in 0..dim {
            for j in 0..dim {
                cov[i * dim + j] += r[i] * r[j];
            }
        }
    }
    let mut axes: Vec<Vec<f64>> = Vec::new();
    for _ in 0..2 {
        // deterministic start, deflated against earlier axes each iteration
        let mut v: Vec<f64> = (0..dim).map(|i| 1.0 + i as f64 / dim.max(1) as f64).collect();
        for _ in 0..500 {
            let mut w: Vec<f64> = (0..dim)
                .map(|i| (0..dim).map(|j| cov[i * dim + j] * v[j]).sum())
                .collect();
            for a in &axes {
                let p: f64 = w.iter().zip(a).map(|(x, y)| x * y).sum();
                w.iter_mut().zip(a).for_each(|(x, y)| *x -= p * y);
            }
            let norm = w.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm < 1e-300 {
                v = vec![0.0; dim];
                break;
            }
            v = w.iter().map(|x| x / norm).collect();
        }
        axes.push(v);
    }
    centered
        .iter()
        .map(|r| {
            let p = |a: &Vec<f64>| r.iter().zip(a).map(|(x, y)| x * y).sum::<f64>();
            [p(&axes[0]), p(&axes[1])]
        })
        .collect()
}

/// Refined embeddings of every candidate pair of the task's test queries,
/// labeled by membership in the graph.
pub fn export_embeddings<S: Scalar>(
    model: &Fsrl<S>,
    task: &RelationTask,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
) -> Result<ExportTable> {
    if task.test_pairs.is_empty() {
        return Err(Error::Config(format!(
            "relation `{}` has no test queries to export",
            graph.relation_name(task.relation)
        )));
    }
    let reference = task.reference();
    let mut rows = Vec::new();
    for pair in &task.test_pairs {
        let mut fwd = model.forward(graph, table, NeighborSampling::Canonical);
        let r = fwd.reference(&reference)?;
        for &t in &pair.candidates.candidates {
            let q = fwd.embed_pair(pair.head, t)?;
            let g = fwd.refine(q, &r)?;
            rows.push(ExportRow {
                head: pair.head,
                tail: t,
                positive: task.is_true(pair.head, t),
                embedding: fwd.value(g).iter().map(|v| v.as_f64()).collect(),
                projection: [0.0; 2],
            });
        }
    }
    let emb: Vec<Vec<f64>> = rows.iter().map(|r| r.embedding.clone()).collect();
    for (row, p) in rows.iter_mut().zip(principal_components(&emb)) {
        row.projection = p;
    }
    Ok(ExportTable {
        relation: graph.relation_name(task.relation).to_string(),
        rows,
    })
}
