//! Dataset directories: `triples.tsv`, `split.json` and an optional
//! `types.tsv` (the id-prefix rule applies without it).

use std::path::Path;

use fsrl_core::kg::{
    build_split, load_triples, Assignment, EmbeddingTable, KnowledgeGraph, SplitConfig, SplitFile, TaskSplit, TypeMap,
};
use fsrl_core::Result;

pub const TRIPLES: &str = "triples.tsv";
pub const SPLIT: &str = "split.json";
pub const TYPES: &str = "types.tsv";

pub struct Dataset {
    pub graph: KnowledgeGraph,
    pub background: KnowledgeGraph,
    pub split: TaskSplit,
    pub split_config: SplitConfig,
}

pub fn load(dir: &Path, cfg: &SplitConfig) -> Result<Dataset> {
    let graph = load_triples(&dir.join(TRIPLES))?;
    let types_path = dir.join(TYPES);
    let types = if types_path.exists() {
        TypeMap::load(&types_path, &graph)?
    } else {
        TypeMap::from_prefix_rule(&graph)
    };
    let file = SplitFile::load(&dir.join(SPLIT))?;
    let split_config = SplitConfig {
        min_triples: file.min_triples.unwrap_or(cfg.min_triples),
        max_triples: file.max_triples.unwrap_or(cfg.max_triples),
        ..cfg.clone()
    };
    let tasks = file.all().map(|n| graph.relation(n)).collect::<Result<Vec<_>>>()?;
    let (split, background) = build_split(&graph, &tasks, &Assignment::Explicit(file), &types, &split_config)?;
    Ok(Dataset {
        graph,
        background,
        split,
        split_config,
    })
}

pub fn load_embeddings(path: &Path, graph: &KnowledgeGraph, dim: usize) -> Result<EmbeddingTable<f64>> {
    EmbeddingTable::load(path, graph, Some(dim))
}
