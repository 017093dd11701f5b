//! Knowledge-graph data: triples, vocabularies, task splits, candidate
//! sets, neighbor sampling, pretrained embeddings and synthetic graphs.

pub mod candidates;
pub mod embeddings;
pub mod graph;
pub mod invariants;
pub mod neighbors;
pub mod split;
pub mod synthetic;
pub mod types;

pub use candidates::{build_candidates, CandidateSet, RankingMode};
pub use embeddings::EmbeddingTable;
pub use graph::{load_triples, EntityId, KnowledgeGraph, RelationId, Triple, Vocab, SELF_RELATION};
pub use neighbors::{sample_neighbors, Neighbor, Sampling};
pub use split::{build_split, Assignment, RelationTask, SplitConfig, SplitFile, TaskSplit, TestPair};
pub use synthetic::{generate_synthetic_kg, SynthSpec, SyntheticKg};
pub use types::{TypeId, TypeMap};
