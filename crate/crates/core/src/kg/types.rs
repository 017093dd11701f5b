use std::fs;
use std::path::Path;

use super::graph::{EntityId, KnowledgeGraph, Vocab};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct TypeId(pub u32);

/// Entity → type assignment covering the whole entity vocabulary.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeMap {
    names: Vocab,
    of: Vec<TypeId>,
}

/// Type of a NELL-style id: the prefix up to the second `:`
/// (`concept:company:microsoft` → `concept:company`).
pub fn prefix_type(entity: &str) -> &str {
    let mut colons = entity.match_indices(':').map(|(i, _)| i);
    match (colons.next(), colons.next()) {
        (_, Some(second)) => &entity[..second],
        (Some(first), None) => &entity[..first],
        (None, None) => "_untyped",
    }
}

impl TypeMap {
    pub fn from_prefix_rule(graph: &KnowledgeGraph) -> Self {
        let mut names = Vocab::new();
        let of = graph
            .entities()
            .iter()
            .map(|e| TypeId(names.intern(prefix_type(e))))
            .collect();
        Self { names, of }
    }

    /// Builds from `(entity, type)` rows; every graph entity must be covered.
    pub fn from_rows<'a>(
        graph: &KnowledgeGraph,
        rows: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut names = Vocab::new();
        let mut of: Vec<Option<TypeId>> = vec![None; graph.num_entities()];
        for (e, t) in rows {
            if let Some(id) = graph.entities().get(e) {
                of[id as usize] = Some(TypeId(names.intern(t)));
            }
        }
        let missing: Vec<String> = of
            .iter()
            .enumerate()
            .filter(|(_, t)| t.is_none())
            .map(|(i, _)| graph.entity_name(EntityId(i as u32)).to_string())
            .collect();
        if !missing.is_empty() {
            return Err(Error::Vocabulary(missing));
        }
        Ok(Self {
            names,
            of: of.into_iter().map(|t| t.expect("checked")).collect(),
        })
    }

    pub fn load(path: &Path, graph: &KnowledgeGraph) -> Result<Self> {
        let text = fs::read_to_string(path)?;
        let mut rows = Vec::new();
        for (i, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let fields: Vec<&str> = line.split('\t').collect();
            if fields.len() != 2 {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: i + 1,
                    msg: "expected entity<TAB>type".into(),
                });
            }
            rows.push((fields[0], fields[1]));
        }
        Self::from_rows(graph, rows)
    }

    pub fn save(&self, path: &Path, graph: &KnowledgeGraph) -> Result<()> {
        let mut out = String::new();
        for e in graph.entity_ids() {
            out.push_str(graph.entity_name(e));
            out.push('\t');
            out.push_str(self.type_name(self.type_of(e)));
            out.push('\n');
        }
        fs::write(path, out)?;
        Ok(())
    }

    pub fn type_of(&self, entity: EntityId) -> TypeId {
        self.of[entity.index()]
    }

    pub fn type_name(&self, t: TypeId) -> &str {
        self.names.name(t.0).unwrap_or("<unknown>")
    }

    pub fn num_types(&self) -> usize {
        self.names.len()
    }

    pub fn len(&self) -> usize {
        self.of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.of.is_empty()
    }
}
