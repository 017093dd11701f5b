use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::graph::{EntityId, KnowledgeGraph, RelationId};
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// Frozen pretrained vectors for every entity and relation.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<S> {
    dim: usize,
    entities: Vec<Vec<S>>,
    relations: Vec<Vec<S>>,
}

impl<S: Scalar> EmbeddingTable<S> {
    pub fn new(dim: usize, entities: Vec<Vec<S>>, relations: Vec<Vec<S>>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::Config("embedding dimension must be positive".into()));
        }
        for v in entities.iter().chain(&relations) {
            if v.len() != dim {
                return Err(Error::shape("embedding", format!("vector of length {}, expected {dim}", v.len())));
            }
            if v.iter().any(|x| !x.is_finite()) {
                return Err(Error::Format("non-finite embedding entry".into()));
            }
        }
        Ok(Self {
            dim,
            entities,
            relations,
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn entity(&self, id: EntityId) -> Result<&[S]> {
        self.entities
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownEntity(id.to_string()))
    }

    pub fn relation(&self, id: RelationId) -> Result<&[S]> {
        self.relations
            .get(id.index())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownRelation(id.to_string()))
    }

    pub fn entity_mut(&mut self, id: EntityId) -> &mut [S] {
        &mut self.entities[id.index()]
    }

    pub fn relation_mut(&mut self, id: RelationId) -> &mut [S] {
        &mut self.relations[id.index()]
    }

    /// Checks that sizes agree with the graph vocabularies.
    pub fn covers(&self, graph: &KnowledgeGraph) -> bool {
        self.entities.len() == graph.num_entities() && self.relations.len() == graph.num_relations()
    }

    /// Text form: header `d n_entities n_relations`, then one line per id,
    /// entities first, each `id` followed by `d` floats.
    pub fn to_text(&self, graph: &KnowledgeGraph) -> String {
        let mut out = String::new();
        writeln!(out, "{} {} {}", self.dim, self.entities.len(), self.relations.len()).unwrap();
        let mut line = |name: &str, v: &[S]| {
            out.push_str(name);
            for x in v {
                write!(out, " {x}").unwrap();
            }
            out.push('\n');
        };
        for e in graph.entity_ids() {
            line(graph.entity_name(e), &self.entities[e.index()]);
        }
        for r in graph.relation_ids() {
            line(graph.relation_name(r), &self.relations[r.index()]);
        }
        out
    }

    pub fn save(&self, path: &Path, graph: &KnowledgeGraph) -> Result<()> {
        fs::write(path, self.to_text(graph))?;
        Ok(())
    }

    /// Parses the text form against a graph's vocabularies. Ids the graph
    /// does not know are ignored; missing ids are reported together. Blank
    /// lines and lines starting with `#` are skipped.
    pub fn parse(text: &str, graph: &KnowledgeGraph, expected_dim: Option<usize>) -> Result<Self> {
        let mut lines = text
            .lines()
            .filter(|l| !l.trim().is_empty() && !l.starts_with('#'));
        let header = lines
            .next()
            .ok_or_else(|| Error::Format("empty embeddings file".into()))?;
        let nums: Vec<usize> = header
            .split_whitespace()
            .map(|t| t.parse().map_err(|_| Error::Format(format!("bad header `{header}`"))))
            .collect::<Result<_>>()?;
        let [dim, n_ent, n_rel] = nums[..] else {
            return Err(Error::Format(format!("bad header `{header}`")));
        };
        if let Some(want) = expected_dim {
            if want != dim {
                return Err(Error::Config(format!(
                    "embedding dimension {dim} does not match configured {want}"
                )));
            }
        }
        let mut entities: Vec<Option<Vec<S>>> = vec![None; graph.num_entities()];
        let mut relations: Vec<Option<Vec<S>>> = vec![None; graph.num_relations()];
        for (idx, line) in lines.enumerate() {
            let mut fields = line.split_whitespace();
            let name = fields.next().expect("nonempty line");
            let v = fields
                .map(|t| {
                    t.parse::<S>()
                        .map_err(|_| Error::Format(format!("bad float `{t}` for `{name}`")))
                })
                .collect::<Result<Vec<S>>>()?;
            if v.len() != dim {
                return Err(Error::Format(format!(
                    "`{name}` has {} values, expected {dim}",
                    v.len()
                )));
            }
            if idx < n_ent {
                if let Some(id) = graph.entities().get(name) {
                    entities[id as usize] = Some(v);
                }
            } else if idx < n_ent + n_rel {
                if let Some(id) = graph.relations().get(name) {
                    relations[id as usize] = Some(v);
                }
            } else {
                return Err(Error::Format("more vectors than the header declares".into()));
            }
        }
        let mut missing: Vec<String> = Vec::new();
        for (i, v) in entities.iter().enumerate() {
            if v.is_none() {
                missing.push(graph.entity_name(EntityId(i as u32)).to_string());
            }
        }
        for (i, v) in relations.iter().enumerate() {
            if v.is_none() {
                missing.push(graph.relation_name(RelationId(i as u32)).to_string());
            }
        }
        if !missing.is_empty() {
            return Err(Error::Vocabulary(missing));
        }
        Self::new(
            dim,
            entities.into_iter().map(Option::unwrap).collect(),
            relations.into_iter().map(Option::unwrap).collect(),
        )
    }

    pub fn load(path: &Path, graph: &KnowledgeGraph, expected_dim: Option<usize>) -> Result<Self> {
        Self::parse(&fs::read_to_string(path)?, graph, expected_dim)
    }
}
