use std::collections::{HashMap, HashSet};
use std::fmt;
use std::fs;
use std::io::Write;
use std::path::Path;

use indexmap::IndexSet;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntityId(pub u32);

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RelationId(pub u32);

/// Pseudo-relation for the self-loop neighbor of entities with no
/// background neighbors.
pub const SELF_RELATION: RelationId = RelationId(u32::MAX);

impl EntityId {
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RelationId {
    pub fn index(self) -> usize {
        self.0 as usize
    }

    pub fn is_self(self) -> bool {
        self == SELF_RELATION
    }
}

impl fmt::Display for EntityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "e{}", self.0)
    }
}

impl fmt::Display for RelationId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_self() {
            f.write_str("SELF")
        } else {
            write!(f, "r{}", self.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Triple {
    pub head: EntityId,
    pub relation: RelationId,
    pub tail: EntityId,
}

/// String vocabulary in first-appearance order.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct Vocab(IndexSet<String>);

impl Vocab {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn intern(&mut self, name: &str) -> u32 {
        match self.0.get_index_of(name) {
            Some(i) => i as u32,
            None => {
                self.0.insert(name.to_string());
                (self.0.len() - 1) as u32
            }
        }
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.0.get_index_of(name).map(|i| i as u32)
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.0.get_index(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &str> {
        self.0.iter().map(String::as_str)
    }
}

/// Triples over shared entity/relation vocabularies with a per-head
/// neighbor index.
#[derive(Debug, Clone)]
pub struct KnowledgeGraph {
    entities: Vocab,
    relations: Vocab,
    triples: Vec<Triple>,
    neighbors: Vec<Vec<(RelationId, EntityId)>>,
    tails: HashMap<(RelationId, EntityId), Vec<EntityId>>,
    members: HashSet<Triple>,
}

impl KnowledgeGraph {
    /// Builds a graph over the given vocabularies; duplicate triples are
    /// dropped, keeping first occurrence order.
    pub fn new(entities: Vocab, relations: Vocab, triples: impl IntoIterator<Item = Triple>) -> Self {
        let mut members = HashSet::new();
        let mut kept = Vec::new();
        let mut neighbors = vec![Vec::new(); entities.len()];
        let mut tails: HashMap<(RelationId, EntityId), Vec<EntityId>> = HashMap::new();
        for t in triples {
            debug_assert!(t.head.index() < entities.len() && t.tail.index() < entities.len());
            debug_assert!(t.relation.index() < relations.len());
            if members.insert(t) {
                neighbors[t.head.index()].push((t.relation, t.tail));
                tails.entry((t.relation, t.head)).or_default().push(t.tail);
                kept.push(t);
            }
        }
        Self {
            entities,
            relations,
            triples: kept,
            neighbors,
            tails,
            members,
        }
    }

    pub fn from_named<'a>(rows: impl IntoIterator<Item = (&'a str, &'a str, &'a str)>) -> Self {
        let mut entities = Vocab::new();
        let mut relations = Vocab::new();
        let mut triples = Vec::new();
        for (h, r, t) in rows {
            let head = EntityId(entities.intern(h));
            let relation = RelationId(relations.intern(r));
            let tail = EntityId(entities.intern(t));
            triples.push(Triple {
                head,
                relation,
                tail,
            });
        }
        Self::new(entities, relations, triples)
    }

    /// Same vocabularies, keeping only triples whose relation passes `keep`.
    pub fn restrict(&self, keep: impl Fn(RelationId) -> bool) -> Self {
        let triples: Vec<_> = self.triples.iter().copied().filter(|t| keep(t.relation)).collect();
        Self::new(self.entities.clone(), self.relations.clone(), triples)
    }

    pub fn entities(&self) -> &Vocab {
        &self.entities
    }

    pub fn relations(&self) -> &Vocab {
        &self.relations
    }

    pub fn num_entities(&self) -> usize {
        self.entities.len()
    }

    pub fn num_relations(&self) -> usize {
        self.relations.len()
    }

    pub fn triples(&self) -> &[Triple] {
        &self.triples
    }

    pub fn entity_ids(&self) -> impl Iterator<Item = EntityId> {
        (0..self.entities.len() as u32).map(EntityId)
    }

    pub fn relation_ids(&self) -> impl Iterator<Item = RelationId> {
        (0..self.relations.len() as u32).map(RelationId)
    }

    pub fn entity(&self, name: &str) -> Result<EntityId> {
        self.entities
            .get(name)
            .map(EntityId)
            .ok_or_else(|| Error::UnknownEntity(name.to_string()))
    }

    pub fn relation(&self, name: &str) -> Result<RelationId> {
        self.relations
            .get(name)
            .map(RelationId)
            .ok_or_else(|| Error::UnknownRelation(name.to_string()))
    }

    pub fn entity_name(&self, id: EntityId) -> &str {
        self.entities.name(id.0).unwrap_or("<unknown>")
    }

    pub fn relation_name(&self, id: RelationId) -> &str {
        if id.is_self() {
            return "SELF";
        }
        self.relations.name(id.0).unwrap_or("<unknown>")
    }

    /// `N_h`: `(relation, tail)` pairs of every triple headed by `entity`.
    pub fn neighbors(&self, entity: EntityId) -> Result<&[(RelationId, EntityId)]> {
        self.neighbors
            .get(entity.index())
            .map(Vec::as_slice)
            .ok_or_else(|| Error::UnknownEntity(entity.to_string()))
    }

    pub fn tails_of(&self, head: EntityId, relation: RelationId) -> &[EntityId] {
        self.tails
            .get(&(relation, head))
            .map(Vec::as_slice)
            .unwrap_or(&[])
    }

    pub fn contains(&self, head: EntityId, relation: RelationId, tail: EntityId) -> bool {
        self.members.contains(&Triple {
            head,
            relation,
            tail,
        })
    }

    pub fn relation_counts(&self) -> Vec<usize> {
        let mut counts = vec![0; self.relations.len()];
        for t in &self.triples {
            counts[t.relation.index()] += 1;
        }
        counts
    }

    /// `(head, tail)` pairs of `relation` in triple order.
    pub fn pairs_of(&self, relation: RelationId) -> Vec<(EntityId, EntityId)> {
        self.triples
            .iter()
            .filter(|t| t.relation == relation)
            .map(|t| (t.head, t.tail))
            .collect()
    }

    pub fn write_tsv(&self, out: &mut impl Write) -> Result<()> {
        for t in &self.triples {
            writeln!(
                out,
                "{}\t{}\t{}",
                self.entity_name(t.head),
                self.relation_name(t.relation),
                self.entity_name(t.tail)
            )?;
        }
        Ok(())
    }

    pub fn save_tsv(&self, path: &Path) -> Result<()> {
        let mut buf = Vec::new();
        self.write_tsv(&mut buf)?;
        fs::write(path, buf)?;
        Ok(())
    }
}

/// Parses `head<TAB>relation<TAB>tail` lines; blank lines are skipped.
pub fn parse_triples(text: &str, path: &Path) -> Result<KnowledgeGraph> {
    let mut rows = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim_end_matches('\r');
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if fields.len() != 3 || fields.iter().any(|f| f.is_empty()) {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: i + 1,
                msg: format!("expected 3 tab-separated fields, found {}", fields.len()),
            });
        }
        rows.push((fields[0], fields[1], fields[2]));
    }
    if rows.is_empty() {
        return Err(Error::EmptyGraph(path.display().to_string()));
    }
    Ok(KnowledgeGraph::from_named(rows))
}

pub fn load_triples(path: &Path) -> Result<KnowledgeGraph> {
    let text = fs::read_to_string(path)?;
    parse_triples(&text, path)
}
