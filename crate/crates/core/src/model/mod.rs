//! The three networks of the model and their composition into a query
//! score: neighbor encoder, reference-set aggregator and matcher.

pub mod aggregator;
pub mod encoder;
pub mod matcher;
pub mod variant;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

pub use aggregator::{aggregate_reference_set, Aggregate, AggregatorParams};
pub use encoder::{encode_entity, Encoded, EncoderParams};
pub use matcher::{match_score, Matched, MatcherParams};
pub use variant::{AggregateMode, NeighborMode, ScoreMode, Variant, VariantConfig};

use crate::diff::{checkpoint, ParamStore, Tape, Var};
use crate::error::{Error, Result};
use crate::kg::neighbors::DEFAULT_MAX_NEIGHBORS;
use crate::kg::{sample_neighbors, EmbeddingTable, EntityId, KnowledgeGraph, Sampling};
use crate::rng;
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelConfig {
    /// Input embedding width `d`; pair embeddings are `2d`.
    pub dim: usize,
    /// Matching steps `T`.
    pub match_steps: usize,
    pub max_neighbors: usize,
    #[serde(flatten)]
    pub variant: VariantConfig,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            dim: 100,
            match_steps: 2,
            max_neighbors: DEFAULT_MAX_NEIGHBORS,
            variant: VariantConfig::default(),
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        if self.dim == 0 {
            return Err(Error::Config("model dim must be positive".into()));
        }
        if self.max_neighbors == 0 {
            return Err(Error::Config("max_neighbors must be positive".into()));
        }
        Ok(())
    }
}

/// Parameters and configuration of one model instance. Every variant
/// allocates the full parameter set so checkpoints share one layout; unused
/// parts simply receive zero gradient.
#[derive(Debug, Clone)]
pub struct Fsrl<S> {
    pub config: ModelConfig,
    pub store: ParamStore<S>,
    pub encoder: EncoderParams,
    pub aggregator: AggregatorParams,
    pub matcher: MatcherParams,
}

/// Neighbor selection for one forward pass.
pub enum NeighborSampling {
    Canonical,
    Random(rng::Rng),
}

/// Precomputed neighbor encodings `f_θ(e)` under canonical sampling.
pub type EncodingCache<S> = HashMap<EntityId, Vec<S>>;

impl<S: Scalar> Fsrl<S> {
    pub fn new(config: ModelConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut r = rng::derived(seed, &[0x1417]);
        let mut store = ParamStore::new();
        let d = config.dim;
        let encoder = EncoderParams::init(&mut store, d, &mut r)?;
        let aggregator = AggregatorParams::init(&mut store, d, &mut r)?;
        let matcher = MatcherParams::init(&mut store, d, config.match_steps, &mut r)?;
        Ok(Self {
            config,
            store,
            encoder,
            aggregator,
            matcher,
        })
    }

    pub fn variant(&self) -> VariantConfig {
        self.config.variant
    }

    /// Starts a forward pass that records onto a fresh tape.
    pub fn forward<'a>(
        &'a self,
        graph: &'a KnowledgeGraph,
        table: &'a EmbeddingTable<S>,
        sampling: NeighborSampling,
    ) -> Forward<'a, S> {
        self.forward_with(&self.store, graph, table, sampling)
    }

    /// Forward pass reading parameter values from `store`, which must share
    /// this model's layout (used by finite-difference checks).
    pub fn forward_with<'a>(
        &'a self,
        store: &'a ParamStore<S>,
        graph: &'a KnowledgeGraph,
        table: &'a EmbeddingTable<S>,
        sampling: NeighborSampling,
    ) -> Forward<'a, S> {
        Forward {
            model: self,
            store,
            graph,
            table,
            tape: Tape::new(),
            cache: HashMap::new(),
            preloaded: None,
            sampling,
        }
    }

    /// Canonical-mode encodings of `entities`, reusable across queries.
    pub fn encode_entities(
        &self,
        graph: &KnowledgeGraph,
        table: &EmbeddingTable<S>,
        entities: impl IntoIterator<Item = EntityId>,
    ) -> Result<EncodingCache<S>> {
        let mut out = EncodingCache::new();
        for e in entities {
            if out.contains_key(&e) {
                continue;
            }
            let mut fwd = self.forward(graph, table, NeighborSampling::Canonical);
            let v = fwd.encode(e)?;
            out.insert(e, fwd.tape.value(v).data().to_vec());
        }
        Ok(out)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let meta = serde_json::to_string(&self.config)?;
        checkpoint::save(&self.store, &meta, path)
    }

    /// Like [`Fsrl::save`], with a run fingerprint stored next to the
    /// configuration; [`Fsrl::load`] ignores it.
    pub fn save_with_fingerprint(&self, path: &Path, fingerprint: &str) -> Result<()> {
        let mut meta = serde_json::to_value(self.config)?;
        meta["fingerprint"] = fingerprint.into();
        checkpoint::save(&self.store, &serde_json::to_string(&meta)?, path)
    }

    /// Fingerprint stored by [`Fsrl::save_with_fingerprint`], if any.
    pub fn stored_fingerprint(path: &Path) -> Result<Option<String>> {
        let (_, meta) = checkpoint::load::<S>(path)?;
        let meta: serde_json::Value = serde_json::from_str(&meta)?;
        Ok(meta.get("fingerprint").and_then(|f| f.as_str()).map(str::to_string))
    }

    /// Restores a model whose layout matches the stored configuration.
    pub fn load(path: &Path) -> Result<Self> {
        let (store, meta) = checkpoint::load::<S>(path)?;
        let config: ModelConfig = serde_json::from_str(&meta)?;
        let mut model = Self::new(config, 0)?;
        let expected: Vec<&str> = model.store.names().collect();
        let found: Vec<&str> = store.names().collect();
        if expected != found {
            return Err(Error::Format(format!(
                "checkpoint parameters {found:?} do not match model layout {expected:?}"
            )));
        }
        for id in model.store.ids().collect::<Vec<_>>() {
            if model.store.value(id).shape() != store.value(id).shape() {
                return Err(Error::Format(format!(
                    "checkpoint shape mismatch for `{}`",
                    store.name(id)
                )));
            }
        }
        model.store = store;
        Ok(model)
    }
}

/// Encoded reference set.
#[derive(Debug, Clone)]
pub struct Reference {
    /// `E_k` in input order.
    pub pairs: Vec<Var>,
    pub aggregate: Aggregate,
}

/// One forward pass: owns the tape, memoizes entity encodings.
pub struct Forward<'a, S> {
    model: &'a Fsrl<S>,
    store: &'a ParamStore<S>,
    graph: &'a KnowledgeGraph,
    table: &'a EmbeddingTable<S>,
    tape: Tape<S>,
    cache: HashMap<EntityId, Var>,
    preloaded: Option<&'a EncodingCache<S>>,
    sampling: NeighborSampling,
}

impl<'a, S: Scalar> Forward<'a, S> {
    /// Entity encodings are read from `cache` as constants when present.
    /// Only valid for evaluation, where no gradient is needed.
    pub fn with_cache(mut self, cache: &'a EncodingCache<S>) -> Self {
        self.preloaded = Some(cache);
        self
    }

    pub fn tape(&self) -> &Tape<S> {
        &self.tape
    }

    pub fn tape_mut(&mut self) -> &mut Tape<S> {
        &mut self.tape
    }

    pub fn into_tape(self) -> Tape<S> {
        self.tape
    }

    /// Continues recording onto an existing tape.
    pub fn with_tape(mut self, tape: Tape<S>) -> Self {
        self.tape = tape;
        self
    }

    pub fn value(&self, v: Var) -> &[S] {
        self.tape.value(v).data()
    }

    /// `f_θ(e)`.
    pub fn encode(&mut self, entity: EntityId) -> Result<Var> {
        if let Some(&v) = self.cache.get(&entity) {
            return Ok(v);
        }
        let v = match self.preloaded.and_then(|c| c.get(&entity)) {
            Some(values) => self.tape.constant_vec(values.clone()),
            None => {
                let sampling = match &mut self.sampling {
                    NeighborSampling::Canonical => Sampling::Canonical,
                    NeighborSampling::Random(r) => Sampling::Random(r),
                };
                let neighbors =
                    sample_neighbors(self.graph, entity, self.model.config.max_neighbors, sampling)?;
                encode_entity(
                    &mut self.tape,
                    self.store,
                    &self.model.encoder,
                    &neighbors,
                    self.table,
                    self.model.config.variant.neighbor_mode,
                )?
                .embedding
            }
        };
        self.cache.insert(entity, v);
        Ok(v)
    }

    /// `E_{h,t} = f_θ(h) ⊕ f_θ(t)`.
    pub fn embed_pair(&mut self, head: EntityId, tail: EntityId) -> Result<Var> {
        let h = self.encode(head)?;
        let t = self.encode(tail)?;
        self.tape.concat(&[h, t])
    }

    pub fn reference(&mut self, pairs: &[(EntityId, EntityId)]) -> Result<Reference> {
        let embedded = pairs
            .iter()
            .map(|&(h, t)| self.embed_pair(h, t))
            .collect::<Result<Vec<_>>>()?;
        let aggregate = aggregate_reference_set(
            &mut self.tape,
            self.store,
            &self.model.aggregator,
            &embedded,
            self.model.config.variant.aggregate_mode,
        )?;
        Ok(Reference {
            pairs: embedded,
            aggregate,
        })
    }

    /// Similarity of an embedded query pair to an encoded reference set.
    pub fn score(&mut self, query: Var, reference: &Reference) -> Result<Var> {
        let m = self.model;
        match m.config.variant.score_mode {
            ScoreMode::LstmMatch => {
                Ok(match_score(&mut self.tape, self.store, &m.matcher, query, reference.aggregate.embedding)?.score)
            }
            ScoreMode::InnerProduct => self.tape.dot(query, reference.aggregate.embedding),
            ScoreMode::MaxOverReferences => {
                let scores = reference
                    .pairs
                    .iter()
                    .map(|&e| Ok(match_score(&mut self.tape, self.store, &m.matcher, query, e)?.score))
                    .collect::<Result<Vec<_>>>()?;
                self.tape.max(&scores)
            }
        }
    }

    /// Refined query embedding `g_T` against the aggregated reference.
    pub fn refine(&mut self, query: Var, reference: &Reference) -> Result<Var> {
        let m = self.model;
        Ok(match_score(&mut self.tape, self.store, &m.matcher, query, reference.aggregate.embedding)?.refined)
    }

    pub fn score_pair(&mut self, head: EntityId, tail: EntityId, reference: &Reference) -> Result<Var> {
        let q = self.embed_pair(head, tail)?;
        self.score(q, reference)
    }
}

/// Scores `query` against `references` with canonical neighbor sampling.
pub fn score_query<S: Scalar>(
    model: &Fsrl<S>,
    graph: &KnowledgeGraph,
    table: &EmbeddingTable<S>,
    query: (EntityId, EntityId),
    references: &[(EntityId, EntityId)],
) -> Result<S> {
    let mut fwd = model.forward(graph, table, NeighborSampling::Canonical);
    let r = fwd.reference(references)?;
    let s = fwd.score_pair(query.0, query.1, &r)?;
    Ok(fwd.tape.scalar_value(s))
}
