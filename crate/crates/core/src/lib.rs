//! Few-shot relation learning for knowledge-graph completion.
//!
//! Given `K` reference `(head, tail)` pairs of a relation, the model ranks
//! candidate tails for new heads. It combines a relation-aware neighbor
//! encoder, a recurrent-autoencoder reference aggregator and a recurrent
//! matching processor, trained episodically over many relations.
//!
//! Everything numeric is generic over [`Scalar`]; the aliases at the crate
//! root fix the scalar to `f64`, which is what the CLI uses.

pub mod diff;
pub mod error;
pub mod evaluation;
pub mod kg;
pub mod model;
pub mod rng;
pub mod scalar;
pub mod training;

pub use error::{Error, Result};
pub use scalar::Scalar;

pub type Tensor64 = diff::Tensor<f64>;
pub type Tape64 = diff::Tape<f64>;
pub type ParamStore64 = diff::ParamStore<f64>;
pub type Fsrl64 = model::Fsrl<f64>;
pub type Fsrl32 = model::Fsrl<f32>;
pub type EmbeddingTable64 = kg::EmbeddingTable<f64>;
