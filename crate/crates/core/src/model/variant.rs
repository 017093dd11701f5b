use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::Error;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum NeighborMode {
    /// Relation-aware attention over neighbors.
    #[default]
    Attention,
    /// Uniform weights `1/|N_h|`.
    MeanPool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum AggregateMode {
    /// Recurrent encoder + decoder, residual and attention readout.
    #[default]
    RecurrentAutoencoder,
    /// Mean of the pair embeddings.
    MeanPool,
    /// Autoencoder with uniform readout weights.
    NoAttention,
    /// Encoder with attention readout, no decoder.
    EncoderOnly,
    /// Coordinatewise max of the pair embeddings.
    MaxPool,
    /// Coordinatewise mean of the pair embeddings.
    MeanPoolPairs,
}

impl AggregateMode {
    /// Modes that produce decoder outputs for the reconstruction loss.
    pub fn has_decoder(self) -> bool {
        matches!(self, AggregateMode::RecurrentAutoencoder | AggregateMode::NoAttention)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ScoreMode {
    /// Multi-step LSTM refinement then inner product.
    #[default]
    LstmMatch,
    /// Inner product of the raw query and reference embeddings.
    InnerProduct,
    /// Max over references of the LSTM match against each single pair.
    MaxOverReferences,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
pub struct VariantConfig {
    #[serde(default)]
    pub neighbor_mode: NeighborMode,
    #[serde(default)]
    pub aggregate_mode: AggregateMode,
    #[serde(default)]
    pub score_mode: ScoreMode,
}

/// The full model, its ablations and the pooling-style baselines.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Variant {
    #[serde(rename = "FSRL")]
    Fsrl,
    #[serde(rename = "AS_1")]
    As1,
    #[serde(rename = "AS_2a")]
    As2a,
    #[serde(rename = "AS_2b")]
    As2b,
    #[serde(rename = "AS_2c")]
    As2c,
    #[serde(rename = "AS_3")]
    As3,
    #[serde(rename = "GMatching-MaxP")]
    MaxP,
    #[serde(rename = "GMatching-MeanP")]
    MeanP,
    #[serde(rename = "GMatching-Max")]
    Max,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Fsrl,
        Variant::As1,
        Variant::As2a,
        Variant::As2b,
        Variant::As2c,
        Variant::As3,
        Variant::MaxP,
        Variant::MeanP,
        Variant::Max,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Variant::Fsrl => "FSRL",
            Variant::As1 => "AS_1",
            Variant::As2a => "AS_2a",
            Variant::As2b => "AS_2b",
            Variant::As2c => "AS_2c",
            Variant::As3 => "AS_3",
            Variant::MaxP => "GMatching-MaxP",
            Variant::MeanP => "GMatching-MeanP",
            Variant::Max => "GMatching-Max",
        }
    }

    pub fn config(self) -> VariantConfig {
        use AggregateMode as A;
        use NeighborMode as N;
        use ScoreMode as S;
        let (neighbor_mode, aggregate_mode, score_mode) = match self {
            Variant::Fsrl => (N::Attention, A::RecurrentAutoencoder, S::LstmMatch),
            Variant::As1 => (N::MeanPool, A::RecurrentAutoencoder, S::LstmMatch),
            Variant::As2a => (N::Attention, A::MeanPool, S::LstmMatch),
            Variant::As2b => (N::Attention, A::NoAttention, S::LstmMatch),
            Variant::As2c => (N::Attention, A::EncoderOnly, S::LstmMatch),
            Variant::As3 => (N::Attention, A::RecurrentAutoencoder, S::InnerProduct),
            // GMatching-style baselines use the unweighted neighbor encoder.
            Variant::MaxP => (N::MeanPool, A::MaxPool, S::LstmMatch),
            Variant::MeanP => (N::MeanPool, A::MeanPoolPairs, S::LstmMatch),
            Variant::Max => (N::MeanPool, A::MeanPoolPairs, S::MaxOverReferences),
        };
        VariantConfig {
            neighbor_mode,
            aggregate_mode,
            score_mode,
        }
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Variant {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm = s.to_ascii_lowercase().replace(['-', '_'], "");
        Variant::ALL
            .into_iter()
            .find(|v| {
                let n = v.name().to_ascii_lowercase().replace(['-', '_'], "");
                n == norm || n.trim_start_matches("gmatching") == norm
            })
            .ok_or_else(|| Error::Config(format!("unknown variant `{s}`")))
    }
}
