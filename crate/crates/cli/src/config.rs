//! Run configuration: a TOML file with one table per stage, then flag
//! overrides. The effective value is what gets fingerprinted.

use std::fs;
use std::path::Path;

use fsrl_core::evaluation::fingerprint;
use fsrl_core::kg::{SplitConfig, SynthSpec};
use fsrl_core::model::{ModelConfig, Variant};
use fsrl_core::training::{PretrainConfig, TrainConfig};
use fsrl_core::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    /// Seed of the synthetic generator.
    pub seed: u64,
    /// Shorthand that replaces the `[model]` mode fields.
    pub variant: Option<Variant>,
    pub synth: SynthSpec,
    pub split: SplitConfig,
    pub pretrain: PretrainConfig,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub experiment: ExperimentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub seeds: Vec<u64>,
    pub ks: Vec<usize>,
    pub variants: Vec<Variant>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            seeds: vec![0, 1, 2],
            ks: vec![1, 3, 5],
            variants: Variant::ALL.to_vec(),
        }
    }
}

impl Default for RunConfig {
    fn default() -> Self {
        let pretrain = PretrainConfig::default();
        Self {
            seed: 0,
            variant: None,
            synth: SynthSpec::default(),
            split: SplitConfig::default(),
            model: ModelConfig {
                dim: pretrain.dim,
                ..ModelConfig::default()
            },
            pretrain,
            train: TrainConfig::default(),
            experiment: ExperimentConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Folds the `variant` shorthand into the model and checks every stage.
    pub fn finish(mut self) -> Result<Self> {
        if let Some(v) = self.variant {
            self.model.variant = v.config();
        }
        self.model.validate()?;
        self.train.validate()?;
        if self.pretrain.dim != self.model.dim {
            return Err(Error::Config(format!(
                "pretrain.dim {} differs from model.dim {}",
                self.pretrain.dim, self.model.dim
            )));
        }
        if self.experiment.seeds.is_empty() || self.experiment.ks.is_empty() || self.experiment.variants.is_empty() {
            return Err(Error::Config("experiment seeds, ks and variants must be nonempty".into()));
        }
        Ok(self)
    }

    pub fn fingerprint(&self) -> Result<String> {
        fingerprint(self)
    }
}
