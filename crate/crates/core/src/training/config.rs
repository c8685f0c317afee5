use serde::{Deserialize, Serialize};

use crate::data::DEFAULT_RATIOS;
use crate::error::{Error, Result};
use crate::models::{ModelKind, ModelSpec};
use crate::optim::AdamConfig;

/// How the learning rate falls after warmup.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DecayRule {
    /// `base_lr - k·decay_per_epoch`
    #[default]
    Linear,
    /// `base_lr · (1 - decay_per_epoch)^k`
    Multiplicative,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub base_lr: f64,
    pub decay_per_epoch: f64,
    pub decay_rule: DecayRule,
    pub total_epochs: usize,
    pub warmup_epochs: usize,
    pub batch_size: usize,
    pub seeds: Vec<u64>,
    /// Seed of the stratified train/val/test split, shared by all run seeds.
    pub split_seed: u64,
    pub split_ratios: [f64; 3],
    pub adam: AdamConfig,
    pub model: ModelSpec,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            base_lr: 0.001,
            decay_per_epoch: 1e-5,
            decay_rule: DecayRule::Linear,
            total_epochs: 100,
            warmup_epochs: 5,
            batch_size: 16,
            seeds: vec![0, 1, 2],
            split_seed: 0,
            split_ratios: DEFAULT_RATIOS,
            adam: AdamConfig::default(),
            model: ModelSpec::default_for(ModelKind::ResidualGcn),
        }
    }
}

impl TrainConfig {
    pub fn with_model(model: ModelSpec) -> Self {
        Self {
            model,
            ..Self::default()
        }
    }

    pub fn model_kind(&self) -> ModelKind {
        self.model.kind()
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.base_lr > 0.0 && self.base_lr.is_finite()) {
            return Err(Error::config(format!("base_lr must be positive, got {}", self.base_lr)));
        }
        if !(self.decay_per_epoch >= 0.0 && self.decay_per_epoch.is_finite()) {
            return Err(Error::config("decay_per_epoch must be non-negative"));
        }
        if self.decay_rule == DecayRule::Multiplicative && self.decay_per_epoch >= 1.0 {
            return Err(Error::config("multiplicative decay_per_epoch must be < 1"));
        }
        if self.warmup_epochs >= self.total_epochs {
            return Err(Error::config(format!(
                "warmup_epochs {} must be below total_epochs {}",
                self.warmup_epochs, self.total_epochs
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::config("batch_size must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::config("at least one seed is required"));
        }
        self.model.validate()
    }
}
