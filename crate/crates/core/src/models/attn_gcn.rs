//! Residual GCN with sparse attention blocks over the local edges, inserted
//! either after every GCN layer or once after the concatenation. In training
//! the insertion is switched on per forward pass with a fixed probability.

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::attention::{init_attention_params, sparse_attention_layer, AttentionSettings};
use super::gcn::{check_input, gcn_layer, init_residual_gcn_params, mlp_head, normalized_adjacency, ResidualGcnConfig};
use super::interaction::InteractionGraph;
use super::params::{Bound, ParamStore};
use super::{GraphModel, PreparedGraph};
use crate::data::ConnectomeGraph;
use crate::error::{Error, Result};
use crate::rng::{self, SeedSequence};
use crate::tensor::{check_rate, Mode, Tape, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttnPlacement {
    AfterEachGcn,
    AfterConcat,
}

impl std::str::FromStr for AttnPlacement {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "after_each_gcn" => Ok(Self::AfterEachGcn),
            "after_concat" => Ok(Self::AfterConcat),
            other => Err(Error::config(format!("unknown attention placement '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AttnVariantConfig {
    pub placement: AttnPlacement,
    pub apply_probability: f64,
}

impl AttnVariantConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.apply_probability) {
            return Err(Error::config(format!(
                "apply_probability {} not in [0, 1]",
                self.apply_probability
            )));
        }
        Ok(())
    }
}

fn default_heads() -> usize {
    4
}

fn default_attention_dropout() -> f64 {
    0.3
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AttnResidualGcnConfig {
    #[serde(default)]
    pub base: ResidualGcnConfig,
    pub variant: AttnVariantConfig,
    #[serde(default = "default_heads")]
    pub num_heads: usize,
    #[serde(default = "default_attention_dropout")]
    pub attention_dropout: f64,
}

impl AttnResidualGcnConfig {
    pub fn new(base: ResidualGcnConfig, variant: AttnVariantConfig) -> Self {
        Self {
            base,
            variant,
            num_heads: default_heads(),
            attention_dropout: default_attention_dropout(),
        }
    }

    fn attention_width(&self) -> usize {
        match self.variant.placement {
            AttnPlacement::AfterEachGcn => self.base.hidden_dim,
            AttnPlacement::AfterConcat => self.base.concat_dim(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.base.validate()?;
        self.variant.validate()?;
        check_rate(self.attention_dropout)?;
        let w = self.attention_width();
        if self.num_heads == 0 || !w.is_multiple_of(self.num_heads) {
            return Err(Error::config(format!(
                "attention width {w} not divisible by {} heads",
                self.num_heads
            )));
        }
        Ok(())
    }
}

#[derive(Debug)]
pub struct AttnResidualGcn {
    pub config: AttnResidualGcnConfig,
    in_dim: usize,
    num_classes: usize,
    params: ParamStore,
    applications: AtomicUsize,
}

impl Clone for AttnResidualGcn {
    fn clone(&self) -> Self {
        Self {
            config: self.config.clone(),
            in_dim: self.in_dim,
            num_classes: self.num_classes,
            params: self.params.clone(),
            applications: AtomicUsize::new(self.attention_applications()),
        }
    }
}

impl AttnResidualGcn {
    /// Shares parameter names and initial values with a plain
    /// [`ResidualGcn`](super::ResidualGcn) built from the same seed.
    pub fn new(config: AttnResidualGcnConfig, in_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        init_residual_gcn_params(&mut params, &config.base, in_dim, num_classes, seed);
        match config.variant.placement {
            AttnPlacement::AfterEachGcn => {
                for i in 0..config.base.num_gcn_layers {
                    init_attention_params(&mut params, &format!("attn{i}"), config.base.hidden_dim, seed);
                }
            }
            AttnPlacement::AfterConcat => {
                init_attention_params(&mut params, "attn_cat", config.base.concat_dim(), seed);
            }
        }
        Ok(Self {
            config,
            in_dim,
            num_classes,
            params,
            applications: AtomicUsize::new(0),
        })
    }

    /// Number of attention blocks executed so far.
    pub fn attention_applications(&self) -> usize {
        self.applications.load(Ordering::Relaxed)
    }

    pub fn reset_counter(&self) {
        self.applications.store(0, Ordering::Relaxed);
    }

    fn attention_enabled(&self, mode: Mode, seed: u64) -> bool {
        let p = self.config.variant.apply_probability;
        match mode {
            Mode::Eval => p > 0.0,
            Mode::Train => {
                if p <= 0.0 {
                    false
                } else if p >= 1.0 {
                    true
                } else {
                    rng::stream(seed, "attention_gate", 0).random::<f64>() < p
                }
            }
        }
    }
}

impl GraphModel for AttnResidualGcn {
    fn name(&self) -> &'static str {
        "attn_residual_gcn"
    }

    fn config_json(&self) -> serde_json::Value {
        serde_json::json!({ "kind": self.name(), "config": self.config })
    }

    fn params(&self) -> &ParamStore {
        &self.params
    }

    fn params_mut(&mut self) -> &mut ParamStore {
        &mut self.params
    }

    fn num_classes(&self) -> usize {
        self.num_classes
    }

    fn prepare(&self, g: &ConnectomeGraph, _graph_seed: u64) -> Result<PreparedGraph> {
        check_input(g.d(), self.in_dim)?;
        Ok(PreparedGraph {
            x: g.x().clone(),
            label: g.label(),
            n_real: g.n(),
            adjacency: Some(Arc::new(normalized_adjacency(g, self.config.base.use_edge_weights)?)),
            interaction: Some(Arc::new(InteractionGraph::local_only(g)?)),
        })
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, input: &PreparedGraph, mode: Mode, seed: u64) -> Result<Var> {
        let adj = input.adjacency()?;
        let ig = input.interaction()?;
        let attend = self.attention_enabled(mode, seed);
        let settings = AttentionSettings {
            heads: self.config.num_heads,
            dropout: self.config.base.dropout,
            attention_dropout: self.config.attention_dropout,
        };
        let mut seeds = SeedSequence::new(seed);
        let mut attn_seeds = SeedSequence::new(rng::derive_seed(seed, "attention_dropout", 0));

        let mut h = tape.constant(input.x.clone());
        let mut outs = Vec::with_capacity(self.config.base.num_gcn_layers);
        for i in 0..self.config.base.num_gcn_layers {
            h = gcn_layer(tape, adj, h, p.var(&format!("gcn{i}.w"))?)?;
            if attend && self.config.variant.placement == AttnPlacement::AfterEachGcn {
                h = sparse_attention_layer(tape, p, &format!("attn{i}"), ig, h, &settings, mode, &mut attn_seeds)?.out;
                self.applications.fetch_add(1, Ordering::Relaxed);
            }
            outs.push(h);
        }
        let mut cat = tape.concat_cols(&outs)?;
        if attend && self.config.variant.placement == AttnPlacement::AfterConcat {
            cat = sparse_attention_layer(tape, p, "attn_cat", ig, cat, &settings, mode, &mut attn_seeds)?.out;
            self.applications.fetch_add(1, Ordering::Relaxed);
        }
        let pooled = tape.mean_pool_rows(cat)?;
        mlp_head(tape, p, pooled, self.config.base.dropout, mode, &mut seeds)
    }
}
