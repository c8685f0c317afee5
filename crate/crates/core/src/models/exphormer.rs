//! Exphormer-style sparse graph transformer.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::attention::{init_attention_params, sparse_attention_layer, AttentionSettings};
use super::gcn::check_input;
use super::interaction::InteractionGraph;
use super::params::{Bound, ParamStore};
use super::{GraphModel, PreparedGraph};
use crate::data::ConnectomeGraph;
use crate::error::{Error, Result};
use crate::rng::SeedSequence;
use crate::tensor::{check_rate, Mode, Tape, Tensor, Var};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StructuralEncoding {
    None,
    /// Appends `ln(1 + degree)` over the local edges as an extra feature.
    Degree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExphormerConfig {
    pub num_layers: usize,
    pub num_heads: usize,
    pub hidden_dim: usize,
    pub dropout: f64,
    pub attention_dropout: f64,
    pub expander_degree: usize,
    pub num_global_nodes: usize,
    pub structural_encoding: StructuralEncoding,
}

impl Default for ExphormerConfig {
    fn default() -> Self {
        Self {
            num_layers: 2,
            num_heads: 4,
            hidden_dim: 64,
            dropout: 0.1,
            attention_dropout: 0.3,
            expander_degree: 4,
            num_global_nodes: 1,
            structural_encoding: StructuralEncoding::Degree,
        }
    }
}

impl ExphormerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_layers == 0 {
            return Err(Error::config("num_layers must be at least 1"));
        }
        if self.num_heads == 0 || self.hidden_dim == 0 || !self.hidden_dim.is_multiple_of(self.num_heads) {
            return Err(Error::config(format!(
                "hidden_dim {} must be a positive multiple of num_heads {}",
                self.hidden_dim, self.num_heads
            )));
        }
        if self.expander_degree < 2 || !self.expander_degree.is_multiple_of(2) {
            return Err(Error::config("expander_degree must be even and >= 2"));
        }
        check_rate(self.dropout)?;
        check_rate(self.attention_dropout)
    }

    fn attention(&self) -> AttentionSettings {
        AttentionSettings {
            heads: self.num_heads,
            dropout: self.dropout,
            attention_dropout: self.attention_dropout,
        }
    }
}

#[derive(Debug, Clone)]
pub struct Exphormer {
    pub config: ExphormerConfig,
    in_dim: usize,
    num_classes: usize,
    params: ParamStore,
}

impl Exphormer {
    pub fn new(config: ExphormerConfig, in_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let h = config.hidden_dim;
        let extra = usize::from(config.structural_encoding == StructuralEncoding::Degree);
        let mut params = ParamStore::new();
        params.init_glorot("in.w", in_dim + extra, h, seed);
        params.init_const("in.b", 1, h, 0.0);
        if config.num_global_nodes > 0 {
            params.init_normal("global", config.num_global_nodes, h, 0.1, seed);
        }
        for i in 0..config.num_layers {
            init_attention_params(&mut params, &format!("layer{i}"), h, seed);
        }
        params.init_glorot("head.w1", h, h, seed);
        params.init_const("head.b1", 1, h, 0.0);
        params.init_glorot("head.w2", h, num_classes, seed);
        params.init_const("head.b2", 1, num_classes, 0.0);
        Ok(Self {
            config,
            in_dim,
            num_classes,
            params,
        })
    }

    /// Node features with the structural encoding column, if enabled.
    pub fn input_features(&self, g: &ConnectomeGraph) -> Tensor {
        match self.config.structural_encoding {
            StructuralEncoding::None => g.x().clone(),
            StructuralEncoding::Degree => {
                let deg = g.degrees();
                let d = g.d();
                let mut x = Tensor::zeros(g.n(), d + 1);
                for v in 0..g.n() {
                    let row = x.row_mut(v);
                    row[..d].copy_from_slice(g.x().row(v));
                    row[d] = (1.0 + deg[v] as f64).ln();
                }
                x
            }
        }
    }
}

impl GraphModel for Exphormer {
    fn name(&self) -> &'static str {
        "exphormer"
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

    fn prepare(&self, g: &ConnectomeGraph, graph_seed: u64) -> Result<PreparedGraph> {
        check_input(g.d(), self.in_dim)?;
        let ig = InteractionGraph::build(g, self.config.expander_degree, self.config.num_global_nodes, graph_seed)?;
        Ok(PreparedGraph {
            x: self.input_features(g),
            label: g.label(),
            n_real: g.n(),
            adjacency: None,
            interaction: Some(Arc::new(ig)),
        })
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, input: &PreparedGraph, mode: Mode, seed: u64) -> Result<Var> {
        let ig = input.interaction()?;
        let mut seeds = SeedSequence::new(seed);
        let x = tape.constant(input.x.clone());
        let h = tape.matmul(x, p.var("in.w")?)?;
        let mut h = tape.add_row(h, p.var("in.b")?)?;
        if self.config.num_global_nodes > 0 {
            h = tape.concat_rows(&[h, p.var("global")?])?;
        }
        let settings = self.config.attention();
        for i in 0..self.config.num_layers {
            let prefix = format!("layer{i}");
            h = sparse_attention_layer(tape, p, &prefix, ig, h, &settings, mode, &mut seeds)?.out;
        }
        let real = tape.slice_rows(h, 0, input.n_real)?;
        let pooled = tape.mean_pool_rows(real)?;
        let z = tape.matmul(pooled, p.var("head.w1")?)?;
        let z = tape.add_row(z, p.var("head.b1")?)?;
        let z = tape.relu(z);
        let z = tape.dropout(z, self.config.dropout, mode, seeds.next_seed())?;
        let z = tape.matmul(z, p.var("head.w2")?)?;
        tape.add_row(z, p.var("head.b2")?)
    }
}
