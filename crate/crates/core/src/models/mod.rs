//! Graph classifiers: residual GCN, the sparse-attention transformer, and the
//! GCN with optional attention blocks.

mod attention;
mod attn_gcn;
mod expander;
mod exphormer;
mod gcn;
mod interaction;
mod params;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use attention::{init_attention_params, sparse_attention_layer, AttentionOutput, AttentionSettings};
pub use attn_gcn::{AttnPlacement, AttnResidualGcn, AttnResidualGcnConfig, AttnVariantConfig};
pub use expander::build_expander;
pub use exphormer::{Exphormer, ExphormerConfig, StructuralEncoding};
pub use gcn::{gcn_layer, gcn_layer_values, normalized_adjacency, ResidualGcn, ResidualGcnConfig};
pub use interaction::{EdgeCounts, EdgeKind, InteractionGraph};
pub use params::{Bound, Grads, ParamStore};

use crate::data::ConnectomeGraph;
use crate::error::{Error, Result};
use crate::tensor::{Mode, SparseAdj, Tape, Tensor, Var};

/// Per-graph inputs computed once before training: features plus whatever
/// propagation structure the model needs.
#[derive(Debug, Clone)]
pub struct PreparedGraph {
    pub x: Tensor,
    pub label: usize,
    pub n_real: usize,
    pub adjacency: Option<Arc<SparseAdj>>,
    pub interaction: Option<Arc<InteractionGraph>>,
}

impl PreparedGraph {
    pub fn adjacency(&self) -> Result<&Arc<SparseAdj>> {
        self.adjacency
            .as_ref()
            .ok_or_else(|| Error::contract("prepared graph has no normalized adjacency"))
    }

    pub fn interaction(&self) -> Result<&Arc<InteractionGraph>> {
        self.interaction
            .as_ref()
            .ok_or_else(|| Error::contract("prepared graph has no interaction graph"))
    }
}

pub trait GraphModel: Send + Sync {
    fn name(&self) -> &'static str;

    /// `{"kind": .., "config": ..}`, stored alongside checkpoints and runs.
    fn config_json(&self) -> serde_json::Value;

    fn params(&self) -> &ParamStore;

    fn params_mut(&mut self) -> &mut ParamStore;

    fn num_classes(&self) -> usize;

    /// `graph_seed` fixes any random structure (expander edges) per graph.
    fn prepare(&self, g: &ConnectomeGraph, graph_seed: u64) -> Result<PreparedGraph>;

    /// Records the forward pass and returns `1×C` logits.
    fn forward(&self, tape: &mut Tape, p: &Bound, input: &PreparedGraph, mode: Mode, seed: u64) -> Result<Var>;

    /// Convenience: prepare and run one graph on a fresh tape.
    fn logits(&self, g: &ConnectomeGraph, mode: Mode, seed: u64) -> Result<Tensor> {
        let input = self.prepare(g, seed)?;
        let mut tape = Tape::new();
        let bound = self.params().bind(&mut tape);
        let out = self.forward(&mut tape, &bound, &input, mode, seed)?;
        Ok(tape.value(out).clone())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    ResidualGcn,
    Exphormer,
    AttnResidualGcn,
}

impl ModelKind {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::ResidualGcn => "residual_gcn",
            Self::Exphormer => "exphormer",
            Self::AttnResidualGcn => "attn_residual_gcn",
        }
    }
}

impl std::fmt::Display for ModelKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().replace('-', "_").as_str() {
            "residual_gcn" | "gcn" => Ok(Self::ResidualGcn),
            "exphormer" => Ok(Self::Exphormer),
            "attn_residual_gcn" | "attn_gcn" => Ok(Self::AttnResidualGcn),
            other => Err(Error::config(format!("unknown model '{other}'"))),
        }
    }
}

/// Serializable model description; builds a fresh model for a given seed.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "config", rename_all = "snake_case")]
pub enum ModelSpec {
    ResidualGcn(ResidualGcnConfig),
    Exphormer(ExphormerConfig),
    AttnResidualGcn(AttnResidualGcnConfig),
}

impl ModelSpec {
    pub fn default_for(kind: ModelKind) -> Self {
        match kind {
            ModelKind::ResidualGcn => Self::ResidualGcn(ResidualGcnConfig::default()),
            ModelKind::Exphormer => Self::Exphormer(ExphormerConfig::default()),
            ModelKind::AttnResidualGcn => Self::AttnResidualGcn(AttnResidualGcnConfig::new(
                ResidualGcnConfig::default(),
                AttnVariantConfig {
                    placement: AttnPlacement::AfterEachGcn,
                    apply_probability: 1.0,
                },
            )),
        }
    }

    pub fn kind(&self) -> ModelKind {
        match self {
            Self::ResidualGcn(_) => ModelKind::ResidualGcn,
            Self::Exphormer(_) => ModelKind::Exphormer,
            Self::AttnResidualGcn(_) => ModelKind::AttnResidualGcn,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match self {
            Self::ResidualGcn(c) => c.validate(),
            Self::Exphormer(c) => c.validate(),
            Self::AttnResidualGcn(c) => c.validate(),
        }
    }

    /// Network dropout rate.
    pub fn dropout(&self) -> f64 {
        match self {
            Self::ResidualGcn(c) => c.dropout,
            Self::Exphormer(c) => c.dropout,
            Self::AttnResidualGcn(c) => c.base.dropout,
        }
    }

    pub fn build(&self, in_dim: usize, num_classes: usize, seed: u64) -> Result<Box<dyn GraphModel>> {
        Ok(match self {
            Self::ResidualGcn(c) => Box::new(ResidualGcn::new(c.clone(), in_dim, num_classes, seed)?),
            Self::Exphormer(c) => Box::new(Exphormer::new(c.clone(), in_dim, num_classes, seed)?),
            Self::AttnResidualGcn(c) => Box::new(AttnResidualGcn::new(c.clone(), in_dim, num_classes, seed)?),
        })
    }
}
