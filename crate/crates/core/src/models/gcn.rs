//! Residual GCN: a stack of graph convolutions whose per-layer outputs are
//! concatenated, mean-pooled over nodes and classified by a two-layer MLP.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::params::{Bound, ParamStore};
use super::{GraphModel, PreparedGraph};
use crate::data::ConnectomeGraph;
use crate::error::{Error, Result};
use crate::rng::SeedSequence;
use crate::tensor::{check_rate, Mode, SparseAdj, Tape, Tensor, Var};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResidualGcnConfig {
    pub num_gcn_layers: usize,
    pub hidden_dim: usize,
    pub mlp_hidden: usize,
    pub dropout: f64,
    pub use_edge_weights: bool,
}

impl Default for ResidualGcnConfig {
    fn default() -> Self {
        Self {
            num_gcn_layers: 3,
            hidden_dim: 64,
            mlp_hidden: 64,
            dropout: 0.1,
            use_edge_weights: true,
        }
    }
}

impl ResidualGcnConfig {
    pub fn validate(&self) -> Result<()> {
        if self.num_gcn_layers == 0 {
            return Err(Error::config("num_gcn_layers must be at least 1"));
        }
        if self.hidden_dim == 0 || self.mlp_hidden == 0 {
            return Err(Error::config("layer widths must be positive"));
        }
        check_rate(self.dropout)
    }

    pub fn concat_dim(&self) -> usize {
        self.num_gcn_layers * self.hidden_dim
    }
}

/// Symmetrically normalised propagation matrix `D̂^{-1/2}(A + I)D̂^{-1/2}`
/// with both edge directions and a unit self-loop on every node. Without
/// weights every edge counts as 1.
pub fn normalized_adjacency(g: &ConnectomeGraph, use_edge_weights: bool) -> Result<SparseAdj> {
    let n = g.n();
    let mut degree = vec![1.0; n];
    let w = |i: usize| if use_edge_weights { g.edge_weights()[i] } else { 1.0 };
    for (i, &(u, v)) in g.edges().iter().enumerate() {
        degree[u] += w(i);
        degree[v] += w(i);
    }
    let inv_sqrt: Vec<f64> = degree.iter().map(|d| 1.0 / d.sqrt()).collect();
    let mut pairs = Vec::with_capacity(2 * g.num_edges() + n);
    let mut weights = Vec::with_capacity(pairs.capacity());
    for (i, &(u, v)) in g.edges().iter().enumerate() {
        let norm = w(i) * inv_sqrt[u] * inv_sqrt[v];
        pairs.push((u, v));
        weights.push(norm);
        pairs.push((v, u));
        weights.push(norm);
    }
    for v in 0..n {
        pairs.push((v, v));
        weights.push(1.0 / degree[v]);
    }
    SparseAdj::new(n, &pairs, &weights)
}

/// One graph convolution `ReLU(Â · h · W)` on the tape.
pub fn gcn_layer(tape: &mut Tape, adj: &Arc<SparseAdj>, h: Var, w: Var) -> Result<Var> {
    let hw = tape.matmul(h, w)?;
    let agg = tape.sparse_aggregate(adj, hw)?;
    Ok(tape.relu(agg))
}

/// Unrecorded convenience form of [`gcn_layer`] using edge weights.
pub fn gcn_layer_values(g: &ConnectomeGraph, h: &Tensor, w: &Tensor) -> Result<Tensor> {
    if h.rows() != g.n() {
        return Err(Error::Dimension {
            op: "gcn_layer",
            left: (g.n(), g.d()),
            right: h.shape(),
        });
    }
    let adj = Arc::new(normalized_adjacency(g, true)?);
    let mut tape = Tape::new();
    let hv = tape.constant(h.clone());
    let wv = tape.constant(w.clone());
    let out = gcn_layer(&mut tape, &adj, hv, wv)?;
    Ok(tape.value(out).clone())
}

#[derive(Debug, Clone)]
pub struct ResidualGcn {
    pub config: ResidualGcnConfig,
    in_dim: usize,
    num_classes: usize,
    params: ParamStore,
}

impl ResidualGcn {
    pub fn new(config: ResidualGcnConfig, in_dim: usize, num_classes: usize, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut params = ParamStore::new();
        init_residual_gcn_params(&mut params, &config, in_dim, num_classes, seed);
        Ok(Self {
            config,
            in_dim,
            num_classes,
            params,
        })
    }
}

pub(crate) fn init_residual_gcn_params(
    params: &mut ParamStore,
    cfg: &ResidualGcnConfig,
    in_dim: usize,
    num_classes: usize,
    seed: u64,
) {
    let mut d = in_dim;
    for i in 0..cfg.num_gcn_layers {
        params.init_glorot(&format!("gcn{i}.w"), d, cfg.hidden_dim, seed);
        d = cfg.hidden_dim;
    }
    params.init_glorot("mlp.w1", cfg.concat_dim(), cfg.mlp_hidden, seed);
    params.init_const("mlp.b1", 1, cfg.mlp_hidden, 0.0);
    params.init_glorot("mlp.w2", cfg.mlp_hidden, num_classes, seed);
    params.init_const("mlp.b2", 1, num_classes, 0.0);
}

pub(crate) fn check_input(g_d: usize, in_dim: usize) -> Result<()> {
    if g_d != in_dim {
        return Err(Error::Dimension {
            op: "model input",
            left: (0, in_dim),
            right: (0, g_d),
        });
    }
    Ok(())
}

/// Pooled readout MLP shared by the GCN variants: `W2·drop(ReLU(W1·z + b1)) + b2`.
pub(crate) fn mlp_head(
    tape: &mut Tape,
    p: &Bound,
    pooled: Var,
    dropout: f64,
    mode: Mode,
    seeds: &mut SeedSequence,
) -> Result<Var> {
    let z = tape.matmul(pooled, p.var("mlp.w1")?)?;
    let z = tape.add_row(z, p.var("mlp.b1")?)?;
    let z = tape.relu(z);
    let z = tape.dropout(z, dropout, mode, seeds.next_seed())?;
    let z = tape.matmul(z, p.var("mlp.w2")?)?;
    tape.add_row(z, p.var("mlp.b2")?)
}

impl GraphModel for ResidualGcn {
    fn name(&self) -> &'static str {
        "residual_gcn"
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
            adjacency: Some(Arc::new(normalized_adjacency(g, self.config.use_edge_weights)?)),
            interaction: None,
        })
    }

    fn forward(&self, tape: &mut Tape, p: &Bound, input: &PreparedGraph, mode: Mode, seed: u64) -> Result<Var> {
        let adj = input.adjacency()?;
        let mut seeds = SeedSequence::new(seed);
        let mut h = tape.constant(input.x.clone());
        let mut outs = Vec::with_capacity(self.config.num_gcn_layers);
        for i in 0..self.config.num_gcn_layers {
            h = gcn_layer(tape, adj, h, p.var(&format!("gcn{i}.w"))?)?;
            outs.push(h);
        }
        let cat = tape.concat_cols(&outs)?;
        let pooled = tape.mean_pool_rows(cat)?;
        mlp_head(tape, p, pooled, self.config.dropout, mode, &mut seeds)
    }
}
