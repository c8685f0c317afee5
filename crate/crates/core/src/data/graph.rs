use rand::Rng;

use super::correlation::CorrelationMatrix;
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

/// One static connectome: node features, undirected weighted edges stored
/// once with `u < v`, and a graph-level class label.
#[derive(Debug, Clone, PartialEq)]
pub struct ConnectomeGraph {
    x: Tensor,
    edges: Vec<(usize, usize)>,
    weights: Vec<f64>,
    label: usize,
}

impl ConnectomeGraph {
    pub fn new(x: Tensor, edges: Vec<(usize, usize)>, weights: Vec<f64>, label: usize) -> Result<Self> {
        let n = x.rows();
        if edges.len() != weights.len() {
            return Err(Error::Dimension {
                op: "connectome_graph",
                left: (edges.len(), 2),
                right: (weights.len(), 1),
            });
        }
        let mut seen = std::collections::HashSet::with_capacity(edges.len());
        for &(u, v) in &edges {
            if v >= n {
                return Err(Error::Index {
                    what: "edge endpoint",
                    index: v,
                    bound: n,
                });
            }
            if u >= v {
                return Err(Error::config(format!("edge ({u}, {v}) must be stored with u < v")));
            }
            if !seen.insert((u, v)) {
                return Err(Error::config(format!("duplicate edge ({u}, {v})")));
            }
        }
        Ok(Self {
            x,
            edges,
            weights,
            label,
        })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.x.rows()
    }

    /// Node-feature width.
    #[inline]
    pub fn d(&self) -> usize {
        self.x.cols()
    }

    pub fn x(&self) -> &Tensor {
        &self.x
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn edge_weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn num_edges(&self) -> usize {
        self.edges.len()
    }

    pub fn label(&self) -> usize {
        self.label
    }

    /// Same graph without any edges.
    pub fn without_edges(&self) -> Self {
        Self {
            x: self.x.clone(),
            edges: Vec::new(),
            weights: Vec::new(),
            label: self.label,
        }
    }

    pub(crate) fn with_features(mut self, x: Tensor) -> Self {
        debug_assert_eq!(x.rows(), self.n());
        self.x = x;
        self
    }

    /// Fraction of the `n(n−1)/2` possible pairs that carry an edge.
    pub fn edge_density(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        self.edges.len() as f64 / (n * (n - 1) / 2) as f64
    }

    /// Unweighted node degrees.
    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.n()];
        for &(u, v) in &self.edges {
            deg[u] += 1;
            deg[v] += 1;
        }
        deg
    }
}

/// Thresholds a correlation matrix: edge `(u, v)` for every `u < v` with
/// `C[u, v] > tau`, weighted by the correlation. Node features are the full
/// correlation rows.
pub fn build_graph(corr: &CorrelationMatrix, tau: f64, label: usize) -> Result<ConnectomeGraph> {
    if !(tau > 0.0 && tau < 1.0) {
        return Err(Error::config(format!("threshold {tau} not in (0, 1)")));
    }
    let n = corr.n();
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for u in 0..n {
        for v in (u + 1)..n {
            let c = corr.get(u, v);
            if c > tau {
                edges.push((u, v));
                weights.push(c);
            }
        }
    }
    ConnectomeGraph::new(corr.as_tensor().clone(), edges, weights, label)
}

/// Removes each edge independently with probability `p`.
pub fn drop_edges(g: &ConnectomeGraph, p: f64, seed: u64) -> Result<ConnectomeGraph> {
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::config(format!("edge-drop probability {p} not in [0, 1]")));
    }
    let mut rng = rng::stream(seed, "drop_edges", 0);
    let mut edges = Vec::with_capacity(g.edges.len());
    let mut weights = Vec::with_capacity(g.edges.len());
    for (&e, &w) in g.edges.iter().zip(&g.weights) {
        // one draw per edge regardless of p, so streams line up across p
        let r: f64 = rng.random();
        if r >= p {
            edges.push(e);
            weights.push(w);
        }
    }
    Ok(ConnectomeGraph {
        x: g.x.clone(),
        edges,
        weights,
        label: g.label,
    })
}
