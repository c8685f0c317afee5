//! The directed edge set sparse attention runs over: local input edges,
//! expander edges and virtual global-node edges, plus self-loops.

use std::collections::HashMap;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::expander::build_expander;
use crate::data::ConnectomeGraph;
use crate::error::Result;
use crate::tensor::EdgeIndex;

/// Where an attention edge came from. Declaration order is dedup priority.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EdgeKind {
    Local,
    Expander,
    Global,
    SelfLoop,
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct EdgeCounts {
    pub local: usize,
    pub expander: usize,
    pub global: usize,
    pub self_loops: usize,
}

impl EdgeCounts {
    pub fn total(&self) -> usize {
        self.local + self.expander + self.global + self.self_loops
    }
}

/// Nodes `0..n_real` are the input graph's nodes; `n_real..n_total` are
/// virtual global nodes.
#[derive(Debug, Clone)]
pub struct InteractionGraph {
    n_real: usize,
    n_total: usize,
    edges: Arc<EdgeIndex>,
    /// Aligned with the destination-sorted order of `edges`.
    kinds: Vec<EdgeKind>,
}

#[derive(Default)]
struct Builder {
    tags: HashMap<(usize, usize), EdgeKind>,
}

impl Builder {
    fn add(&mut self, u: usize, v: usize, kind: EdgeKind) {
        self.tags
            .entry((u, v))
            .and_modify(|k| *k = (*k).min(kind))
            .or_insert(kind);
    }

    fn add_both(&mut self, u: usize, v: usize, kind: EdgeKind) {
        self.add(u, v, kind);
        self.add(v, u, kind);
    }

    fn finish(self, n_real: usize, n_total: usize) -> Result<InteractionGraph> {
        let mut entries: Vec<((usize, usize), EdgeKind)> = self.tags.into_iter().collect();
        entries.sort_unstable();
        let pairs: Vec<(usize, usize)> = entries.iter().map(|e| e.0).collect();
        let (edges, perm) = EdgeIndex::new(n_total, &pairs)?;
        let kinds = perm.iter().map(|&i| entries[i].1).collect();
        Ok(InteractionGraph {
            n_real,
            n_total,
            edges: Arc::new(edges),
            kinds,
        })
    }
}

impl InteractionGraph {
    /// Full three-component graph: local ∪ expander ∪ global edges, with a
    /// self-loop on every real and virtual node. Duplicate directed pairs keep
    /// the highest-priority tag (local > expander > global).
    pub fn build(g: &ConnectomeGraph, expander_degree: usize, num_global_nodes: usize, seed: u64) -> Result<Self> {
        let n = g.n();
        let mut b = Builder::default();
        for &(u, v) in g.edges() {
            b.add_both(u, v, EdgeKind::Local);
        }
        for (u, v) in build_expander(n, expander_degree, seed)? {
            b.add_both(u, v, EdgeKind::Expander);
        }
        for k in 0..num_global_nodes {
            for v in 0..n {
                b.add_both(n + k, v, EdgeKind::Global);
            }
        }
        for v in 0..n + num_global_nodes {
            b.add(v, v, EdgeKind::SelfLoop);
        }
        b.finish(n, n + num_global_nodes)
    }

    /// Local edges plus self-loops only.
    pub fn local_only(g: &ConnectomeGraph) -> Result<Self> {
        let mut b = Builder::default();
        for &(u, v) in g.edges() {
            b.add_both(u, v, EdgeKind::Local);
        }
        for v in 0..g.n() {
            b.add(v, v, EdgeKind::SelfLoop);
        }
        b.finish(g.n(), g.n())
    }

    pub fn n_real(&self) -> usize {
        self.n_real
    }

    pub fn n_total(&self) -> usize {
        self.n_total
    }

    pub fn num_global(&self) -> usize {
        self.n_total - self.n_real
    }

    pub fn edges(&self) -> &Arc<EdgeIndex> {
        &self.edges
    }

    pub fn kinds(&self) -> &[EdgeKind] {
        &self.kinds
    }

    pub fn len(&self) -> usize {
        self.kinds.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kinds.is_empty()
    }

    pub fn is_virtual(&self, v: usize) -> bool {
        v >= self.n_real
    }

    pub fn counts(&self) -> EdgeCounts {
        let mut c = EdgeCounts::default();
        for k in &self.kinds {
            match k {
                EdgeKind::Local => c.local += 1,
                EdgeKind::Expander => c.expander += 1,
                EdgeKind::Global => c.global += 1,
                EdgeKind::SelfLoop => c.self_loops += 1,
            }
        }
        c
    }

    /// `2|E| + degree·|V| + 2g|V| + (|V| + g)`.
    pub fn edge_budget(num_edges: usize, n: usize, degree: usize, g: usize) -> usize {
        2 * num_edges + degree * n + 2 * g * n + n + g
    }
}
