//! Synthetic connectome datasets with a controllable source of label signal.
//!
//! Each graph starts from a block-factor time series: node `v` in block `b`
//! follows `f_b(t) + noise_scale · ε_v(t)`, so same-block nodes correlate at
//! about `1 / (1 + noise_scale²)` and cross-block pairs near zero. The label
//! then enters through node features, through the block layout, or both.

use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::StandardNormal;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::correlation::pearson_correlation;
use super::graph::{build_graph, ConnectomeGraph};
use crate::error::{Error, Result};
use crate::rng;
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LabelMode {
    /// Class shifts the features of a fixed node subset; topology is
    /// class-independent.
    FeatureOnly,
    /// Class sets the number of correlated blocks; features are replaced by
    /// one noise matrix drawn from the dataset seed and shared by every graph,
    /// so without edges all graphs look identical.
    StructureOnly,
    Mixed,
}

impl std::str::FromStr for LabelMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.replace('-', "_").as_str() {
            "feature_only" => Ok(Self::FeatureOnly),
            "structure_only" => Ok(Self::StructureOnly),
            "mixed" => Ok(Self::Mixed),
            other => Err(Error::config(format!("unknown label mode '{other}'"))),
        }
    }
}

fn default_threshold() -> f64 {
    0.5
}

fn default_noise() -> f64 {
    0.6
}

fn default_signal() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub num_graphs: usize,
    /// Nodes per graph.
    pub n: usize,
    /// Feature width; `None` keeps the full correlation row (`d = n`).
    #[serde(default)]
    pub d: Option<usize>,
    pub num_classes: usize,
    #[serde(default = "default_threshold")]
    pub threshold: f64,
    pub label_mode: LabelMode,
    /// Idiosyncratic noise level of each node's time series.
    #[serde(default = "default_noise")]
    pub noise_scale: f64,
    /// Size of the class-specific feature shift (feature-bearing modes).
    #[serde(default = "default_signal")]
    pub feature_signal: f64,
    pub seed: u64,
}

impl SyntheticSpec {
    pub fn new(num_graphs: usize, n: usize, num_classes: usize, label_mode: LabelMode, seed: u64) -> Self {
        Self {
            num_graphs,
            n,
            d: None,
            num_classes,
            threshold: default_threshold(),
            label_mode,
            noise_scale: default_noise(),
            feature_signal: default_signal(),
            seed,
        }
    }

    pub fn feature_dim(&self) -> usize {
        self.d.unwrap_or(self.n)
    }

    pub fn validate(&self) -> Result<()> {
        if self.num_classes < 2 {
            return Err(Error::config("num_classes must be at least 2"));
        }
        if self.n < 4 {
            return Err(Error::config("graphs need at least 4 nodes"));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::config(format!("threshold {} not in (0, 1)", self.threshold)));
        }
        if self.num_graphs == 0 {
            return Err(Error::config("num_graphs must be positive"));
        }
        let d = self.feature_dim();
        if d == 0 || d > self.n {
            return Err(Error::config(format!("feature width {d} not in [1, {}]", self.n)));
        }
        if !(self.noise_scale > 0.0 && self.noise_scale.is_finite()) {
            return Err(Error::config("noise_scale must be positive"));
        }
        if !self.feature_signal.is_finite() {
            return Err(Error::config("feature_signal must be finite"));
        }
        Ok(())
    }

    /// Time-series length per graph.
    pub fn series_len(&self) -> usize {
        4 * self.n
    }

    /// Number of correlated blocks planted for class `c` in structure-bearing
    /// modes. Fewer, larger blocks mean denser graphs.
    pub fn blocks_for_class(&self, c: usize) -> usize {
        (2 + 3 * c).min((self.n / 2).max(2))
    }

    /// Nodes whose features carry the class shift.
    pub fn shifted_nodes(&self) -> usize {
        (self.n / 5).max(1)
    }
}

/// Generates `spec.num_graphs` labelled graphs; label of graph `i` is
/// `i mod num_classes`.
pub fn generate_synthetic(spec: &SyntheticSpec) -> Result<Vec<ConnectomeGraph>> {
    spec.validate()?;
    (0..spec.num_graphs)
        .into_par_iter()
        .map(|i| generate_one(spec, i))
        .collect()
}

fn generate_one(spec: &SyntheticSpec, index: usize) -> Result<ConnectomeGraph> {
    let mut rng = rng::stream(spec.seed, "synthetic_graph", index as u64);
    let n = spec.n;
    let t_len = spec.series_len();
    let label = index % spec.num_classes;

    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng);
    let mut block = vec![0usize; n];
    let num_blocks = match spec.label_mode {
        LabelMode::FeatureOnly => {
            let k = rng.random_range(2..=5usize).min(n);
            for b in block.iter_mut() {
                *b = rng.random_range(0..k);
            }
            k
        }
        LabelMode::StructureOnly | LabelMode::Mixed => {
            let k = spec.blocks_for_class(label);
            for (pos, &v) in order.iter().enumerate() {
                block[v] = pos % k;
            }
            k
        }
    };

    let factors: Vec<f64> = (0..num_blocks * t_len).map(|_| rng.sample(StandardNormal)).collect();
    let mut series = Tensor::zeros(n, t_len);
    for v in 0..n {
        let f = &factors[block[v] * t_len..(block[v] + 1) * t_len];
        for (s, fv) in series.row_mut(v).iter_mut().zip(f) {
            let eps: f64 = rng.sample(StandardNormal);
            *s = fv + spec.noise_scale * eps;
        }
    }
    let corr = pearson_correlation(&series)?;
    let g = build_graph(&corr, spec.threshold, label)?;

    let d = spec.feature_dim();
    let mut x = if d == n {
        g.x().clone()
    } else {
        let mut t = Tensor::zeros(n, d);
        for v in 0..n {
            t.row_mut(v).copy_from_slice(&g.x().row(v)[..d]);
        }
        t
    };

    match spec.label_mode {
        LabelMode::StructureOnly => {
            let mut frng = rng::stream(spec.seed, "structure_features", 0);
            for val in x.data_mut() {
                *val = frng.sample(StandardNormal);
            }
        }
        LabelMode::FeatureOnly | LabelMode::Mixed => {
            let width = (d / spec.num_classes).max(1);
            let lo = (label * width).min(d);
            let hi = ((label + 1) * width).min(d);
            for v in 0..spec.shifted_nodes() {
                for c in lo..hi {
                    let cur = x.get(v, c);
                    x.set(v, c, cur + spec.feature_signal);
                }
            }
        }
    }
    Ok(g.with_features(x))
}
