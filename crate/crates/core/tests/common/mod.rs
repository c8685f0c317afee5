//! Helpers shared by the integration tests: random graphs, a closed-form
//! linear probe and a dense reference forward pass.

#![allow(dead_code)]

use connectome_bench::data::{ConnectomeGraph, Dataset, LabelMode, SyntheticSpec};
use connectome_bench::models::ParamStore;
use connectome_bench::tensor::Tensor;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_tensor(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Tensor {
    let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
    Tensor::from_vec(rows, cols, data).unwrap()
}

/// Erdős–Rényi style graph with random features and weights in (0.5, 1).
pub fn random_graph(rng: &mut ChaCha8Rng, n: usize, d: usize, density: f64, label: usize) -> ConnectomeGraph {
    let mut edges = Vec::new();
    let mut weights = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random::<f64>() < density {
                edges.push((u, v));
                weights.push(rng.random_range(0.5..1.0));
            }
        }
    }
    ConnectomeGraph::new(random_tensor(rng, n, d), edges, weights, label).unwrap()
}

pub fn synthetic(num_graphs: usize, n: usize, mode: LabelMode, seed: u64) -> Dataset {
    Dataset::synthetic(&SyntheticSpec::new(num_graphs, n, 2, mode, seed)).unwrap()
}

/// Mean over nodes of each feature column, plus a bias term.
pub fn pooled_features(g: &ConnectomeGraph) -> Vec<f64> {
    let x = g.x();
    let mut f = vec![0.0; x.cols() + 1];
    for r in 0..x.rows() {
        for (c, v) in x.row(r).iter().enumerate() {
            f[c] += v / x.rows() as f64;
        }
    }
    f[x.cols()] = 1.0;
    f
}

/// Solves `a·x = b` by Gaussian elimination with partial pivoting.
fn solve(mut a: Vec<Vec<f64>>, mut b: Vec<f64>) -> Vec<f64> {
    let n = b.len();
    for col in 0..n {
        let piv = (col..n)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..n {
            let f = a[r][col] / a[col][col];
            if f != 0.0 {
                for c in col..n {
                    a[r][c] -= f * a[col][c];
                }
                b[r] -= f * b[col];
            }
        }
    }
    let mut x = vec![0.0; n];
    for r in (0..n).rev() {
        let s: f64 = (r + 1..n).map(|c| a[r][c] * x[c]).sum();
        x[r] = (b[r] - s) / a[r][r];
    }
    x
}

/// Closed-form least-squares probe on pooled node features with one-hot
/// targets (small ridge for conditioning). Fits on `fit`, returns accuracy
/// in percent on `eval`. Never looks at edges.
pub fn linear_probe_accuracy(graphs: &[ConnectomeGraph], classes: usize, fit: &[usize], eval: &[usize]) -> f64 {
    let feats: Vec<Vec<f64>> = graphs.iter().map(pooled_features).collect();
    let k = feats[0].len();
    let mut xtx = vec![vec![0.0; k]; k];
    for &i in fit {
        for a in 0..k {
            for b in 0..k {
                xtx[a][b] += feats[i][a] * feats[i][b];
            }
        }
    }
    for (a, row) in xtx.iter_mut().enumerate() {
        row[a] += 1e-6;
    }
    let weights: Vec<Vec<f64>> = (0..classes)
        .map(|c| {
            let xty: Vec<f64> = (0..k)
                .map(|a| {
                    fit.iter()
                        .map(|&i| feats[i][a] * if graphs[i].label() == c { 1.0 } else { 0.0 })
                        .sum()
                })
                .collect();
            solve(xtx.clone(), xty)
        })
        .collect();
    let correct = eval
        .iter()
        .filter(|&&i| {
            let scores: Vec<f64> = weights
                .iter()
                .map(|w| w.iter().zip(&feats[i]).map(|(a, b)| a * b).sum())
                .collect();
            let mut best = 0;
            for c in 1..classes {
                if scores[c] > scores[best] {
                    best = c;
                }
            }
            best == graphs[i].label()
        })
        .count();
    100.0 * correct as f64 / eval.len() as f64
}

fn dense_matmul(a: &[Vec<f64>], w: &Tensor) -> Vec<Vec<f64>> {
    a.iter()
        .map(|row| {
            (0..w.cols())
                .map(|j| row.iter().enumerate().map(|(k, v)| v * w.get(k, j)).sum())
                .collect()
        })
        .collect()
}

/// Edge-free ResidualGCN written out densely: with no edges the propagation
/// matrix is the identity, so each layer is `ReLU(H·W)`.
pub fn residual_gcn_no_edges_reference(x: &Tensor, params: &ParamStore, layers: usize) -> Vec<f64> {
    let mut h: Vec<Vec<f64>> = (0..x.rows()).map(|r| x.row(r).to_vec()).collect();
    let mut cat: Vec<Vec<f64>> = vec![Vec::new(); x.rows()];
    for l in 0..layers {
        h = dense_matmul(&h, params.get(&format!("gcn{l}.w")).unwrap())
            .into_iter()
            .map(|r| r.into_iter().map(|v| v.max(0.0)).collect())
            .collect();
        for (c, r) in cat.iter_mut().zip(&h) {
            c.extend_from_slice(r);
        }
    }
    let width = cat[0].len();
    let pooled: Vec<f64> = (0..width)
        .map(|j| cat.iter().map(|r| r[j]).sum::<f64>() / x.rows() as f64)
        .collect();
    let b1 = params.get("mlp.b1").unwrap();
    let z: Vec<f64> = dense_matmul(&[pooled], params.get("mlp.w1").unwrap())[0]
        .iter()
        .enumerate()
        .map(|(j, v)| (v + b1.get(0, j)).max(0.0))
        .collect();
    let b2 = params.get("mlp.b2").unwrap();
    dense_matmul(&[z], params.get("mlp.w2").unwrap())[0]
        .iter()
        .enumerate()
        .map(|(j, v)| v + b2.get(0, j))
        .collect()
}
