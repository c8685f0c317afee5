use rand::seq::SliceRandom;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::config::TrainConfig;
use super::schedule::lr_at;
use crate::data::{drop_edges, split, Dataset, DatasetSplits};
use crate::error::{Error, Result};
use crate::models::{GraphModel, PreparedGraph};
use crate::optim::Adam;
use crate::rng;
use crate::tensor::{Mode, Tape, Tensor};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochMetrics {
    pub epoch: usize,
    pub lr: f64,
    /// Mean mini-batch cross-entropy seen by the optimizer (train mode).
    pub batch_loss: f64,
    pub train_accuracy: f64,
    pub val_accuracy: f64,
    pub test_accuracy: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub test_loss: f64,
}

/// One seed's full training run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunResult {
    pub seed: u64,
    pub drop_p: f64,
    /// Edges left across the whole dataset after dropping.
    pub total_edges: usize,
    pub best_val_epoch: usize,
    pub best_val_accuracy: f64,
    pub test_at_best_val: f64,
    pub curves: Vec<EpochMetrics>,
}

impl RunResult {
    pub fn final_epoch(&self) -> &EpochMetrics {
        self.curves.last().expect("runs have at least one epoch")
    }
}

/// Runs over all seeds of one `(config, drop_p)` cell.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentResult {
    pub drop_p: f64,
    pub runs: Vec<RunResult>,
    /// Mean and sample std of `test_at_best_val` across seeds.
    pub mean: f64,
    pub std: f64,
    pub val_mean: f64,
    pub val_std: f64,
}

/// Mean and sample standard deviation; the std of a single value is 0.
pub fn mean_std(values: &[f64]) -> (f64, f64) {
    if values.is_empty() {
        return (f64::NAN, f64::NAN);
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() == 1 {
        return (mean, 0.0);
    }
    let ss: f64 = values.iter().map(|v| (v - mean).powi(2)).sum();
    (mean, (ss / (n - 1.0)).sqrt())
}

/// Index of the largest entry; ties go to the lowest index.
pub fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in row.iter().enumerate() {
        if v > row[best] {
            best = i;
        }
    }
    best
}

fn log_softmax_nll(row: &[f64], label: usize) -> f64 {
    let m = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let lse = m + row.iter().map(|v| (v - m).exp()).sum::<f64>().ln();
    lse - row[label]
}

/// Eval-mode logits for each listed graph.
pub fn predict(model: &dyn GraphModel, data: &[PreparedGraph], indices: &[usize]) -> Result<Vec<Tensor>> {
    let mut out = Vec::with_capacity(indices.len());
    for &i in indices {
        let g = data.get(i).ok_or(Error::Index {
            what: "graph",
            index: i,
            bound: data.len(),
        })?;
        let mut tape = Tape::new();
        let bound = model.params().bind(&mut tape);
        let logits = model.forward(&mut tape, &bound, g, Mode::Eval, 0)?;
        out.push(tape.value(logits).clone());
    }
    Ok(out)
}

/// Accuracy (percent) and mean cross-entropy in eval mode.
pub fn evaluate_with_loss(model: &dyn GraphModel, data: &[PreparedGraph], indices: &[usize]) -> Result<(f64, f64)> {
    if indices.is_empty() {
        return Err(Error::contract("cannot evaluate an empty index list"));
    }
    let logits = predict(model, data, indices)?;
    let mut correct = 0usize;
    let mut loss = 0.0;
    for (l, &i) in logits.iter().zip(indices) {
        let label = data[i].label;
        if argmax(l.row(0)) == label {
            correct += 1;
        }
        loss += log_softmax_nll(l.row(0), label);
    }
    let n = indices.len() as f64;
    Ok((100.0 * correct as f64 / n, loss / n))
}

/// Eval-mode accuracy in percent.
pub fn evaluate(model: &dyn GraphModel, data: &[PreparedGraph], indices: &[usize]) -> Result<f64> {
    evaluate_with_loss(model, data, indices).map(|(acc, _)| acc)
}

/// One pass over the shuffled training split followed by evaluation of all
/// three splits. Deterministic in `(run_seed, epoch)`.
pub fn train_epoch(
    model: &mut dyn GraphModel,
    optimizer: &mut Adam,
    data: &[PreparedGraph],
    splits: &DatasetSplits,
    cfg: &TrainConfig,
    epoch: usize,
    run_seed: u64,
) -> Result<EpochMetrics> {
    if splits.train.is_empty() {
        return Err(Error::contract("training split is empty"));
    }
    let lr = lr_at(epoch, cfg)?;
    let mut order = splits.train.clone();
    order.shuffle(&mut rng::stream(run_seed, "shuffle", epoch as u64));
    let epoch_seed = rng::derive_seed(run_seed, "epoch", epoch as u64);

    let mut loss_sum = 0.0;
    let mut batches = 0usize;
    for (b, batch) in order.chunks(cfg.batch_size).enumerate() {
        let mut tape = Tape::new();
        let bound = model.params().bind(&mut tape);
        let mut rows = Vec::with_capacity(batch.len());
        let mut labels = Vec::with_capacity(batch.len());
        for &i in batch {
            let g = &data[i];
            let seed = rng::derive_seed(epoch_seed, "forward", i as u64);
            rows.push(model.forward(&mut tape, &bound, g, Mode::Train, seed)?);
            labels.push(g.label);
        }
        let logits = tape.concat_rows(&rows)?;
        let loss = tape.cross_entropy(logits, &labels)?;
        let value = tape.value(loss).get(0, 0);
        if !value.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: b,
                loss: value,
            });
        }
        tape.backward(loss)?;
        let grads = bound.grads(&tape);
        optimizer.step(model.params_mut(), &grads, lr)?;
        loss_sum += value;
        batches += 1;
    }

    let model: &dyn GraphModel = model;
    let (train_accuracy, train_loss) = evaluate_with_loss(model, data, &splits.train)?;
    let (val_accuracy, val_loss) = evaluate_with_loss(model, data, &splits.val)?;
    let (test_accuracy, test_loss) = evaluate_with_loss(model, data, &splits.test)?;
    Ok(EpochMetrics {
        epoch,
        lr,
        batch_loss: loss_sum / batches as f64,
        train_accuracy,
        val_accuracy,
        test_accuracy,
        train_loss,
        val_loss,
        test_loss,
    })
}

/// Copies of the dataset graphs with edges dropped independently per graph.
pub fn corrupt_graphs(dataset: &Dataset, drop_p: f64, seed: u64) -> Result<Vec<crate::data::ConnectomeGraph>> {
    dataset
        .graphs
        .iter()
        .enumerate()
        .map(|(i, g)| drop_edges(g, drop_p, rng::derive_seed(seed, "drop", i as u64)))
        .collect()
}

/// Full schedule for a single seed.
pub fn run_seed(cfg: &TrainConfig, dataset: &Dataset, drop_p: f64, seed: u64) -> Result<RunResult> {
    cfg.validate()?;
    let in_dim = dataset
        .feature_dim()
        .ok_or_else(|| Error::contract("dataset has no graphs"))?;
    let splits = split(&dataset.graphs, cfg.split_ratios, cfg.split_seed)?;
    let graphs = corrupt_graphs(dataset, drop_p, seed)?;
    let total_edges = graphs.iter().map(|g| g.num_edges()).sum();
    if drop_p == 1.0 {
        log::info!(
            "seed {seed}: p=1.0, {total_edges} edges remain across {} graphs",
            graphs.len()
        );
    }
    let mut model = cfg
        .model
        .build(in_dim, dataset.num_classes, rng::derive_seed(seed, "init", 0))?;
    let data = graphs
        .iter()
        .enumerate()
        .map(|(i, g)| model.prepare(g, rng::derive_seed(seed, "structure", i as u64)))
        .collect::<Result<Vec<_>>>()?;
    let mut optimizer = Adam::new(cfg.adam);
    let mut curves = Vec::with_capacity(cfg.total_epochs);
    for epoch in 0..cfg.total_epochs {
        let m = train_epoch(model.as_mut(), &mut optimizer, &data, &splits, cfg, epoch, seed).inspect_err(|e| {
            log::error!("seed {seed}, drop_p {drop_p}: {e}");
        })?;
        log::debug!(
            "seed {seed} epoch {epoch}: loss {:.4} train {:.2} val {:.2} test {:.2}",
            m.batch_loss,
            m.train_accuracy,
            m.val_accuracy,
            m.test_accuracy
        );
        curves.push(m);
    }
    // Earliest epoch wins ties on validation accuracy.
    let best = curves.iter().fold(
        &curves[0],
        |best, m| if m.val_accuracy > best.val_accuracy { m } else { best },
    );
    Ok(RunResult {
        seed,
        drop_p,
        total_edges,
        best_val_epoch: best.epoch,
        best_val_accuracy: best.val_accuracy,
        test_at_best_val: best.test_accuracy,
        curves,
    })
}

/// Trains every seed (in parallel) and aggregates test accuracy at the
/// best-validation epoch. The dataset itself is never modified.
pub fn run_experiment(cfg: &TrainConfig, dataset: &Dataset, drop_p: f64) -> Result<ExperimentResult> {
    cfg.validate()?;
    let runs = cfg
        .seeds
        .par_iter()
        .map(|&s| run_seed(cfg, dataset, drop_p, s))
        .collect::<Result<Vec<_>>>()?;
    Ok(aggregate(drop_p, runs))
}

pub fn aggregate(drop_p: f64, runs: Vec<RunResult>) -> ExperimentResult {
    let test: Vec<f64> = runs.iter().map(|r| r.test_at_best_val).collect();
    let val: Vec<f64> = runs.iter().map(|r| r.best_val_accuracy).collect();
    let (mean, std) = mean_std(&test);
    let (val_mean, val_std) = mean_std(&val);
    ExperimentResult {
        drop_p,
        runs,
        mean,
        std,
        val_mean,
        val_std,
    }
}
