//! Seeded training and evaluation: learning-rate schedule, mini-batch Adam
//! epochs, model selection at the best validation epoch and multi-seed
//! aggregation.

mod config;
mod harness;
mod report;
mod schedule;

pub use config::{DecayRule, TrainConfig};
pub use harness::{
    aggregate, argmax, corrupt_graphs, evaluate, evaluate_with_loss, mean_std, predict, run_experiment, run_seed,
    train_epoch, EpochMetrics, ExperimentResult, RunResult,
};
pub use report::{curves_csv, format_mean_std, read_json, train_test_gap, write_json, write_string, CURVES_HEADER};
pub use schedule::{lr_at, MIN_LR};
