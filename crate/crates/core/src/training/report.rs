use std::fmt::Write as _;
use std::path::Path;

use super::harness::{ExperimentResult, RunResult};
use crate::error::{Error, Result};

pub const CURVES_HEADER: &str = "epoch,split,accuracy,loss,lr";

/// Per-epoch curves, one row per (epoch, split).
pub fn curves_csv(run: &RunResult) -> String {
    let mut s = String::from(CURVES_HEADER);
    s.push('\n');
    for m in &run.curves {
        for (split, acc, loss) in [
            ("train", m.train_accuracy, m.train_loss),
            ("val", m.val_accuracy, m.val_loss),
            ("test", m.test_accuracy, m.test_loss),
        ] {
            let _ = writeln!(s, "{},{split},{acc},{loss},{}", m.epoch, m.lr);
        }
    }
    s
}

/// Final-epoch train accuracy minus final-epoch test accuracy.
pub fn train_test_gap(run: &RunResult) -> f64 {
    let last = run.final_epoch();
    last.train_accuracy - last.test_accuracy
}

/// `52.11 ± 0.00`
pub fn format_mean_std(mean: f64, std: f64) -> String {
    format!("{mean:.2} ± {std:.2}")
}

pub fn write_string(path: &Path, contents: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::write(path, contents).map_err(|e| Error::io(path, e))
}

pub fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).expect("serializable report");
    s.push('\n');
    write_string(path, &s)
}

pub fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| Error::Parse {
        path: path.to_path_buf(),
        line: e.line(),
        message: e.to_string(),
    })
}

impl ExperimentResult {
    pub fn summary(&self) -> String {
        format_mean_std(self.mean, self.std)
    }
}
