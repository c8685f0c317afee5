use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use super::graph::ConnectomeGraph;
use crate::error::{Error, Result};
use crate::rng;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DatasetSplits {
    pub train: Vec<usize>,
    pub val: Vec<usize>,
    pub test: Vec<usize>,
}

impl DatasetSplits {
    pub fn len(&self) -> usize {
        self.train.len() + self.val.len() + self.test.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

pub const DEFAULT_RATIOS: [f64; 3] = [0.7, 0.15, 0.15];

/// Stratified, seeded train/val/test split.
///
/// Per class, each split receives the floor or ceiling of its proportional
/// share; the leftover units are handed to whichever split is furthest below
/// its global target, so totals also land on `round(N · ratio)`.
pub fn split(graphs: &[ConnectomeGraph], ratios: [f64; 3], seed: u64) -> Result<DatasetSplits> {
    let labels: Vec<usize> = graphs.iter().map(|g| g.label()).collect();
    split_labels(&labels, ratios, seed)
}

pub fn split_labels(labels: &[usize], ratios: [f64; 3], seed: u64) -> Result<DatasetSplits> {
    if ratios.iter().any(|r| !(0.0..=1.0).contains(r)) || (ratios.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::config(format!(
            "split ratios {ratios:?} must be in [0,1] and sum to 1"
        )));
    }
    let total = labels.len();
    let num_classes = labels.iter().max().map_or(0, |m| m + 1);
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); num_classes];
    for (i, &y) in labels.iter().enumerate() {
        by_class[y].push(i);
    }

    let train_target = (total as f64 * ratios[0]).round() as usize;
    let val_target = ((total as f64 * ratios[1]).round() as usize).min(total - train_target);
    let global = [train_target, val_target, total - train_target - val_target];

    let mut counts = vec![[0usize; 3]; num_classes];
    let mut fracs = vec![[0f64; 3]; num_classes];
    let mut assigned = [0usize; 3];
    for (c, members) in by_class.iter().enumerate() {
        let nc = members.len() as f64;
        for s in 0..3 {
            let share = nc * global[s] as f64 / total as f64;
            counts[c][s] = share.floor() as usize;
            fracs[c][s] = share - share.floor();
            assigned[s] += counts[c][s];
        }
    }
    for (c, members) in by_class.iter().enumerate() {
        let mut extra = members.len() - counts[c].iter().sum::<usize>();
        while extra > 0 {
            let pick = (0..3)
                .filter(|&s| fracs[c][s] > 0.0)
                .max_by(|&a, &b| {
                    let da = global[a] as i64 - assigned[a] as i64;
                    let db = global[b] as i64 - assigned[b] as i64;
                    da.cmp(&db).then(fracs[c][a].total_cmp(&fracs[c][b])).then(b.cmp(&a))
                })
                .expect("leftover units imply a fractional share");
            counts[c][pick] += 1;
            fracs[c][pick] = 0.0;
            assigned[pick] += 1;
            extra -= 1;
        }
    }

    let mut out = DatasetSplits {
        train: Vec::new(),
        val: Vec::new(),
        test: Vec::new(),
    };
    for (c, members) in by_class.iter().enumerate() {
        let mut shuffled = members.clone();
        shuffled.shuffle(&mut rng::stream(seed, "split", c as u64));
        let (a, b) = (counts[c][0], counts[c][0] + counts[c][1]);
        out.train.extend_from_slice(&shuffled[..a]);
        out.val.extend_from_slice(&shuffled[a..b]);
        out.test.extend_from_slice(&shuffled[b..]);
    }
    out.train.sort_unstable();
    out.val.sort_unstable();
    out.test.sort_unstable();
    Ok(out)
}
