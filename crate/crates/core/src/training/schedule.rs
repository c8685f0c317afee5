use super::config::{DecayRule, TrainConfig};
use crate::error::{Error, Result};

/// Learning-rate floor after decay.
pub const MIN_LR: f64 = 1e-6;

/// Linear warmup to `base_lr` over `warmup_epochs`, then decay per epoch,
/// floored at [`MIN_LR`].
pub fn lr_at(epoch: usize, cfg: &TrainConfig) -> Result<f64> {
    if epoch >= cfg.total_epochs {
        return Err(Error::contract(format!(
            "epoch {epoch} outside schedule of {} epochs",
            cfg.total_epochs
        )));
    }
    if epoch < cfg.warmup_epochs {
        // Rounding can push the last warmup step one ulp past base_lr.
        return Ok((cfg.base_lr * (epoch + 1) as f64 / cfg.warmup_epochs as f64).min(cfg.base_lr));
    }
    let k = (epoch - cfg.warmup_epochs + 1) as f64;
    let lr = match cfg.decay_rule {
        DecayRule::Linear => cfg.base_lr - k * cfg.decay_per_epoch,
        DecayRule::Multiplicative => cfg.base_lr * (1.0 - cfg.decay_per_epoch).powf(k),
    };
    Ok(lr.max(MIN_LR).min(cfg.base_lr))
}
