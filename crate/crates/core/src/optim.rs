//! Adam optimizer.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Grads, ParamStore};
use crate::tensor::Tensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates per parameter name plus the step count.
#[derive(Debug, Clone, Default)]
pub struct Adam {
    pub config: AdamConfig,
    t: u64,
    m: BTreeMap<String, Tensor>,
    v: BTreeMap<String, Tensor>,
}

impl Adam {
    pub fn new(config: AdamConfig) -> Self {
        Self {
            config,
            ..Self::default()
        }
    }

    pub fn steps(&self) -> u64 {
        self.t
    }

    /// One bias-corrected update. Every gradient must name an existing
    /// parameter of the same shape; parameters without a gradient entry are
    /// left untouched.
    pub fn step(&mut self, params: &mut ParamStore, grads: &Grads, lr: f64) -> Result<()> {
        for (name, g) in grads {
            let p = params
                .get(name)
                .ok_or_else(|| Error::Lookup(format!("gradient for unknown parameter '{name}'")))?;
            if p.shape() != g.shape() {
                return Err(Error::Dimension {
                    op: "adam_step",
                    left: p.shape(),
                    right: g.shape(),
                });
            }
        }
        self.t += 1;
        let AdamConfig { beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - beta1.powi(self.t as i32);
        let bc2 = 1.0 - beta2.powi(self.t as i32);
        for (name, g) in grads {
            let p = params.get_mut(name).expect("checked above");
            let (r, c) = g.shape();
            let m = self.m.entry(name.clone()).or_insert_with(|| Tensor::zeros(r, c));
            let v = self.v.entry(name.clone()).or_insert_with(|| Tensor::zeros(r, c));
            let (pd, md, vd) = (p.data_mut(), m.data_mut(), v.data_mut());
            for (i, &gi) in g.data().iter().enumerate() {
                md[i] = beta1 * md[i] + (1.0 - beta1) * gi;
                vd[i] = beta2 * vd[i] + (1.0 - beta2) * gi * gi;
                let mhat = md[i] / bc1;
                let vhat = vd[i] / bc2;
                pd[i] -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store(v: f64) -> ParamStore {
        let mut p = ParamStore::new();
        p.insert("w", Tensor::scalar(v));
        p
    }

    #[test]
    fn first_step_moves_by_lr_times_sign() {
        let mut p = store(1.0);
        let mut adam = Adam::default();
        let mut g = Grads::new();
        g.insert("w".into(), Tensor::scalar(0.3));
        adam.step(&mut p, &g, 0.01).unwrap();
        // mhat = g, vhat = g², so the update is lr·g/(|g|+eps).
        let expected = 1.0 - 0.01 * 0.3 / (0.3 + 1e-8);
        assert!((p.get("w").unwrap().get(0, 0) - expected).abs() < 1e-15);
    }

    #[test]
    fn zero_gradient_leaves_parameters_bit_identical() {
        let mut p = store(0.123456789);
        let mut adam = Adam::default();
        let mut g = Grads::new();
        g.insert("w".into(), Tensor::scalar(0.0));
        for _ in 0..5 {
            adam.step(&mut p, &g, 0.1).unwrap();
        }
        assert_eq!(p.get("w").unwrap().get(0, 0), 0.123456789);
    }

    #[test]
    fn minimizes_quadratic() {
        let mut p = store(5.0);
        let mut adam = Adam::default();
        for _ in 0..2000 {
            let w = p.get("w").unwrap().get(0, 0);
            let mut g = Grads::new();
            g.insert("w".into(), Tensor::scalar(2.0 * (w - 1.5)));
            adam.step(&mut p, &g, 0.05).unwrap();
        }
        assert!((p.get("w").unwrap().get(0, 0) - 1.5).abs() < 1e-3);
    }

    #[test]
    fn rejects_unknown_or_misshapen_gradient() {
        let mut p = store(1.0);
        let mut adam = Adam::default();
        let mut g = Grads::new();
        g.insert("nope".into(), Tensor::scalar(1.0));
        assert!(matches!(adam.step(&mut p, &g, 0.1), Err(Error::Lookup(_))));
        let mut g = Grads::new();
        g.insert("w".into(), Tensor::zeros(2, 1));
        assert!(matches!(adam.step(&mut p, &g, 0.1), Err(Error::Dimension { .. })));
        assert_eq!(adam.steps(), 0);
    }
}
