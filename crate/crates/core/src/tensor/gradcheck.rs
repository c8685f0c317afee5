//! Central finite-difference gradient checking.
//!
//! The checker only evaluates the forward pass: it rebuilds the tape for each
//! perturbed input and never consults the backward rules it is checking.

use super::dense::Tensor;
use super::tape::{Tape, Var};
use crate::error::Result;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradCheckReport {
    /// Max over entries of `|analytic − numeric| / (|analytic| + 1e-8)`,
    /// with entries where both are below `abs_floor` counted as exact.
    pub max_rel_error: f64,
    pub max_abs_error: f64,
    pub entries_checked: usize,
}

/// Compares tape gradients of `f` at `inputs` with central differences of
/// step `h`.
///
/// `f` receives a fresh tape and one trainable leaf per input and must return
/// a scalar.
pub fn check_gradients<F>(inputs: &[Tensor], h: f64, mut f: F) -> Result<GradCheckReport>
where
    F: FnMut(&mut Tape, &[Var]) -> Result<Var>,
{
    let mut tape = Tape::new();
    let vars: Vec<Var> = inputs.iter().map(|t| tape.param(t.clone())).collect();
    let out = f(&mut tape, &vars)?;
    tape.backward(out)?;
    let analytic: Vec<Tensor> = vars
        .iter()
        .zip(inputs)
        .map(|(&v, t)| {
            tape.grad(v)
                .cloned()
                .unwrap_or_else(|| Tensor::zeros(t.rows(), t.cols()))
        })
        .collect();

    let mut eval = |perturbed: &[Tensor]| -> Result<f64> {
        let mut tape = Tape::new();
        let vars: Vec<Var> = perturbed.iter().map(|t| tape.constant(t.clone())).collect();
        let out = f(&mut tape, &vars)?;
        Ok(tape.value(out).data()[0])
    };

    let abs_floor = 1e-7;
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        max_abs_error: 0.0,
        entries_checked: 0,
    };
    let mut work: Vec<Tensor> = inputs.to_vec();
    for (i, input) in inputs.iter().enumerate() {
        for j in 0..input.data().len() {
            let x0 = input.data()[j];
            work[i].data_mut()[j] = x0 + h;
            let fp = eval(&work)?;
            work[i].data_mut()[j] = x0 - h;
            let fm = eval(&work)?;
            work[i].data_mut()[j] = x0;
            let numeric = (fp - fm) / (2.0 * h);
            let a = analytic[i].data()[j];
            let abs = (a - numeric).abs();
            let rel = if a.abs() < abs_floor && numeric.abs() < abs_floor {
                0.0
            } else {
                abs / (a.abs() + 1e-8)
            };
            report.max_rel_error = report.max_rel_error.max(rel);
            report.max_abs_error = report.max_abs_error.max(abs);
            report.entries_checked += 1;
        }
    }
    Ok(report)
}
