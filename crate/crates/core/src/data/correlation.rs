use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Symmetric Pearson correlation matrix with unit diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct CorrelationMatrix(Tensor);

impl CorrelationMatrix {
    /// Wraps an existing matrix after checking symmetry, unit diagonal and
    /// range.
    pub fn new(m: Tensor) -> Result<Self> {
        let (r, c) = m.shape();
        if r != c {
            return Err(Error::Dimension {
                op: "correlation_matrix",
                left: (r, c),
                right: (c, r),
            });
        }
        for i in 0..r {
            if m.get(i, i) != 1.0 {
                return Err(Error::config(format!("diagonal entry {i} is not 1")));
            }
            for j in 0..i {
                let (a, b) = (m.get(i, j), m.get(j, i));
                if (a - b).abs() > 1e-12 {
                    return Err(Error::config(format!("asymmetric at ({i}, {j})")));
                }
                if !(-1.0..=1.0).contains(&a) {
                    return Err(Error::config(format!("entry ({i}, {j}) = {a} outside [-1, 1]")));
                }
            }
        }
        Ok(Self(m))
    }

    pub fn n(&self) -> usize {
        self.0.rows()
    }

    pub fn get(&self, u: usize, v: usize) -> f64 {
        self.0.get(u, v)
    }

    pub fn as_tensor(&self) -> &Tensor {
        &self.0
    }

    pub fn into_tensor(self) -> Tensor {
        self.0
    }
}

/// Pearson correlation between every pair of rows of an `n×T` series matrix.
pub fn pearson_correlation(series: &Tensor) -> Result<CorrelationMatrix> {
    let (n, t) = series.shape();
    if t < 2 {
        return Err(Error::config(format!("need at least 2 time points, got {t}")));
    }
    let mut centered = Tensor::zeros(n, t);
    let mut norms = vec![0.0; n];
    for v in 0..n {
        let row = series.row(v);
        let mean = row.iter().sum::<f64>() / t as f64;
        let out = centered.row_mut(v);
        for (o, x) in out.iter_mut().zip(row) {
            *o = x - mean;
        }
        let ss: f64 = out.iter().map(|x| x * x).sum();
        if ss == 0.0 || !ss.is_finite() {
            return Err(Error::DegenerateSeries { row: v });
        }
        norms[v] = ss.sqrt();
    }
    let mut c = Tensor::identity(n);
    for u in 0..n {
        for v in (u + 1)..n {
            let dot: f64 = centered.row(u).iter().zip(centered.row(v)).map(|(a, b)| a * b).sum();
            let r = (dot / (norms[u] * norms[v])).clamp(-1.0, 1.0);
            c.set(u, v, r);
            c.set(v, u, r);
        }
    }
    Ok(CorrelationMatrix(c))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_and_negated_rows() {
        let s = Tensor::from_rows(&[[1.0, 3.0, 2.0, 5.0], [1.0, 3.0, 2.0, 5.0], [-1.0, -3.0, -2.0, -5.0]]);
        let c = pearson_correlation(&s).unwrap();
        assert!((c.get(0, 1) - 1.0).abs() < 1e-15);
        assert!((c.get(0, 2) + 1.0).abs() < 1e-15);
        assert_eq!(c.get(2, 2), 1.0);
    }

    #[test]
    fn hand_computed_value() {
        // centred dot product 6.5, sums of squares 5 and 8.75
        let s = Tensor::from_rows(&[[1.0, 2.0, 3.0, 4.0], [1.0, 2.0, 3.0, 5.0]]);
        let c = pearson_correlation(&s).unwrap();
        let expected = 6.5 / (5.0f64 * 8.75).sqrt();
        assert!((c.get(0, 1) - expected).abs() < 1e-14);
        assert!((c.get(0, 1) - 0.9827).abs() < 5e-5);
    }

    #[test]
    fn zero_variance_row_is_named() {
        let s = Tensor::from_rows(&[[1.0, 2.0, 3.0], [4.0, 4.0, 4.0]]);
        assert!(matches!(
            pearson_correlation(&s),
            Err(Error::DegenerateSeries { row: 1 })
        ));
    }

    #[test]
    fn too_short_series() {
        let s = Tensor::from_rows(&[[1.0], [2.0]]);
        assert!(matches!(pearson_correlation(&s), Err(Error::Config(_))));
    }
}
