use serde::{Deserialize, Serialize};

use super::FeatureMatrix;
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

const MIN_STD: f64 = 1e-5;

/// Corpus normalization: a per-dimension mean and a scale per dimension.
///
/// `compute` pools the variance across dimensions, so every entry of `std`
/// is the same. Dividing each band by its own deviation blows up bands that
/// carry only noise (mel bands between tones, say) to the same scale as the
/// informative ones; a shared scale keeps their relative energy. `apply`
/// still honours arbitrary per-dimension values.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl FeatureStats {
    /// Stats that leave features untouched.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn compute<'a, S: Scalar>(corpus: impl IntoIterator<Item = &'a FeatureMatrix<S>>) -> Result<Self> {
        let mut sum: Vec<f64> = Vec::new();
        let mut sq: Vec<f64> = Vec::new();
        let mut count = 0usize;
        for m in corpus {
            if sum.is_empty() {
                sum = vec![0.0; m.dim()];
                sq = vec![0.0; m.dim()];
            } else if m.dim() != sum.len() {
                return shape_err(format!(
                    "feature dimension {} differs from corpus dimension {}",
                    m.dim(),
                    sum.len()
                ));
            }
            for t in 0..m.frames() {
                for (n, v) in m.frame(t).iter().enumerate() {
                    let v = v.to_f64_lossy();
                    sum[n] += v;
                    sq[n] += v * v;
                }
            }
            count += m.frames();
        }
        if count == 0 {
            return shape_err("cannot compute feature statistics of an empty corpus");
        }
        let c = count as f64;
        let mean: Vec<f64> = sum.iter().map(|s| s / c).collect();
        let pooled_var = sq
            .iter()
            .zip(&mean)
            .map(|(q, m)| (q / c - m * m).max(0.0))
            .sum::<f64>()
            / mean.len().max(1) as f64;
        let std = vec![pooled_var.sqrt().max(MIN_STD); mean.len()];
        Ok(Self { mean, std })
    }

    /// Normalized frame-major values of `m`.
    pub fn apply<S: Scalar>(&self, m: &FeatureMatrix<S>) -> Result<Vec<S>> {
        if m.dim() != self.dim() {
            return shape_err(format!(
                "features have {} dims, normalization expects {}",
                m.dim(),
                self.dim()
            ));
        }
        let mean: Vec<S> = self.mean.iter().map(|&v| S::lit(v)).collect();
        let inv: Vec<S> = self.std.iter().map(|&v| S::lit(1.0 / v)).collect();
        let dim = m.dim();
        Ok(m
            .values()
            .iter()
            .enumerate()
            .map(|(i, &v)| (v - mean[i % dim]) * inv[i % dim])
            .collect())
    }
}
