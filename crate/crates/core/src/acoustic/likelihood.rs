use crate::error::{shape_err, Result};
use crate::scalar::{log_sum_exp, Scalar};

/// Per-frame log-probabilities over `P + 1` classes (blank last), i.e. the
/// `(P+1) x T` matrix `C`, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct LikelihoodMatrix<S> {
    classes: usize,
    frames: usize,
    log_probs: Vec<S>,
    pub frame_hop_seconds: f64,
}

impl<S: Scalar> LikelihoodMatrix<S> {
    /// `log_probs[t * classes + k]` is `log p(k | frame t)`. Normalization is not enforced
    /// here so perturbed matrices can be built for gradient checks.
    pub fn new(classes: usize, frames: usize, log_probs: Vec<S>, frame_hop_seconds: f64) -> Result<Self> {
        if classes < 2 || frames == 0 {
            return shape_err(format!("likelihood matrix needs >= 2 classes and >= 1 frame, got {classes}x{frames}"));
        }
        if log_probs.len() != classes * frames {
            return shape_err(format!("{} values for {classes}x{frames}", log_probs.len()));
        }
        Ok(Self {
            classes,
            frames,
            log_probs,
            frame_hop_seconds,
        })
    }

    /// Builds from linear probabilities `probs[t][k]`.
    pub fn from_probs(probs: &[Vec<f64>], frame_hop_seconds: f64) -> Result<Self> {
        let classes = probs.first().map_or(0, Vec::len);
        if probs.iter().any(|p| p.len() != classes) {
            return shape_err("ragged probability rows");
        }
        let data = probs.iter().flatten().map(|&p| S::lit(p.ln())).collect();
        Self::new(classes, probs.len(), data, frame_hop_seconds)
    }

    pub fn classes(&self) -> usize {
        self.classes
    }

    pub fn blank_id(&self) -> usize {
        self.classes - 1
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    #[inline]
    pub fn log_prob(&self, class: usize, frame: usize) -> S {
        self.log_probs[frame * self.classes + class]
    }

    pub fn frame(&self, t: usize) -> &[S] {
        &self.log_probs[t * self.classes..(t + 1) * self.classes]
    }

    pub fn values(&self) -> &[S] {
        &self.log_probs
    }

    pub fn values_mut(&mut self) -> &mut [S] {
        &mut self.log_probs
    }

    /// Largest `|logsumexp(column)|` over frames.
    pub fn max_normalization_error(&self) -> f64 {
        (0..self.frames)
            .map(|t| log_sum_exp(self.frame(t)).to_f64_lossy().abs())
            .fold(0.0, f64::max)
    }

    /// Column-wise argmax; ties go to the lowest class index.
    pub fn argmax_labels(&self) -> Vec<usize> {
        (0..self.frames)
            .map(|t| {
                let col = self.frame(t);
                let mut best = 0;
                for k in 1..col.len() {
                    if col[k] > col[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}
