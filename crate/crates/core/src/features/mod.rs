//! Acoustic feature extraction: power spectrogram, log-mel spectrogram, MFCC,
//! plus the binary feature file format and corpus normalization statistics.

mod config;
mod file;
mod mel;
mod normalize;
mod stft;

pub use config::{FeatureConfig, FeatureKind, Window};
pub use file::{load_features, load_latent_features, save_features};
pub use mel::{dct_ii_orthonormal, hz_to_mel, mel_to_hz, FeatureExtractor, MelFilterbank};
pub use normalize::FeatureStats;
pub use stft::{frame_count, stft_power};

use crate::audio::AudioBuffer;
use crate::error::{shape_err, Result};
use crate::scalar::Scalar;

/// Feature matrix `H` with `dim` rows and `frames` columns, stored frame-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix<S> {
    dim: usize,
    frames: usize,
    values: Vec<S>,
    pub kind: FeatureKind,
    pub frame_hop_seconds: f64,
    pub source_id: String,
}

impl<S: Scalar> FeatureMatrix<S> {
    /// Builds a matrix from frame-major values (`values[t * dim + n]`).
    pub fn from_frames(
        dim: usize,
        frames: usize,
        values: Vec<S>,
        kind: FeatureKind,
        frame_hop_seconds: f64,
        source_id: impl Into<String>,
    ) -> Result<Self> {
        if dim == 0 || frames == 0 {
            return shape_err(format!("feature matrix must be non-empty, got {dim}x{frames}"));
        }
        if values.len() != dim * frames {
            return shape_err(format!(
                "{} values for a {dim}x{frames} feature matrix",
                values.len()
            ));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return shape_err("feature values must be finite");
        }
        Ok(Self {
            dim,
            frames,
            values,
            kind,
            frame_hop_seconds,
            source_id: source_id.into(),
        })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn get(&self, row: usize, frame: usize) -> S {
        self.values[frame * self.dim + row]
    }

    pub fn frame(&self, t: usize) -> &[S] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    /// Frame-major values, i.e. the `T x N` row-major layout.
    pub fn values(&self) -> &[S] {
        &self.values
    }

    pub fn into_values(self) -> Vec<S> {
        self.values
    }

    pub fn with_kind(mut self, kind: FeatureKind) -> Self {
        self.kind = kind;
        self
    }

    pub fn cast<U: Scalar>(&self) -> FeatureMatrix<U> {
        FeatureMatrix {
            dim: self.dim,
            frames: self.frames,
            values: self.values.iter().map(|v| U::lit(v.to_f64_lossy())).collect(),
            kind: self.kind,
            frame_hop_seconds: self.frame_hop_seconds,
            source_id: self.source_id.clone(),
        }
    }
}

/// Log-mel spectrogram of `audio`.
pub fn melspec<S: Scalar>(audio: &AudioBuffer, config: &FeatureConfig) -> Result<FeatureMatrix<S>> {
    FeatureExtractor::new(config)?.melspec(audio)
}

/// MFCCs: orthonormal DCT-II over the log-mel axis, first `mfcc_coeffs` kept.
pub fn mfcc<S: Scalar>(audio: &AudioBuffer, config: &FeatureConfig) -> Result<FeatureMatrix<S>> {
    FeatureExtractor::new(config)?.mfcc(audio)
}
