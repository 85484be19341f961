//! Waveform buffers, WAV files, corpus manifests and the synthetic corpus generator.

mod manifest;
mod synth;
mod wav;

pub use manifest::{read_manifest, resolve_audio_path, write_manifest, UtteranceManifestEntry};
pub use synth::{generate_synthetic_corpus, tone_frequencies, SyntheticCorpusSpec};
pub use wav::{read_wav, write_wav};

use crate::error::{contract_err, Result};

/// Mono waveform with amplitudes in `[-1, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioBuffer {
    samples: Vec<f32>,
    sample_rate: u32,
}

impl AudioBuffer {
    pub fn new(samples: Vec<f32>, sample_rate: u32) -> Result<Self> {
        if sample_rate == 0 {
            return contract_err("sample rate must be positive");
        }
        if let Some(bad) = samples.iter().find(|s| !s.is_finite() || s.abs() > 1.0) {
            return contract_err(format!("sample {bad} outside [-1, 1]"));
        }
        Ok(Self { samples, sample_rate })
    }

    pub fn samples(&self) -> &[f32] {
        &self.samples
    }

    pub fn sample_rate(&self) -> u32 {
        self.sample_rate
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn duration_seconds(&self) -> f64 {
        self.samples.len() as f64 / self.sample_rate as f64
    }
}
