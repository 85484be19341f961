use std::f64::consts::PI;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use super::stft::{hann_window, stft_power_with};
use super::{FeatureConfig, FeatureKind, FeatureMatrix};
use crate::audio::AudioBuffer;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

/// HTK mel scale: `2595 * log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> Result<f64> {
    if !(hz >= 0.0) {
        return Err(Error::Domain(format!("frequency must be non-negative, got {hz}")));
    }
    Ok(2595.0 * (1.0 + hz / 700.0).log10())
}

pub fn mel_to_hz(mel: f64) -> Result<f64> {
    if !(mel >= 0.0) {
        return Err(Error::Domain(format!("mel value must be non-negative, got {mel}")));
    }
    Ok(700.0 * (10f64.powf(mel / 2595.0) - 1.0))
}

/// Triangular mel filterbank over the non-negative FFT bins.
#[derive(Debug, Clone)]
pub struct MelFilterbank<S> {
    bins: usize,
    centers_hz: Vec<f64>,
    /// `weights[band][bin]`
    weights: Vec<Vec<S>>,
}

impl<S: Scalar> MelFilterbank<S> {
    pub fn new(config: &FeatureConfig) -> Result<Self> {
        config.validate()?;
        let bands = config.mel_bands;
        let bins = config.fft_size / 2 + 1;
        let mel_lo = hz_to_mel(config.fmin)?;
        let mel_hi = hz_to_mel(config.fmax_hz())?;
        let edges: Vec<f64> = (0..bands + 2)
            .map(|i| mel_to_hz(mel_lo + (mel_hi - mel_lo) * i as f64 / (bands + 1) as f64))
            .collect::<Result<_>>()?;
        let bin_hz = config.sample_rate as f64 / config.fft_size as f64;
        let mut weights = Vec::with_capacity(bands);
        for m in 0..bands {
            let (lo, c, hi) = (edges[m], edges[m + 1], edges[m + 2]);
            let mut row: Vec<f64> = (0..bins)
                .map(|k| {
                    let f = k as f64 * bin_hz;
                    if f <= lo || f >= hi {
                        0.0
                    } else if f <= c {
                        (f - lo) / (c - lo)
                    } else {
                        (hi - f) / (hi - c)
                    }
                })
                .collect();
            let peak = row.iter().copied().fold(0.0, f64::max);
            if peak > 0.0 {
                row.iter_mut().for_each(|w| *w /= peak);
            }
            weights.push(row.into_iter().map(S::lit).collect());
        }
        Ok(Self {
            bins,
            centers_hz: edges[1..=bands].to_vec(),
            weights,
        })
    }

    pub fn bands(&self) -> usize {
        self.weights.len()
    }

    pub fn bins(&self) -> usize {
        self.bins
    }

    pub fn centers_hz(&self) -> &[f64] {
        &self.centers_hz
    }

    pub fn row(&self, band: usize) -> &[S] {
        &self.weights[band]
    }

    /// Band whose centre frequency is nearest to `hz` (ties to the lower band).
    pub fn nearest_band(&self, hz: f64) -> usize {
        let mut best = 0;
        for (i, c) in self.centers_hz.iter().enumerate() {
            if (c - hz).abs() < (self.centers_hz[best] - hz).abs() {
                best = i;
            }
        }
        best
    }

    pub fn apply(&self, power: &[S], out: &mut [S]) {
        for (o, row) in out.iter_mut().zip(&self.weights) {
            *o = row.iter().zip(power).map(|(&w, &p)| w * p).sum();
        }
    }
}

/// Orthonormal DCT-II of `input`, first `coeffs` outputs.
pub fn dct_ii_orthonormal<S: Scalar>(input: &[S], coeffs: usize) -> Vec<S> {
    DctMatrix::new(input.len(), coeffs).apply(input)
}

#[derive(Debug, Clone)]
struct DctMatrix<S> {
    inputs: usize,
    /// `rows[k][n]`
    rows: Vec<Vec<S>>,
}

impl<S: Scalar> DctMatrix<S> {
    fn new(inputs: usize, coeffs: usize) -> Self {
        let m = inputs as f64;
        let rows = (0..coeffs)
            .map(|k| {
                let scale = if k == 0 { (1.0 / m).sqrt() } else { (2.0 / m).sqrt() };
                (0..inputs)
                    .map(|n| S::lit(scale * (PI * k as f64 * (2 * n + 1) as f64 / (2.0 * m)).cos()))
                    .collect()
            })
            .collect();
        Self { inputs, rows }
    }

    fn apply(&self, x: &[S]) -> Vec<S> {
        debug_assert_eq!(x.len(), self.inputs);
        self.rows
            .iter()
            .map(|row| row.iter().zip(x).map(|(&a, &b)| a * b).sum())
            .collect()
    }
}

/// Reusable extractor holding the FFT plan, window, filterbank and DCT basis for one config.
/// Read-only after construction and safe to share across threads.
#[derive(Clone)]
pub struct FeatureExtractor<S: Scalar> {
    config: FeatureConfig,
    fft: Arc<dyn Fft<S>>,
    window: Vec<S>,
    filterbank: MelFilterbank<S>,
    dct: DctMatrix<S>,
}

impl<S: Scalar> FeatureExtractor<S> {
    pub fn new(config: &FeatureConfig) -> Result<Self> {
        config.validate()?;
        let fft = FftPlanner::<S>::new().plan_fft_forward(config.fft_size);
        Ok(Self {
            config: config.clone(),
            fft,
            window: hann_window(config.fft_size),
            filterbank: MelFilterbank::new(config)?,
            dct: DctMatrix::new(config.mel_bands, config.mfcc_coeffs),
        })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    pub fn filterbank(&self) -> &MelFilterbank<S> {
        &self.filterbank
    }

    fn check_rate(&self, audio: &AudioBuffer) -> Result<()> {
        if audio.sample_rate() != self.config.sample_rate {
            return Err(Error::Config(format!(
                "audio sampled at {} Hz but features configured for {} Hz",
                audio.sample_rate(),
                self.config.sample_rate
            )));
        }
        Ok(())
    }

    pub fn power(&self, audio: &AudioBuffer) -> Result<Vec<Vec<S>>> {
        self.check_rate(audio)?;
        stft_power_with(audio, &self.config, &*self.fft, &self.window)
    }

    pub fn melspec(&self, audio: &AudioBuffer) -> Result<FeatureMatrix<S>> {
        self.melspec_tagged(audio, "")
    }

    pub fn melspec_tagged(&self, audio: &AudioBuffer, source_id: &str) -> Result<FeatureMatrix<S>> {
        let power = self.power(audio)?;
        let bands = self.config.mel_bands;
        let floor = S::lit(self.config.log_floor);
        let mut values = vec![S::zero(); bands * power.len()];
        for (frame, out) in power.iter().zip(values.chunks_exact_mut(bands)) {
            self.filterbank.apply(frame, out);
            out.iter_mut().for_each(|v| *v = v.max(floor).ln());
        }
        FeatureMatrix::from_frames(
            bands,
            power.len(),
            values,
            FeatureKind::Melspec,
            self.config.frame_hop_seconds(),
            source_id,
        )
    }

    pub fn mfcc(&self, audio: &AudioBuffer) -> Result<FeatureMatrix<S>> {
        self.mfcc_tagged(audio, "")
    }

    pub fn mfcc_tagged(&self, audio: &AudioBuffer, source_id: &str) -> Result<FeatureMatrix<S>> {
        let mel = self.melspec_tagged(audio, source_id)?;
        let coeffs = self.config.mfcc_coeffs;
        let mut values = Vec::with_capacity(coeffs * mel.frames());
        for t in 0..mel.frames() {
            values.extend(self.dct.apply(mel.frame(t)));
        }
        FeatureMatrix::from_frames(
            coeffs,
            mel.frames(),
            values,
            FeatureKind::Mfcc,
            mel.frame_hop_seconds,
            source_id,
        )
    }

    /// Extracts the requested kind. Latent features cannot be computed from audio.
    pub fn extract(&self, audio: &AudioBuffer, kind: FeatureKind, source_id: &str) -> Result<FeatureMatrix<S>> {
        match kind {
            FeatureKind::Melspec => self.melspec_tagged(audio, source_id),
            FeatureKind::Mfcc => self.mfcc_tagged(audio, source_id),
            FeatureKind::Latent => Err(Error::Config(
                "latent features are load-only and cannot be extracted from audio".into(),
            )),
        }
    }
}
