use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Melspec,
    Mfcc,
    Latent,
}

impl FeatureKind {
    pub fn code(self) -> u8 {
        match self {
            FeatureKind::Melspec => 0,
            FeatureKind::Mfcc => 1,
            FeatureKind::Latent => 2,
        }
    }

    pub fn from_code(code: u8) -> Option<Self> {
        match code {
            0 => Some(FeatureKind::Melspec),
            1 => Some(FeatureKind::Mfcc),
            2 => Some(FeatureKind::Latent),
            _ => None,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            FeatureKind::Melspec => "melspec",
            FeatureKind::Mfcc => "mfcc",
            FeatureKind::Latent => "latent",
        }
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "melspec" => Ok(FeatureKind::Melspec),
            "mfcc" => Ok(FeatureKind::Mfcc),
            "latent" => Ok(FeatureKind::Latent),
            other => Err(Error::Config(format!("unknown feature kind '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Window {
    #[default]
    Hann,
}

/// STFT / mel / MFCC settings. Durations everywhere are counted in frames of `hop_length`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeatureConfig {
    pub sample_rate: u32,
    pub fft_size: usize,
    pub hop_length: usize,
    pub window: Window,
    pub mel_bands: usize,
    pub fmin: f64,
    /// `None` means Nyquist.
    pub fmax: Option<f64>,
    pub mfcc_coeffs: usize,
    pub log_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            sample_rate: 48_000,
            fft_size: 2048,
            hop_length: 512,
            window: Window::Hann,
            mel_bands: 80,
            fmin: 0.0,
            fmax: None,
            mfcc_coeffs: 20,
            log_floor: 1e-10,
        }
    }
}

impl FeatureConfig {
    pub fn fmax_hz(&self) -> f64 {
        self.fmax.unwrap_or(self.sample_rate as f64 / 2.0)
    }

    pub fn frame_hop_seconds(&self) -> f64 {
        self.hop_length as f64 / self.sample_rate as f64
    }

    pub fn frames_per_second(&self) -> f64 {
        self.sample_rate as f64 / self.hop_length as f64
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(Error::Config(msg));
        if self.sample_rate == 0 {
            return fail("sample_rate must be positive".into());
        }
        if self.fft_size < 2 || self.fft_size % 2 != 0 {
            return fail(format!("fft_size must be even and >= 2, got {}", self.fft_size));
        }
        if self.hop_length == 0 || self.hop_length > self.fft_size {
            return fail(format!(
                "hop_length must be in 1..=fft_size, got {}",
                self.hop_length
            ));
        }
        if self.mel_bands == 0 {
            return fail("mel_bands must be positive".into());
        }
        let nyquist = self.sample_rate as f64 / 2.0;
        let fmax = self.fmax_hz();
        if !(self.fmin >= 0.0 && self.fmin < fmax && fmax <= nyquist) {
            return fail(format!(
                "require 0 <= fmin < fmax <= sample_rate/2, got fmin={} fmax={fmax}",
                self.fmin
            ));
        }
        if self.mfcc_coeffs == 0 || self.mfcc_coeffs > self.mel_bands {
            return fail(format!(
                "mfcc_coeffs must be in 1..=mel_bands, got {}",
                self.mfcc_coeffs
            ));
        }
        if !(self.log_floor > 0.0 && self.log_floor.is_finite()) {
            return fail("log_floor must be positive".into());
        }
        Ok(())
    }
}
