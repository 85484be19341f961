use std::f64::consts::PI;

use rustfft::num_complex::Complex;
use rustfft::FftPlanner;

use super::FeatureConfig;
use crate::audio::AudioBuffer;
use crate::error::{contract_err, Result};
use crate::scalar::Scalar;

/// Number of STFT frames for a signal of `len` samples: `floor(len / hop) + 1`.
pub fn frame_count(len: usize, hop_length: usize) -> usize {
    len / hop_length + 1
}

pub(crate) fn hann_window<S: Scalar>(n: usize) -> Vec<S> {
    // periodic Hann
    (0..n)
        .map(|i| S::lit(0.5 - 0.5 * (2.0 * PI * i as f64 / n as f64).cos()))
        .collect()
}

/// Maps a padded-domain index onto the signal with reflect (no edge repeat) semantics.
#[inline]
pub(crate) fn reflect_index(i: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let mut j = i.rem_euclid(period);
    if j >= len as isize {
        j = period - j;
    }
    j as usize
}

/// Power spectrogram `|FFT(window * frame_t)|^2`, returned as `frames[t][bin]`
/// with `fft_size / 2 + 1` bins per frame. The signal is reflect-padded by
/// `fft_size / 2` on both ends so frame `t` is centred on sample `t * hop_length`.
pub fn stft_power<S: Scalar>(audio: &AudioBuffer, config: &FeatureConfig) -> Result<Vec<Vec<S>>> {
    config.validate()?;
    let mut planner = FftPlanner::<S>::new();
    let fft = planner.plan_fft_forward(config.fft_size);
    let window = hann_window::<S>(config.fft_size);
    stft_power_with(audio, config, &*fft, &window)
}

pub(crate) fn stft_power_with<S: Scalar>(
    audio: &AudioBuffer,
    config: &FeatureConfig,
    fft: &dyn rustfft::Fft<S>,
    window: &[S],
) -> Result<Vec<Vec<S>>> {
    let samples = audio.samples();
    if samples.is_empty() {
        return contract_err("cannot compute a spectrogram of empty audio");
    }
    let n = config.fft_size;
    let pad = (n / 2) as isize;
    let frames = frame_count(samples.len(), config.hop_length);
    let bins = n / 2 + 1;
    let mut buf = vec![Complex::new(S::zero(), S::zero()); n];
    let mut scratch = vec![Complex::new(S::zero(), S::zero()); fft.get_inplace_scratch_len()];
    let mut out = Vec::with_capacity(frames);
    for t in 0..frames {
        let start = (t * config.hop_length) as isize - pad;
        for (i, slot) in buf.iter_mut().enumerate() {
            let x = samples[reflect_index(start + i as isize, samples.len())];
            *slot = Complex::new(S::of_f32(x) * window[i], S::zero());
        }
        fft.process_with_scratch(&mut buf, &mut scratch);
        out.push(buf[..bins].iter().map(|c| c.norm_sqr()).collect());
    }
    Ok(out)
}
