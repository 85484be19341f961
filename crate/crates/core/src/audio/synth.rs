use std::f64::consts::PI;
use std::fs;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{write_manifest, write_wav, AudioBuffer, UtteranceManifestEntry};
use crate::error::{Error, Result};
use crate::features::{FeatureConfig, MelFilterbank};

const TONE_LOW_HZ: f64 = 200.0;
const TONE_HIGH_HZ: f64 = 6000.0;

/// Parameters of a synthetic tone corpus with known phoneme durations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SyntheticCorpusSpec {
    pub inventory_size: usize,
    pub utterance_count: usize,
    /// Inclusive frame range for one phoneme.
    pub duration_range: [usize; 2],
    /// Inclusive phoneme-count range for one utterance.
    pub phonemes_per_utterance: [usize; 2],
    /// Standard deviation of additive white noise.
    pub noise_level: f64,
    pub seed: u64,
    pub amplitude: f64,
    /// Silent frames appended after every phoneme but the last (credited to that phoneme).
    pub gap_frames: usize,
    /// When set, each phoneme gets a characteristic duration drawn from `duration_range`
    /// and every occurrence is drawn within `+-jitter` of it (clipped to the range).
    pub duration_jitter: Option<usize>,
    pub allow_adjacent_repeats: bool,
    pub features: FeatureConfig,
}

impl Default for SyntheticCorpusSpec {
    fn default() -> Self {
        Self {
            inventory_size: 5,
            utterance_count: 200,
            duration_range: [5, 20],
            phonemes_per_utterance: [3, 8],
            noise_level: 0.01,
            seed: 0,
            amplitude: 0.5,
            gap_frames: 0,
            duration_jitter: None,
            allow_adjacent_repeats: false,
            features: FeatureConfig::default(),
        }
    }
}

impl SyntheticCorpusSpec {
    pub fn validate(&self) -> Result<()> {
        let fail = |m: String| Err(Error::Config(m));
        self.features.validate()?;
        if self.inventory_size == 0 {
            return fail("inventory_size must be positive".into());
        }
        if self.utterance_count == 0 {
            return fail("utterance_count must be positive".into());
        }
        let [dlo, dhi] = self.duration_range;
        if dlo < 1 {
            return fail("duration_range lower bound must be >= 1".into());
        }
        if dlo > dhi {
            return fail(format!("duration_range [{dlo}, {dhi}] is empty"));
        }
        let [plo, phi] = self.phonemes_per_utterance;
        if plo < 1 || plo > phi {
            return fail(format!(
                "phonemes_per_utterance [{plo}, {phi}] must be a non-empty range starting at >= 1"
            ));
        }
        if !(self.noise_level >= 0.0 && self.noise_level.is_finite()) {
            return fail("noise_level must be a non-negative real".into());
        }
        if !(self.amplitude > 0.0 && self.amplitude <= 1.0) {
            return fail("amplitude must be in (0, 1]".into());
        }
        if !self.allow_adjacent_repeats && self.inventory_size == 1 && phi > 1 {
            return fail("an inventory of one cannot avoid adjacent repeats".into());
        }
        if self.features.fmax_hz() < TONE_HIGH_HZ {
            return fail(format!("fmax must reach {TONE_HIGH_HZ} Hz for the tone inventory"));
        }
        tone_frequencies(self.inventory_size, &self.features).map(|_| ())
    }

    pub fn phoneme_symbol(k: usize) -> String {
        format!("p{k}")
    }
}

/// Tone frequency of each pseudo-phoneme: log-uniform over 200..6000 Hz, snapped to the
/// centre of the nearest mel filter. Fails if two tones would share a filter.
pub fn tone_frequencies(inventory_size: usize, features: &FeatureConfig) -> Result<Vec<f64>> {
    let fb = MelFilterbank::<f64>::new(features)?;
    let mut freqs = Vec::with_capacity(inventory_size);
    let mut bands: Vec<usize> = Vec::with_capacity(inventory_size);
    for k in 0..inventory_size {
        let frac = if inventory_size == 1 {
            0.0
        } else {
            k as f64 / (inventory_size - 1) as f64
        };
        let f = TONE_LOW_HZ * (TONE_HIGH_HZ / TONE_LOW_HZ).powf(frac);
        let band = fb.nearest_band(f);
        if bands.last().is_some_and(|&b| b >= band) {
            return Err(Error::Config(format!(
                "inventory_size {inventory_size} exceeds the distinguishable tone slots of {} mel bands",
                features.mel_bands
            )));
        }
        bands.push(band);
        freqs.push(fb.centers_hz()[band]);
    }
    Ok(freqs)
}

struct Utterance {
    entry: UtteranceManifestEntry,
    audio: AudioBuffer,
}

fn render_utterance(
    spec: &SyntheticCorpusSpec,
    index: usize,
    freqs: &[f64],
    typical: &[usize],
) -> Result<Utterance> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(index as u64 + 1);
    let [plo, phi] = spec.phonemes_per_utterance;
    let [dlo, dhi] = spec.duration_range;
    let count = rng.random_range(plo..=phi);
    let mut ids: Vec<usize> = Vec::with_capacity(count);
    for _ in 0..count {
        let id = match ids.last() {
            Some(&prev) if !spec.allow_adjacent_repeats => {
                let r = rng.random_range(0..spec.inventory_size - 1);
                if r >= prev { r + 1 } else { r }
            }
            _ => rng.random_range(0..spec.inventory_size),
        };
        ids.push(id);
    }
    let durations: Vec<usize> = ids
        .iter()
        .map(|&id| match spec.duration_jitter {
            Some(j) => {
                let lo = typical[id].saturating_sub(j).max(dlo);
                let hi = (typical[id] + j).min(dhi);
                rng.random_range(lo..=hi)
            }
            None => rng.random_range(dlo..=dhi),
        })
        .collect();

    let hop = spec.features.hop_length;
    let sr = spec.features.sample_rate as f64;
    let mut samples: Vec<f64> = Vec::new();
    let mut reference = Vec::with_capacity(count);
    for (i, (&id, &dur)) in ids.iter().zip(&durations).enumerate() {
        let n = dur * hop;
        let f = freqs[id];
        samples.extend((0..n).map(|s| spec.amplitude * (2.0 * PI * f * s as f64 / sr).sin()));
        let gap = if i + 1 < count { spec.gap_frames } else { 0 };
        samples.extend(std::iter::repeat_n(0.0, gap * hop));
        reference.push(dur + gap);
    }
    if spec.noise_level > 0.0 {
        let noise = Normal::new(0.0, spec.noise_level).map_err(|e| Error::Config(e.to_string()))?;
        samples.iter_mut().for_each(|s| *s += noise.sample(&mut rng));
    }
    let samples: Vec<f32> = samples.iter().map(|s| s.clamp(-1.0, 1.0) as f32).collect();
    let id = format!("utt{index:05}");
    Ok(Utterance {
        entry: UtteranceManifestEntry {
            audio_path: format!("wav/{id}.wav"),
            utterance_id: id,
            phonemes: ids.iter().map(|&k| SyntheticCorpusSpec::phoneme_symbol(k)).collect(),
            styles: None,
            reference_durations: Some(reference),
        },
        audio: AudioBuffer::new(samples, spec.features.sample_rate)?,
    })
}

/// Renders the corpus to `out_dir/wav/*.wav` plus `out_dir/manifest.jsonl`.
/// Output is a pure function of the spec.
pub fn generate_synthetic_corpus(
    spec: &SyntheticCorpusSpec,
    out_dir: impl AsRef<Path>,
) -> Result<Vec<UtteranceManifestEntry>> {
    spec.validate()?;
    let out_dir = out_dir.as_ref();
    fs::create_dir_all(out_dir.join("wav"))?;
    let freqs = tone_frequencies(spec.inventory_size, &spec.features)?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let [dlo, dhi] = spec.duration_range;
    let typical: Vec<usize> = (0..spec.inventory_size)
        .map(|_| rng.random_range(dlo..=dhi))
        .collect();

    let entries = (0..spec.utterance_count)
        .into_par_iter()
        .map(|i| {
            let utt = render_utterance(spec, i, &freqs, &typical)?;
            write_wav(&utt.audio, out_dir.join(&utt.entry.audio_path))?;
            Ok(utt.entry)
        })
        .collect::<Result<Vec<_>>>()?;
    write_manifest(out_dir.join("manifest.jsonl"), &entries)?;
    Ok(entries)
}
