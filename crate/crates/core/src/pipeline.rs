//! Corpus-level glue: feature extraction over a manifest and batch alignment.

use std::path::Path;

use log::warn;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::acoustic::{AsrExample, AsrModel};
use crate::audio::{read_wav, resolve_audio_path, UtteranceManifestEntry};
use crate::ctc::{align_with_policy, AlignPolicy, AlignmentRecord, TargetSequence};
use crate::error::Result;
use crate::features::{FeatureConfig, FeatureExtractor, FeatureKind, FeatureMatrix};
use crate::scalar::Scalar;

/// Reads and featurizes every manifest entry in parallel. Results keep manifest order.
pub fn extract_corpus_features<S: Scalar>(
    manifest_path: &Path,
    entries: &[UtteranceManifestEntry],
    config: &FeatureConfig,
    kind: FeatureKind,
) -> Result<Vec<Result<FeatureMatrix<S>>>> {
    let extractor = FeatureExtractor::<S>::new(config)?;
    Ok(entries
        .par_iter()
        .map(|e| {
            let audio = read_wav(resolve_audio_path(manifest_path, e))?;
            extractor.extract(&audio, kind, &e.utterance_id)
        })
        .collect())
}

/// Pairs entries with their features, dropping (with a warning) any that failed.
pub fn training_examples<S: Scalar>(
    entries: &[UtteranceManifestEntry],
    features: Vec<Result<FeatureMatrix<S>>>,
) -> Vec<AsrExample<S>> {
    entries
        .iter()
        .zip(features)
        .filter_map(|(e, f)| match f {
            Ok(features) => Some(AsrExample {
                utterance_id: e.utterance_id.clone(),
                features,
                phonemes: e.phonemes.clone(),
            }),
            Err(err) => {
                warn!("skipping {}: {err}", e.utterance_id);
                None
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentFailure {
    pub utterance_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentSummary {
    pub policy: AlignPolicy,
    pub utterances: usize,
    pub aligned: usize,
    /// Utterances whose best path did not collapse to the expected sequence.
    pub pda_mismatches: usize,
    /// Mismatches over processed utterances where the best path was tried.
    pub mismatch_rate: f64,
    pub viterbi_fallbacks: usize,
    /// Utterances left without durations because the best path mismatched under `pda_only`.
    pub unaligned: Vec<String>,
    /// Utterances that could not be processed at all.
    pub failures: Vec<AlignmentFailure>,
    /// Mean `|duration - reference|` in frames, over utterances with reference durations.
    pub mean_abs_duration_error: Option<f64>,
}

#[derive(Debug, Clone)]
pub struct AlignmentRun {
    pub records: Vec<AlignmentRecord>,
    pub summary: AlignmentSummary,
}

enum UtteranceResult {
    Aligned { record: AlignmentRecord, mismatch: bool, fallback: bool },
    Unaligned,
}

fn align_one<S: Scalar>(
    model: &AsrModel<S>,
    entry: &UtteranceManifestEntry,
    features: &FeatureMatrix<S>,
    policy: AlignPolicy,
) -> Result<UtteranceResult> {
    let ids = model.inventory.encode(&entry.phonemes)?;
    let target = TargetSequence::new(ids, model.inventory.blank_id())?;
    let c = model.forward(features)?;
    let outcome = align_with_policy(&c, &target, policy)?;
    let mismatch = outcome.mismatch.is_some();
    Ok(match outcome.durations {
        Some((durations, method)) => UtteranceResult::Aligned {
            record: AlignmentRecord {
                utterance_id: entry.utterance_id.clone(),
                method,
                frame_hop_seconds: features.frame_hop_seconds,
                phonemes: entry.phonemes.clone(),
                styles: entry.styles.clone(),
                durations: durations.into_vec(),
            },
            mismatch,
            fallback: mismatch,
        },
        None => UtteranceResult::Unaligned,
    })
}

/// Aligns every utterance with `model`. Per-utterance failures are collected, not
/// raised; records come back sorted by utterance id.
pub fn align_corpus<S: Scalar>(
    model: &AsrModel<S>,
    entries: &[UtteranceManifestEntry],
    features: &[Result<FeatureMatrix<S>>],
    policy: AlignPolicy,
) -> AlignmentRun {
    let mut results: Vec<(&UtteranceManifestEntry, std::result::Result<UtteranceResult, String>)> = entries
        .par_iter()
        .zip(features.par_iter())
        .map(|(e, f)| {
            let r = match f {
                Ok(f) => align_one(model, e, f, policy).map_err(|err| err.to_string()),
                Err(err) => Err(err.to_string()),
            };
            (e, r)
        })
        .collect();
    results.sort_by(|a, b| a.0.utterance_id.cmp(&b.0.utterance_id));

    let mut records = Vec::new();
    let mut failures = Vec::new();
    let mut unaligned = Vec::new();
    let (mut mismatches, mut fallbacks) = (0, 0);
    let (mut err_sum, mut err_count) = (0.0, 0usize);
    for (entry, r) in results {
        match r {
            Ok(UtteranceResult::Aligned { record, mismatch, fallback }) => {
                mismatches += usize::from(mismatch);
                fallbacks += usize::from(fallback);
                if let Some(reference) = &entry.reference_durations {
                    if reference.len() == record.durations.len() {
                        for (a, b) in record.durations.iter().zip(reference) {
                            err_sum += a.abs_diff(*b) as f64;
                            err_count += 1;
                        }
                    }
                }
                records.push(record);
            }
            Ok(UtteranceResult::Unaligned) => {
                mismatches += 1;
                unaligned.push(entry.utterance_id.clone());
            }
            Err(reason) => {
                warn!("alignment failed for {}: {reason}", entry.utterance_id);
                failures.push(AlignmentFailure {
                    utterance_id: entry.utterance_id.clone(),
                    reason,
                });
            }
        }
    }
    let processed = entries.len() - failures.len();
    let attempted = if policy == AlignPolicy::ViterbiOnly { 0 } else { processed };
    let summary = AlignmentSummary {
        policy,
        utterances: entries.len(),
        aligned: records.len(),
        pda_mismatches: mismatches,
        mismatch_rate: if attempted == 0 { 0.0 } else { mismatches as f64 / attempted as f64 },
        viterbi_fallbacks: fallbacks,
        unaligned,
        failures,
        mean_abs_duration_error: (err_count > 0).then(|| err_sum / err_count as f64),
    };
    AlignmentRun { records, summary }
}

/// Loads `<dir>/<utterance_id>.feat` for every entry, in manifest order.
pub fn load_feature_dir<S: Scalar>(dir: &Path, entries: &[UtteranceManifestEntry]) -> Vec<Result<FeatureMatrix<S>>> {
    entries
        .par_iter()
        .map(|e| {
            let mut m = crate::features::load_features(dir.join(format!("{}.feat", e.utterance_id)))?;
            m.source_id = e.utterance_id.clone();
            Ok(m)
        })
        .collect()
}
