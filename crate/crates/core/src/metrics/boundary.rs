use std::collections::HashMap;

use log::warn;
use serde::{Deserialize, Serialize};

use crate::audio::UtteranceManifestEntry;
use crate::ctc::AlignmentRecord;
use crate::error::{contract_err, Result};

/// Boundary errors of one utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UtteranceBoundaries {
    pub utterance_id: String,
    /// `|predicted - reference|` for each interior boundary, in frames.
    pub errors: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BoundaryReport {
    pub utterances: Vec<UtteranceBoundaries>,
    /// Utterances left out because their phoneme counts differ.
    pub excluded: Vec<String>,
    pub boundaries: usize,
    pub median: f64,
    pub mean: f64,
    /// Percentages of boundaries within 1, 2 and 5 frames.
    pub within_1: f64,
    pub within_2: f64,
    pub within_5: f64,
}

fn cumulative(durations: &[usize]) -> Vec<usize> {
    durations
        .iter()
        .scan(0, |acc, &d| {
            *acc += d;
            Some(*acc)
        })
        .collect()
}

/// Errors of the boundaries between consecutive phonemes (the final end frame is excluded).
pub fn interior_boundary_errors(predicted: &[usize], reference: &[usize]) -> Vec<usize> {
    let p = cumulative(predicted);
    let r = cumulative(reference);
    let interior = p.len().min(r.len()).saturating_sub(1);
    (0..interior).map(|i| p[i].abs_diff(r[i])).collect()
}

/// Compares predicted alignments against manifest reference durations. Every predicted
/// utterance must appear in the manifest with reference durations.
pub fn boundary_accuracy(predicted: &[AlignmentRecord], reference: &[UtteranceManifestEntry]) -> Result<BoundaryReport> {
    let by_id: HashMap<&str, &UtteranceManifestEntry> =
        reference.iter().map(|e| (e.utterance_id.as_str(), e)).collect();
    let mut utterances = Vec::new();
    let mut excluded = Vec::new();
    for rec in predicted {
        let Some(entry) = by_id.get(rec.utterance_id.as_str()) else {
            return contract_err(format!("utterance {} has no reference entry", rec.utterance_id));
        };
        let Some(ref_durations) = &entry.reference_durations else {
            return contract_err(format!("utterance {} has no reference durations", rec.utterance_id));
        };
        if ref_durations.len() != rec.durations.len() {
            warn!(
                "excluding {}: {} predicted phonemes vs {} reference",
                rec.utterance_id,
                rec.durations.len(),
                ref_durations.len()
            );
            excluded.push(rec.utterance_id.clone());
            continue;
        }
        utterances.push(UtteranceBoundaries {
            utterance_id: rec.utterance_id.clone(),
            errors: interior_boundary_errors(&rec.durations, ref_durations),
        });
    }
    let mut all: Vec<usize> = utterances.iter().flat_map(|u| u.errors.iter().copied()).collect();
    all.sort_unstable();
    let n = all.len();
    let pct = |k: usize| {
        if n == 0 {
            0.0
        } else {
            100.0 * all.iter().filter(|&&e| e <= k).count() as f64 / n as f64
        }
    };
    let median = match n {
        0 => 0.0,
        _ if n % 2 == 1 => all[n / 2] as f64,
        _ => (all[n / 2 - 1] + all[n / 2]) as f64 / 2.0,
    };
    Ok(BoundaryReport {
        boundaries: n,
        median,
        mean: if n == 0 { 0.0 } else { all.iter().sum::<usize>() as f64 / n as f64 },
        within_1: pct(1),
        within_2: pct(2),
        within_5: pct(5),
        utterances,
        excluded,
    })
}
