use super::{DurationSequence, TargetSequence};
use crate::acoustic::LikelihoodMatrix;
use crate::error::{contract_err, Result};
use crate::scalar::Scalar;

/// Why a best path could not be turned into durations for the requested sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MismatchReport {
    pub collapsed: Vec<usize>,
    pub expected: Vec<usize>,
    /// First position where the two sequences differ (the shorter length if one is a prefix).
    pub divergence: usize,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum PdaOutcome {
    Match(DurationSequence),
    Mismatch(MismatchReport),
}

impl PdaOutcome {
    pub fn durations(&self) -> Option<&DurationSequence> {
        match self {
            PdaOutcome::Match(d) => Some(d),
            PdaOutcome::Mismatch(_) => None,
        }
    }

    pub fn is_match(&self) -> bool {
        matches!(self, PdaOutcome::Match(_))
    }
}

/// Collapses frame labels into `(phoneme, duration)` runs. Blank frames and repeats
/// extend the running phoneme; blanks before the first phoneme go to that phoneme.
/// Returns no runs when every frame is blank.
pub fn collapse_labels(labels: &[usize], blank: usize) -> Vec<(usize, usize)> {
    let mut runs: Vec<(usize, usize)> = Vec::new();
    let mut leading = 0;
    for &g in labels {
        match runs.last_mut() {
            None if g == blank => leading += 1,
            None => runs.push((g, 1 + leading)),
            Some((cur, n)) if g == blank || g == *cur => *n += 1,
            Some(_) => runs.push((g, 1)),
        }
    }
    runs
}

/// Phoneme duration alignment from precomputed frame labels.
pub fn pda_from_labels(labels: &[usize], x: &TargetSequence) -> Result<PdaOutcome> {
    if x.is_empty() {
        return contract_err("target sequence is empty");
    }
    let runs = collapse_labels(labels, x.blank());
    let collapsed: Vec<usize> = runs.iter().map(|r| r.0).collect();
    if collapsed == x.ids() {
        let durations = runs.into_iter().map(|r| r.1).collect();
        return Ok(PdaOutcome::Match(DurationSequence::new(durations, labels.len())?));
    }
    let divergence = collapsed
        .iter()
        .zip(x.ids())
        .position(|(a, b)| a != b)
        .unwrap_or(collapsed.len().min(x.len()));
    Ok(PdaOutcome::Mismatch(MismatchReport {
        collapsed,
        expected: x.ids().to_vec(),
        divergence,
    }))
}

/// Column-wise argmax of `c`, then [`pda_from_labels`].
pub fn pda<S: Scalar>(c: &LikelihoodMatrix<S>, x: &TargetSequence) -> Result<PdaOutcome> {
    if x.blank() != c.blank_id() {
        return contract_err(format!(
            "target blank {} does not match likelihood blank {}",
            x.blank(),
            c.blank_id()
        ));
    }
    pda_from_labels(&c.argmax_labels(), x)
}
