use crate::error::{contract_err, Result};

/// Phoneme ids to be aligned (blank excluded).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TargetSequence {
    ids: Vec<usize>,
    blank: usize,
    expanded: Vec<usize>,
}

impl TargetSequence {
    pub fn new(ids: Vec<usize>, blank: usize) -> Result<Self> {
        if ids.is_empty() {
            return contract_err("target sequence is empty");
        }
        if let Some(&bad) = ids.iter().find(|&&i| i >= blank) {
            return contract_err(format!("target id {bad} is the blank or beyond it (blank = {blank})"));
        }
        let mut expanded = Vec::with_capacity(2 * ids.len() + 1);
        expanded.push(blank);
        for &i in &ids {
            expanded.push(i);
            expanded.push(blank);
        }
        Ok(Self { ids, blank, expanded })
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn len(&self) -> usize {
        self.ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ids.is_empty()
    }

    pub fn blank(&self) -> usize {
        self.blank
    }

    /// `blank, x1, blank, x2, ..., xn, blank`.
    pub fn expanded(&self) -> &[usize] {
        &self.expanded
    }

    pub fn adjacent_repeats(&self) -> usize {
        self.ids.windows(2).filter(|w| w[0] == w[1]).count()
    }

    /// Fewest frames any valid alignment can use: one per label plus a separating
    /// blank between each pair of equal neighbours.
    pub fn min_frames(&self) -> usize {
        self.ids.len() + self.adjacent_repeats()
    }

    pub fn check_feasible(&self, frames: usize) -> Result<()> {
        let required = self.min_frames();
        if frames < required {
            return Err(crate::error::Error::Infeasible { required, frames });
        }
        Ok(())
    }
}

/// Per-phoneme frame counts that tile the whole utterance.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DurationSequence {
    durations: Vec<usize>,
}

impl DurationSequence {
    pub fn new(durations: Vec<usize>, total_frames: usize) -> Result<Self> {
        let sum: usize = durations.iter().sum();
        if sum != total_frames {
            return contract_err(format!("durations sum to {sum}, expected {total_frames} frames"));
        }
        Ok(Self { durations })
    }

    pub fn durations(&self) -> &[usize] {
        &self.durations
    }

    pub fn into_vec(self) -> Vec<usize> {
        self.durations
    }

    pub fn len(&self) -> usize {
        self.durations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.durations.is_empty()
    }

    pub fn total_frames(&self) -> usize {
        self.durations.iter().sum()
    }

    /// Cumulative end frame of every phoneme.
    pub fn boundaries(&self) -> Vec<usize> {
        self.durations
            .iter()
            .scan(0, |acc, &d| {
                *acc += d;
                Some(*acc)
            })
            .collect()
    }
}
