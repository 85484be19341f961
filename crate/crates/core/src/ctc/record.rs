use std::fmt;
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::{forced_viterbi, pda, DurationSequence, MismatchReport, PdaOutcome, TargetSequence};
use crate::acoustic::LikelihoodMatrix;
use crate::error::{contract_err, Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignMethod {
    PdaBestPath,
    ForcedViterbi,
    External,
}

/// How durations are obtained from a likelihood matrix.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AlignPolicy {
    PdaOnly,
    #[default]
    PdaThenViterbi,
    ViterbiOnly,
}

impl FromStr for AlignPolicy {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pda_only" => Ok(Self::PdaOnly),
            "pda_then_viterbi" => Ok(Self::PdaThenViterbi),
            "viterbi_only" => Ok(Self::ViterbiOnly),
            other => Err(Error::Config(format!(
                "unknown alignment policy '{other}' (expected pda_only, pda_then_viterbi or viterbi_only)"
            ))),
        }
    }
}

impl fmt::Display for AlignPolicy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::PdaOnly => "pda_only",
            Self::PdaThenViterbi => "pda_then_viterbi",
            Self::ViterbiOnly => "viterbi_only",
        })
    }
}

/// Result of aligning one likelihood matrix under a policy.
#[derive(Debug, Clone)]
pub struct PolicyOutcome {
    /// `None` only under `pda_only` when the best path mismatched.
    pub durations: Option<(DurationSequence, AlignMethod)>,
    /// Set whenever PDA was attempted and mismatched.
    pub mismatch: Option<MismatchReport>,
}

pub fn align_with_policy<S: Scalar>(
    c: &LikelihoodMatrix<S>,
    x: &TargetSequence,
    policy: AlignPolicy,
) -> Result<PolicyOutcome> {
    if policy == AlignPolicy::ViterbiOnly {
        let v = forced_viterbi(c, x)?;
        return Ok(PolicyOutcome {
            durations: Some((v.durations, AlignMethod::ForcedViterbi)),
            mismatch: None,
        });
    }
    match pda(c, x)? {
        PdaOutcome::Match(d) => Ok(PolicyOutcome {
            durations: Some((d, AlignMethod::PdaBestPath)),
            mismatch: None,
        }),
        PdaOutcome::Mismatch(report) => {
            let durations = if policy == AlignPolicy::PdaThenViterbi {
                Some((forced_viterbi(c, x)?.durations, AlignMethod::ForcedViterbi))
            } else {
                None
            };
            Ok(PolicyOutcome {
                durations,
                mismatch: Some(report),
            })
        }
    }
}

/// One aligned utterance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub utterance_id: String,
    pub method: AlignMethod,
    pub frame_hop_seconds: f64,
    pub phonemes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub styles: Option<Vec<String>>,
    pub durations: Vec<usize>,
}

impl AlignmentRecord {
    pub fn validate(&self) -> Result<()> {
        if self.phonemes.len() != self.durations.len() {
            return contract_err(format!(
                "utterance {}: {} phonemes but {} durations",
                self.utterance_id,
                self.phonemes.len(),
                self.durations.len()
            ));
        }
        if let Some(styles) = &self.styles {
            if styles.len() != self.phonemes.len() {
                return contract_err(format!(
                    "utterance {}: {} styles for {} phonemes",
                    self.utterance_id,
                    styles.len(),
                    self.phonemes.len()
                ));
            }
        }
        Ok(())
    }

    pub fn total_frames(&self) -> usize {
        self.durations.iter().sum()
    }

    /// `(start, end)` frame of each phoneme, end exclusive.
    pub fn spans(&self) -> Vec<(usize, usize)> {
        let mut start = 0;
        self.durations
            .iter()
            .map(|&d| {
                let span = (start, start + d);
                start += d;
                span
            })
            .collect()
    }
}

pub fn write_alignments(path: &Path, records: &[AlignmentRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for r in records {
        r.validate()?;
        serde_json::to_writer(&mut w, r)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_alignments(path: &Path) -> Result<Vec<AlignmentRecord>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let rec: AlignmentRecord = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("{}:{}: {e}", path.display(), n + 1)))?;
        rec.validate()?;
        out.push(rec);
    }
    Ok(out)
}

/// Tab-separated table, one row per phoneme: id, phoneme, start_frame, end_frame (exclusive), duration.
pub fn write_alignment_tsv(path: &Path, records: &[AlignmentRecord]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "utterance_id\tphoneme\tstart_frame\tend_frame\tduration")?;
    for r in records {
        for (p, (start, end)) in r.phonemes.iter().zip(r.spans()) {
            writeln!(w, "{}\t{}\t{}\t{}\t{}", r.utterance_id, p, start, end, end - start)?;
        }
    }
    w.flush()?;
    Ok(())
}
