use serde::{Deserialize, Serialize};

use crate::error::{contract_err, Result};
use crate::tts::NEUTRAL_STYLE;

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ErrorRateReport {
    pub substitutions: usize,
    pub insertions: usize,
    pub deletions: usize,
    pub reference_length: usize,
    pub rate: f64,
}

impl ErrorRateReport {
    pub fn errors(&self) -> usize {
        self.substitutions + self.insertions + self.deletions
    }

    /// Pools counts across utterances; the rate is recomputed over the summed reference length.
    pub fn pooled<'a>(reports: impl IntoIterator<Item = &'a ErrorRateReport>) -> Self {
        let mut total = Self::default();
        for r in reports {
            total.substitutions += r.substitutions;
            total.insertions += r.insertions;
            total.deletions += r.deletions;
            total.reference_length += r.reference_length;
        }
        if total.reference_length > 0 {
            total.rate = total.errors() as f64 / total.reference_length as f64;
        }
        total
    }
}

/// Levenshtein alignment with unit costs. Among optimal scripts the backtrace prefers
/// substitution (or match), then insertion, then deletion.
pub fn error_rate<T: PartialEq>(reference: &[T], hypothesis: &[T]) -> Result<ErrorRateReport> {
    if reference.is_empty() {
        return contract_err("reference sequence is empty");
    }
    let (n, m) = (reference.len(), hypothesis.len());
    let w = m + 1;
    let mut d = vec![0usize; (n + 1) * w];
    for i in 0..=n {
        d[i * w] = i;
    }
    for j in 0..=m {
        d[j] = j;
    }
    for i in 1..=n {
        for j in 1..=m {
            let sub = d[(i - 1) * w + j - 1] + usize::from(reference[i - 1] != hypothesis[j - 1]);
            let ins = d[i * w + j - 1] + 1;
            let del = d[(i - 1) * w + j] + 1;
            d[i * w + j] = sub.min(ins).min(del);
        }
    }
    let (mut i, mut j) = (n, m);
    let mut report = ErrorRateReport {
        reference_length: n,
        ..Default::default()
    };
    while i > 0 || j > 0 {
        let here = d[i * w + j];
        if i > 0 && j > 0 {
            let same = reference[i - 1] == hypothesis[j - 1];
            if d[(i - 1) * w + j - 1] + usize::from(!same) == here {
                report.substitutions += usize::from(!same);
                i -= 1;
                j -= 1;
                continue;
            }
        }
        if j > 0 && d[i * w + j - 1] + 1 == here {
            report.insertions += 1;
            j -= 1;
        } else {
            report.deletions += 1;
            i -= 1;
        }
    }
    report.rate = report.errors() as f64 / n as f64;
    Ok(report)
}

fn is_style_mark(c: char) -> bool {
    ('\u{02E5}'..='\u{02E9}').contains(&c) || c.is_ascii_digit()
}

/// Splits a trailing run of tone letters (U+02E5..U+02E9) or ASCII digits off a symbol.
/// Symbols without a mark, or made only of marks, get the neutral style.
pub fn split_symbol(symbol: &str) -> (String, String) {
    let base = symbol.trim_end_matches(is_style_mark);
    if base.is_empty() || base.len() == symbol.len() {
        (symbol.to_string(), NEUTRAL_STYLE.to_string())
    } else {
        (base.to_string(), symbol[base.len()..].to_string())
    }
}

pub fn merge_symbol(base: &str, style: &str) -> String {
    if style == NEUTRAL_STYLE {
        base.to_string()
    } else {
        format!("{base}{style}")
    }
}

/// Parallel phoneme and style streams.
pub fn split_streams<S: AsRef<str>>(symbols: &[S]) -> (Vec<String>, Vec<String>) {
    symbols.iter().map(|s| split_symbol(s.as_ref())).unzip()
}

pub fn merge_streams(phonemes: &[String], styles: &[String]) -> Result<Vec<String>> {
    if phonemes.len() != styles.len() {
        return contract_err(format!("{} phonemes but {} styles", phonemes.len(), styles.len()));
    }
    Ok(phonemes.iter().zip(styles).map(|(p, s)| merge_symbol(p, s)).collect())
}
