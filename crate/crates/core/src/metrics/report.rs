use std::collections::{BTreeMap, BTreeSet};
use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{error_rate, split_streams, BoundaryReport, ErrorRateReport};
use crate::error::{contract_err, Error, Result};

/// Corpus-level evaluation. Sections are absent when their inputs were not supplied.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct EvalReport {
    pub wer: Option<ErrorRateReport>,
    pub wer_p: Option<ErrorRateReport>,
    pub wer_s: Option<ErrorRateReport>,
    pub mcd: Option<f64>,
    pub boundary: Option<BoundaryReport>,
}

/// One row of the per-utterance breakdown.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct UtteranceEval {
    pub utterance_id: String,
    pub wer: Option<f64>,
    pub wer_p: Option<f64>,
    pub wer_s: Option<f64>,
    pub mcd: Option<f64>,
    pub boundary_mean_error: Option<f64>,
    pub boundary_max_error: Option<usize>,
}

/// Transcript file: one utterance per line, `id<TAB>space-separated symbols`.
pub fn read_transcripts(path: &Path) -> Result<BTreeMap<String, Vec<String>>> {
    let reader = BufReader::new(File::open(path)?);
    let mut out = BTreeMap::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let (id, text) = line
            .split_once('\t')
            .ok_or_else(|| Error::Format(format!("{}:{}: expected id<TAB>symbols", path.display(), n + 1)))?;
        if out
            .insert(id.to_string(), text.split_whitespace().map(str::to_string).collect())
            .is_some()
        {
            return Err(Error::Format(format!("{}:{}: duplicate utterance id {id}", path.display(), n + 1)));
        }
    }
    Ok(out)
}

/// Per-utterance whole-symbol, phoneme and style error rates for matching transcript sets.
pub fn transcript_error_rates(
    reference: &BTreeMap<String, Vec<String>>,
    hypothesis: &BTreeMap<String, Vec<String>>,
) -> Result<Vec<(String, [ErrorRateReport; 3])>> {
    let ref_ids: BTreeSet<&String> = reference.keys().collect();
    let hyp_ids: BTreeSet<&String> = hypothesis.keys().collect();
    if ref_ids != hyp_ids {
        let missing: Vec<&&String> = ref_ids.symmetric_difference(&hyp_ids).take(5).collect();
        return contract_err(format!("reference and hypothesis utterance ids differ (e.g. {missing:?})"));
    }
    reference
        .iter()
        .map(|(id, r)| {
            let h = &hypothesis[id];
            let (rp, rs) = split_streams(r);
            let (hp, hs) = split_streams(h);
            let rates = [error_rate(r, h)?, error_rate(&rp, &hp)?, error_rate(&rs, &hs)?];
            Ok((id.clone(), rates))
        })
        .collect()
}

fn cell<T: ToString>(v: &Option<T>) -> String {
    v.as_ref().map_or_else(|| "-".to_string(), T::to_string)
}

pub fn write_eval_tsv(path: &Path, rows: &[UtteranceEval]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    writeln!(w, "utterance_id\twer\twer_p\twer_s\tmcd\tboundary_mean_error\tboundary_max_error")?;
    for r in rows {
        writeln!(
            w,
            "{}\t{}\t{}\t{}\t{}\t{}\t{}",
            r.utterance_id,
            cell(&r.wer),
            cell(&r.wer_p),
            cell(&r.wer_s),
            cell(&r.mcd),
            cell(&r.boundary_mean_error),
            cell(&r.boundary_max_error)
        )?;
    }
    w.flush()?;
    Ok(())
}
