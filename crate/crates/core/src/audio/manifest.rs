use std::fs::File;
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One line of a JSON-lines corpus manifest.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct UtteranceManifestEntry {
    pub utterance_id: String,
    pub audio_path: String,
    pub phonemes: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub styles: Option<Vec<String>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub reference_durations: Option<Vec<usize>>,
}

impl UtteranceManifestEntry {
    pub fn validate(&self) -> Result<()> {
        if self.phonemes.is_empty() {
            return Err(Error::Format(format!(
                "utterance {}: empty phoneme sequence",
                self.utterance_id
            )));
        }
        if let Some(styles) = &self.styles {
            if styles.len() != self.phonemes.len() {
                return Err(Error::Format(format!(
                    "utterance {}: {} styles for {} phonemes",
                    self.utterance_id,
                    styles.len(),
                    self.phonemes.len()
                )));
            }
        }
        if let Some(durs) = &self.reference_durations {
            if durs.len() != self.phonemes.len() {
                return Err(Error::Format(format!(
                    "utterance {}: {} reference durations for {} phonemes",
                    self.utterance_id,
                    durs.len(),
                    self.phonemes.len()
                )));
            }
        }
        Ok(())
    }
}

pub fn read_manifest(path: impl AsRef<Path>) -> Result<Vec<UtteranceManifestEntry>> {
    let reader = BufReader::new(File::open(path.as_ref())?);
    let mut entries = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let entry: UtteranceManifestEntry = serde_json::from_str(&line)
            .map_err(|e| Error::Format(format!("manifest line {}: {e}", lineno + 1)))?;
        entry.validate()?;
        entries.push(entry);
    }
    Ok(entries)
}

pub fn write_manifest(path: impl AsRef<Path>, entries: &[UtteranceManifestEntry]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path.as_ref())?);
    for entry in entries {
        entry.validate()?;
        serde_json::to_writer(&mut w, entry)?;
        w.write_all(b"\n")?;
    }
    w.flush()?;
    Ok(())
}

/// Relative audio paths are resolved against the manifest's directory.
pub fn resolve_audio_path(manifest_path: impl AsRef<Path>, entry: &UtteranceManifestEntry) -> PathBuf {
    let audio = Path::new(&entry.audio_path);
    if audio.is_absolute() {
        return audio.to_path_buf();
    }
    manifest_path
        .as_ref()
        .parent()
        .map(|dir| dir.join(audio))
        .unwrap_or_else(|| audio.to_path_buf())
}
