use std::collections::BTreeMap;
use std::fs;
use std::io::Read;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::PipelineConfig;
use crate::error::{CliError, CliResult};

pub const VERSION: &str = env!("ALIGNER_VERSION");

/// `workspace/{features,checkpoints,alignments,reports,runs}`.
#[derive(Debug, Clone)]
pub struct Workspace {
    root: PathBuf,
}

impl Workspace {
    pub fn new(root: PathBuf) -> Self {
        Self { root }
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    /// Returns `root/sub`, creating it.
    pub fn dir(&self, sub: &str) -> CliResult<PathBuf> {
        let d = self.root.join(sub);
        fs::create_dir_all(&d)?;
        Ok(d)
    }

    pub fn features(&self, kind: &str) -> CliResult<PathBuf> {
        self.dir(&format!("features/{kind}"))
    }

    pub fn checkpoints(&self) -> CliResult<PathBuf> {
        self.dir("checkpoints")
    }

    pub fn alignments(&self) -> CliResult<PathBuf> {
        self.dir("alignments")
    }

    pub fn reports(&self) -> CliResult<PathBuf> {
        self.dir("reports")
    }

    /// Writes the run manifest and returns its path.
    pub fn record_run(&self, run: &RunManifest) -> CliResult<PathBuf> {
        let body = serde_json::to_vec_pretty(run).map_err(aligner_core::Error::from)?;
        let hash = hex::encode(Sha256::digest(&body));
        let stamp = run.started_utc.replace([':', '-'], "");
        let path = self.dir("runs")?.join(format!("{stamp}-{}.json", &hash[..12]));
        fs::write(&path, body)?;
        Ok(path)
    }
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub version: String,
    pub started_utc: String,
    pub config: PipelineConfig,
    /// Input path to sha256 (directories hash their sorted file listing).
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
}

impl RunManifest {
    pub fn new(command: &str, config: &PipelineConfig) -> Self {
        Self {
            command: command.to_string(),
            args: std::env::args().collect(),
            version: VERSION.to_string(),
            started_utc: chrono::Utc::now().format("%Y%m%dT%H%M%SZ").to_string(),
            config: config.clone(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> CliResult<()> {
        let sum = checksum(path)?;
        self.inputs.insert(path.display().to_string(), sum);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }
}

fn file_digest(path: &Path) -> CliResult<Vec<u8>> {
    let mut hasher = Sha256::new();
    let mut file = fs::File::open(path)
        .map_err(|e| CliError::Stage(format!("cannot read {}: {e}", path.display())))?;
    let mut buf = vec![0u8; 1 << 16];
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
    }
    Ok(hasher.finalize().to_vec())
}

/// Hex sha256 of a file, or of `name\0digest` pairs over a directory's files in name order.
pub fn checksum(path: &Path) -> CliResult<String> {
    if !path.is_dir() {
        return Ok(hex::encode(file_digest(path)?));
    }
    let mut names: Vec<PathBuf> = fs::read_dir(path)?
        .map(|e| e.map(|e| e.path()))
        .collect::<Result<_, _>>()?;
    names.retain(|p| p.is_file());
    names.sort();
    let mut hasher = Sha256::new();
    for p in names {
        hasher.update(p.file_name().unwrap_or_default().as_encoded_bytes());
        hasher.update([0]);
        hasher.update(file_digest(&p)?);
    }
    Ok(hex::encode(hasher.finalize()))
}
