use std::path::{Path, PathBuf};

use aligner_core::acoustic::TrainConfig;
use aligner_core::ctc::AlignPolicy;
use aligner_core::features::{FeatureConfig, FeatureKind};
use aligner_core::tts::DurationTrainConfig;
use serde::{Deserialize, Serialize};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PathsConfig {
    pub corpus_dir: Option<PathBuf>,
    pub workspace: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AlignConfig {
    pub policy: AlignPolicy,
}

/// Whole-experiment configuration. Every table is optional in the file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Overrides the per-stage seeds when set.
    pub seed: Option<u64>,
    pub feature_kind: FeatureKind,
    pub paths: PathsConfig,
    pub features: FeatureConfig,
    pub asr: TrainConfig,
    pub duration: DurationTrainConfig,
    pub align: AlignConfig,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            seed: None,
            feature_kind: FeatureKind::Melspec,
            paths: PathsConfig::default(),
            features: FeatureConfig::default(),
            asr: TrainConfig::default(),
            duration: DurationTrainConfig::default(),
            align: AlignConfig::default(),
        }
    }
}

impl PipelineConfig {
    pub fn load(path: &Path) -> CliResult<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read config {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Config(format!("config {}: {e}", path.display())))
    }

    /// Pushes the global seed into every stage and checks each table.
    pub fn finalize(mut self, seed_flag: Option<u64>) -> CliResult<Self> {
        if let Some(seed) = seed_flag {
            self.seed = Some(seed);
        }
        if let Some(seed) = self.seed {
            self.asr.seed = seed;
            self.duration.seed = seed;
        }
        if let Some(dir) = &self.paths.corpus_dir {
            if !dir.is_dir() {
                return Err(CliError::Config(format!("corpus_dir {} is not a directory", dir.display())));
            }
        }
        self.features.validate()?;
        self.asr.validate()?;
        self.duration.validate()?;
        Ok(self)
    }
}

/// Reads a TOML or (by extension) JSON document.
pub fn load_document<T: serde::de::DeserializeOwned>(path: &Path) -> CliResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    if path.extension().is_some_and(|e| e == "json") {
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    } else {
        toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}
