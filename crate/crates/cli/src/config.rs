use std::fs;
use std::path::Path;

use csi_har::dsp::DspConfig;
use csi_har::gru::{GruConfig, TrainConfig};
use csi_har::pipeline::PipelineConfig;
use csi_har::synth::SynthConfig;
use serde::{Deserialize, Serialize};

use crate::error::CliError;

/// Settings file layout. Every section is optional; missing keys keep their
/// defaults and command-line flags override both.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub synth: SynthConfig,
    pub dsp: DspConfig,
    pub model: GruConfig,
    pub train: TrainConfig,
    pub pipeline: PipelineConfig,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }
}

/// Metadata written next to a synthetic capture.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetManifest {
    pub capture: String,
    pub labels: String,
    pub synth: SynthConfig,
}

pub const DATASET_MANIFEST: &str = "dataset.toml";

impl DatasetManifest {
    pub fn read(dir: &Path) -> Result<Self, CliError> {
        let path = dir.join(DATASET_MANIFEST);
        let text = fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        toml::from_str(&text)
            .map_err(|e| CliError::Config(format!("{}: {}", path.display(), e.message())))
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(DATASET_MANIFEST);
        let text = toml::to_string(self).map_err(|e| CliError::Config(e.to_string()))?;
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))
    }
}
