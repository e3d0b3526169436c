use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use neuro_attitude::pso::PsoConfig;
use neuro_attitude::train::{OptimizerConfig, TrainConfig};

use crate::error::{CliError, CliResult};

pub const DEFAULT_SEED: u64 = 42;

/// Optional JSON config file. Command-line flags take precedence over every
/// field here.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub n: Option<usize>,
    pub seconds: Option<f64>,
    pub rate: Option<f64>,
    pub threshold: Option<f64>,
    pub n_enc: Option<usize>,
    pub n_hid: Option<usize>,
    pub train: Option<TrainConfig>,
    pub optimizer: Option<OptimizerConfig>,
    pub pso: Option<PsoConfig>,
}

impl FileConfig {
    pub fn load(path: Option<&Path>) -> CliResult<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        if !path.exists() {
            return Err(CliError::MissingInput(path.to_path_buf()));
        }
        let text = std::fs::read_to_string(path).map_err(neuro_attitude::Error::from)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Validation(format!("config file {}: {e}", path.display())))
    }
}

/// Written next to every command's outputs.
#[derive(Debug, Clone, Serialize)]
pub struct Provenance {
    pub command: String,
    pub version: String,
    pub seed: u64,
    pub config_hash: String,
    pub config: serde_json::Value,
    pub outputs: Vec<String>,
}

pub fn version_string() -> String {
    match option_env!("NEURO_ATTITUDE_GIT_REV") {
        Some(rev) => format!("v{}-g{rev}", env!("CARGO_PKG_VERSION")),
        None => format!("v{}", env!("CARGO_PKG_VERSION")),
    }
}

impl Provenance {
    pub fn new(command: &str, seed: u64, config: &impl Serialize, outputs: Vec<String>) -> CliResult<Self> {
        let config = serde_json::to_value(config).map_err(neuro_attitude::Error::from)?;
        let bytes = serde_json::to_vec(&config).map_err(neuro_attitude::Error::from)?;
        let config_hash = Sha256::digest(&bytes)
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect();
        Ok(Self {
            command: command.to_string(),
            version: version_string(),
            seed,
            config_hash,
            config,
            outputs,
        })
    }

    pub fn save(&self, dir: &Path) -> CliResult<()> {
        let text = serde_json::to_string_pretty(self).map_err(neuro_attitude::Error::from)?;
        std::fs::write(dir.join("provenance.json"), text).map_err(neuro_attitude::Error::from)?;
        Ok(())
    }
}
