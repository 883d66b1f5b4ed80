//! Run configuration (TOML) and its provenance hash.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::corpus::{derive_seed, ScenarioRanges};
use crate::dsp::{StftConfig, DEFAULT_POWER_FLOOR};
use crate::error::{Error, Result};
use crate::network::ModelSpec;
use crate::trainer::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FeatureConfig {
    pub power_floor: f64,
}

impl Default for FeatureConfig {
    fn default() -> Self {
        Self {
            power_floor: DEFAULT_POWER_FLOOR,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct CorpusConfig {
    pub rooms: ScenarioRanges,
    /// Length of generated clean utterances in seconds.
    pub synthetic_duration: f64,
}

impl Default for CorpusConfig {
    fn default() -> Self {
        Self {
            rooms: ScenarioRanges::default(),
            synthetic_duration: 2.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PathsConfig {
    pub clean_dir: Option<PathBuf>,
    pub rir_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub train_manifest: Option<PathBuf>,
    pub val_manifest: Option<PathBuf>,
    pub test_manifest: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
}

/// Every tunable of a run. Unknown keys are rejected at every level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunConfig {
    /// Master seed; all other seeds derive from it.
    pub seed: u64,
    pub stft: StftConfig,
    pub features: FeatureConfig,
    pub corpus: CorpusConfig,
    pub model: ModelSpec,
    pub train: TrainConfig,
    pub paths: PathsConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 1234,
            stft: StftConfig::default(),
            features: FeatureConfig::default(),
            corpus: CorpusConfig::default(),
            model: ModelSpec::default(),
            train: TrainConfig::default(),
            paths: PathsConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s)?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&s)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        if !(self.features.power_floor > 0.0) {
            return Err(Error::Config("power floor must be positive".into()));
        }
        if !(self.corpus.synthetic_duration > 0.0) {
            return Err(Error::Config("synthetic duration must be positive".into()));
        }
        self.corpus.rooms.validate()?;
        self.model.validate()?;
        self.train.validate()
    }

    /// SHA-256 over the canonical JSON of everything except `paths`, so the
    /// same experiment hashes identically wherever its files live.
    pub fn hash(&self) -> String {
        let mut c = self.clone();
        c.paths = PathsConfig::default();
        let json = serde_json::to_string(&c).expect("config serializes");
        let digest = Sha256::digest(json.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }

    pub fn model_seed(&self) -> u64 {
        derive_seed(self.seed, u64::MAX)
    }

    pub fn shuffle_seed(&self) -> u64 {
        derive_seed(self.seed, u64::MAX - 1)
    }
}
