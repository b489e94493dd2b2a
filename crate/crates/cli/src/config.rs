use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use shgcn::io::{ColumnOrder, LoadOptions};
use shgcn::model::{ModelConfig, ModelKind};
use shgcn::synth::SynthConfig;
use shgcn::{Error, Result, TrainConfig};

/// Where the data comes from. Without both paths the run uses the synthetic
/// generator configured under `[synth]`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub interactions: Option<PathBuf>,
    pub triplets: Option<PathBuf>,
    pub derive_interactions_from_triplets: bool,
    pub dedup: bool,
    pub column_order: ColumnOrder,
}

impl DataConfig {
    pub fn load_options(&self) -> LoadOptions {
        LoadOptions {
            derive_interactions_from_triplets: self.derive_interactions_from_triplets,
            dedup: self.dedup,
            column_order: self.column_order,
        }
    }

    pub fn files(&self) -> Result<Option<(&Path, &Path)>> {
        match (&self.interactions, &self.triplets) {
            (Some(i), Some(t)) => Ok(Some((i, t))),
            (None, None) => Ok(None),
            _ => Err(Error::Config("give both interactions and triplets paths, or neither".into())),
        }
    }
}

fn default_kind() -> ModelKind {
    ModelKind::Shgcn
}

/// Everything that determines a training run. Stored verbatim in the run
/// manifest so `evaluate` can rebuild the split.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    #[serde(default = "default_kind")]
    pub kind: ModelKind,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
    #[serde(default)]
    pub data: DataConfig,
    #[serde(default)]
    pub synth: SynthConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            kind: default_kind(),
            model: ModelConfig::default(),
            train: TrainConfig::default(),
            data: DataConfig::default(),
            synth: SynthConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml_file(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.model.validate()?;
        self.train.validate()?;
        if self.data.files()?.is_none() {
            self.synth.validate()?;
        }
        Ok(())
    }
}
