//! Experiment configuration file.
//!
//! A TOML document with one section per concern. Every key is optional and
//! falls back to its default; unknown keys are rejected.
//!
//! ```toml
//! [domain]
//! target_subjects = 6
//! shift_offset = 1.5
//!
//! [network]
//! feature_dim = 16
//!
//! [train]
//! epochs = 30
//!
//! [experiment]
//! da_mode = "adversarial"
//! pooling = "adaptive"
//! encoding = { kind = "gaussian", sigma = 0.3 }
//! window = 64
//!
//! [run]
//! output = "runs/demo"
//! ```

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::experiment::Protocol;
use crate::network::NetworkConfig;
use crate::synth::DomainSpec;
use crate::trainer::TrainConfig;

/// Where results go and where datasets come from.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub output: PathBuf,
    /// Directory holding `source.csv` and `target.csv`; defaults to `output`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<PathBuf>,
    /// Also run the training-scenario cells in `ablate`.
    pub scenarios: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            output: PathBuf::from("out"),
            dataset: None,
            scenarios: false,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub domain: DomainSpec,
    pub network: NetworkConfig,
    pub train: TrainConfig,
    pub experiment: Protocol,
    pub run: RunConfig,
}

impl ExperimentConfig {
    /// Parses and validates; errors name the offending key.
    pub fn from_toml(text: &str) -> Result<Self> {
        let de = toml::Deserializer::parse(text).map_err(|e| Error::Config(e.to_string()))?;
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            Error::Config(format!("{path}: {}", e.into_inner().message().trim()))
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| match e.kind() {
            std::io::ErrorKind::NotFound => Error::MissingInput(path.to_path_buf()),
            _ => Error::Io(e),
        })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        let section = |name: &str, r: Result<()>| {
            r.map_err(|e| match e {
                Error::InvalidArgument(m) => Error::Config(format!("[{name}] {m}")),
                other => other,
            })
        };
        section("domain", self.domain.validate())?;
        section("network", self.network.validate())?;
        section("train", self.train.validate())?;
        section("experiment", self.experiment.validate())?;
        if self.network.input_dim != self.domain.feature_dim {
            return Err(Error::Config(format!(
                "network.input_dim = {} but domain.feature_dim = {}",
                self.network.input_dim, self.domain.feature_dim
            )));
        }
        if self.network.levels != self.domain.levels {
            return Err(Error::Config(format!(
                "network.levels = {} but domain.levels = {}",
                self.network.levels, self.domain.levels
            )));
        }
        Ok(())
    }

    /// One seed for data generation, initialization and sampling.
    pub fn with_seed(mut self, seed: u64) -> Self {
        self.domain.seed = seed;
        self.network.seed = seed;
        self.train.seed = seed;
        self
    }

    pub fn dataset_dir(&self) -> &Path {
        self.run.dataset.as_deref().unwrap_or(&self.run.output)
    }
}
