//! Run configuration shared by every command, stored as TOML.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::eval::{EvalOptions, GridSpec, SplitSpec};
use crate::predict::HybridConfig;
use crate::ratings::DEFAULT_MAX_MISSING_FRACTION;
use crate::synth::SynthSpec;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub dataset: Option<PathBuf>,
    /// Item catalog CSV; the built-in questionnaire catalog when absent.
    pub catalog: Option<PathBuf>,
    pub out: PathBuf,
    pub k: usize,
    pub threshold: f64,
    pub max_missing_fraction: f64,
    pub split: SplitSpec,
    pub grid: GridSpec,
    /// Fixed configuration for `evaluate` and `recommend`.
    pub model: Option<HybridConfig>,
    pub synth: Option<SynthSpec>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let options = EvalOptions::default();
        Self {
            dataset: None,
            catalog: None,
            out: PathBuf::from("out"),
            k: options.k,
            threshold: options.relevance_threshold,
            max_missing_fraction: DEFAULT_MAX_MISSING_FRACTION,
            split: SplitSpec::default(),
            grid: GridSpec::default(),
            model: None,
            synth: None,
        }
    }
}

impl RunConfig {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn from_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml_str(&text)
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn options(&self) -> EvalOptions {
        EvalOptions {
            k: self.k,
            relevance_threshold: self.threshold,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.k == 0 {
            return Err(Error::Config("k must be at least 1".into()));
        }
        if !(0.0..=1.0).contains(&self.max_missing_fraction) {
            return Err(Error::Config("max_missing_fraction must lie in [0, 1]".into()));
        }
        self.split.validate()?;
        self.grid.validate()?;
        if let Some(model) = &self.model {
            model.validate()?;
        }
        if let Some(synth) = &self.synth {
            synth.validate()?;
        }
        Ok(())
    }
}
