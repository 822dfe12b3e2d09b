//! The `--config` TOML file.
//!
//! All sections are optional. Top-level keys that are not sections are
//! ignored here so a grid file can double as a config file.

use std::path::{Path, PathBuf};

use anyhow::Context;
use metaug_core::gbt::TrainConfig;
use metaug_core::llm::{EndpointConfig, LabelAliases};
use metaug_core::textprep::Stopwords;
use serde::{Deserialize, Serialize};

use crate::files;

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct PipelineConfig {
    pub split: SplitSection,
    pub train: TrainConfig,
    pub sample: SampleSection,
    pub endpoint: Option<EndpointConfig>,
    pub experiment: ExperimentSection,
    /// One stopword per line; the bundled English list when absent.
    pub stopwords: Option<PathBuf>,
    /// College alias table; the bundled one when absent.
    pub aliases: Option<PathBuf>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub train_fraction: f64,
    pub stratified: bool,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            train_fraction: 0.8,
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SampleSection {
    pub per_college: usize,
    pub n_samples: usize,
}

impl Default for SampleSection {
    fn default() -> Self {
        Self {
            per_college: 10,
            n_samples: 5,
        }
    }
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentSection {
    /// Falls back to `endpoint.max_in_flight`, then 1.
    pub max_in_flight: Option<usize>,
    pub repair: bool,
}

impl PipelineConfig {
    /// Reads `path`, or returns defaults when no config was given. Relative
    /// stopword and alias paths are resolved against the config's directory.
    pub fn load(path: Option<&Path>) -> anyhow::Result<Self> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        files::require_file(path)?;
        let text = files::read(path)?;
        let mut config: Self = toml::from_str(&text).with_context(|| path.display().to_string())?;
        let base = path.parent().unwrap_or(Path::new(""));
        for p in [&mut config.stopwords, &mut config.aliases]
            .into_iter()
            .flatten()
        {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(config)
    }

    pub fn stopwords(&self) -> anyhow::Result<Stopwords> {
        match &self.stopwords {
            Some(p) => {
                files::require_file(p)?;
                Stopwords::load(p).with_context(|| p.display().to_string())
            }
            None => Ok(Stopwords::english()),
        }
    }

    pub fn aliases(&self) -> anyhow::Result<LabelAliases> {
        match &self.aliases {
            Some(p) => {
                files::require_file(p)?;
                LabelAliases::load(p).with_context(|| p.display().to_string())
            }
            None => Ok(LabelAliases::bundled()),
        }
    }
}
