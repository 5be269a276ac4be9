//! Experiment configuration file.
//!
//! A TOML document with `[evolution]`, `[evolution.genome]`,
//! `[evolution.coefficients]`, `[foraging]` and `[success]` tables. Every key
//! is optional and falls back to its default.

use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::evolution::EvolutionConfig;
use crate::foraging::ForagingConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io { path: String, source: std::io::Error },
    #[error("cannot parse config: {0}")]
    Parse(#[from] toml::de::Error),
}

/// When a run counts as solved.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SuccessConfig {
    /// Consecutive generations the champion must hold `fitness`.
    pub window: usize,
    /// Best attainable score: every edible item plus one poisonous sample per poisonous trial.
    pub fitness: f64,
}

impl Default for SuccessConfig {
    fn default() -> Self {
        Self { window: 5, fitness: 60.0 }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LabConfig {
    pub evolution: EvolutionConfig,
    pub foraging: ForagingConfig,
    pub success: SuccessConfig,
}

impl LabConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        Ok(toml::from_str(text)?)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path)
            .map_err(|source| ConfigError::Io { path: path.display().to_string(), source })?;
        Self::from_toml(&text)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn partial_file_keeps_defaults() {
        let cfg = LabConfig::from_toml(
            "[evolution]\npopulation_size = 150\n[evolution.genome]\nadd_node_prob = 0.1\n[foraging]\nmax_speed = 3.0\n",
        )
        .unwrap();
        assert_eq!(cfg.evolution.population_size, 150);
        assert_eq!(cfg.evolution.generations, 500);
        assert_eq!(cfg.evolution.genome.add_node_prob, 0.1);
        assert_eq!(cfg.evolution.genome.weight_max, 8.0);
        assert_eq!(cfg.foraging.max_speed, 3.0);
        assert_eq!(cfg.foraging.timesteps, 750);
        assert_eq!(cfg.success.window, 5);
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = LabConfig::default();
        assert_eq!(LabConfig::from_toml(&cfg.to_toml()).unwrap(), cfg);
    }

    #[test]
    fn rejects_malformed_file() {
        assert!(LabConfig::from_toml("[evolution]\npopulation_size = \"many\"").is_err());
    }
}
