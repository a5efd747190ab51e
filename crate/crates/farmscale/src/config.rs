//! TOML experiment configuration. Every section and key is optional; missing
//! values take the built-in defaults.

use std::path::Path;

use farmscale_core::agents::{DqnConfig, SarsaConfig};
use farmscale_core::workload::{ServiceTimeModel, SizeDistribution, SUPPORTED_SIZES};
use farmscale_core::{CostConfig, EpisodeConfig, RewardConfig};
use serde::{Deserialize, Serialize};

use crate::error::{HarnessError, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WorkloadConfig {
    pub sizes: Vec<u32>,
    /// Mean service time the size mix is solved for.
    pub mean_service: f64,
    pub service_model: ServiceTimeModel,
    /// Permute phase order per episode.
    pub shuffle: bool,
}

impl Default for WorkloadConfig {
    fn default() -> Self {
        WorkloadConfig {
            sizes: SUPPORTED_SIZES.to_vec(),
            mean_service: 1.5,
            service_model: ServiceTimeModel::REFERENCE,
            shuffle: false,
        }
    }
}

impl WorkloadConfig {
    /// Maximum-entropy size mix with the configured mean. A model that gives
    /// every size the same time yields a uniform mix.
    pub fn size_distribution(&self) -> Result<SizeDistribution> {
        let times = self
            .sizes
            .iter()
            .map(|&s| self.service_model.predict(s))
            .collect::<farmscale_core::Result<Vec<f64>>>()?;
        if !times.is_empty() && times.iter().all(|t| *t == times[0]) {
            let w = 1.0 / times.len() as f64;
            return Ok(SizeDistribution::new(self.sizes.clone(), vec![w; times.len()])?);
        }
        Ok(SizeDistribution::max_entropy(&self.sizes, &self.service_model, self.mean_service)?)
    }

    pub fn max_service(&self) -> Result<f64> {
        let mut m: f64 = 0.0;
        for &s in &self.sizes {
            m = m.max(self.service_model.predict(s)?);
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainingConfig {
    pub sarsa_episodes: usize,
    pub dqn_episodes: usize,
    /// Permute phase order in training episodes.
    pub shuffle: bool,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig { sarsa_episodes: 100, dqn_episodes: 80, shuffle: false }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    pub episode: EpisodeConfig,
    pub reward: RewardConfig,
    pub workload: WorkloadConfig,
    pub cost: CostConfig,
    pub sarsa: SarsaConfig,
    pub dqn: DqnConfig,
    pub training: TrainingConfig,
}

impl Config {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Config = toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| HarnessError::io(path, e))?;
        Self::from_toml(&text).map_err(|e| match e {
            HarnessError::Config(m) => HarnessError::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| HarnessError::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.episode.validate()?;
        self.reward.validate()?;
        self.cost.validate()?;
        self.sarsa.validate()?;
        self.dqn.validate()?;
        self.workload.size_distribution()?;
        Ok(())
    }
}
