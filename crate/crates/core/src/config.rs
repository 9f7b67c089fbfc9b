//! Run configuration: every setting a training or evaluation run depends on,
//! read from one TOML file.

use std::path::PathBuf;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::cost::CostWeights;
use crate::env::EpisodeConfig;
use crate::policy::PpoConfig;
use crate::safety::SafetyConfig;
use crate::search::SearchConfig;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("config parse error: {0}")]
    Parse(String),
    #[error("invalid config: {0}")]
    Invalid(String),
}

/// Settings used when evaluating planners.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvalConfig {
    pub move_layers: usize,
    pub safety_gating: bool,
    pub episodes: usize,
    /// Scenes timed per planner by the latency benchmark.
    pub bench_queries: usize,
}

impl Default for EvalConfig {
    fn default() -> Self {
        Self {
            move_layers: 1,
            safety_gating: true,
            episodes: 1000,
            bench_queries: 200,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub out_dir: PathBuf,
    pub episode: EpisodeConfig,
    pub eval: EvalConfig,
    pub ppo: PpoConfig,
    pub weights: CostWeights,
    pub safety: SafetyConfig,
    pub search: SearchConfig,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            out_dir: PathBuf::from("runs/default"),
            episode: EpisodeConfig::default(),
            eval: EvalConfig::default(),
            ppo: PpoConfig::default(),
            weights: CostWeights::default(),
            safety: SafetyConfig::default(),
            search: SearchConfig::default(),
        }
    }
}

impl RunConfig {
    pub fn from_toml(text: &str) -> Result<Self, ConfigError> {
        let c: RunConfig = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        c.validate()?;
        Ok(c)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("run config is serializable")
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let invalid = |section: &str, msg: String| ConfigError::Invalid(format!("[{section}] {msg}"));
        self.episode.validate().map_err(|m| invalid("episode", m))?;
        self.evaluation_episode()
            .validate()
            .map_err(|m| invalid("eval", m))?;
        self.ppo.validate().map_err(|m| invalid("ppo", m))?;
        self.weights.validate().map_err(|m| invalid("weights", m))?;
        self.safety.validate().map_err(|m| invalid("safety", m))?;
        self.search.validate().map_err(|m| invalid("search", m))?;
        Ok(())
    }

    /// PPO settings with the run seed applied.
    pub fn training(&self) -> PpoConfig {
        PpoConfig {
            seed: self.seed,
            ..self.ppo.clone()
        }
    }

    /// The episode settings with the evaluation overrides applied.
    pub fn evaluation_episode(&self) -> EpisodeConfig {
        EpisodeConfig {
            move_layers: self.eval.move_layers,
            safety_gating: self.eval.safety_gating,
            ..self.episode.clone()
        }
    }

    /// SHA-256 of the canonical JSON form, hex encoded.
    pub fn hash(&self) -> String {
        let json = serde_json::to_string(self).expect("run config is serializable");
        hex::encode(Sha256::digest(json.as_bytes()))
    }
}
