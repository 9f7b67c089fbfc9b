//! Checkpoint file: one JSON object.
//!
//! ```text
//! {
//!   "format": "rltraj-policy",     fixed tag
//!   "version": 1,
//!   "policy_sizes": [obs, h1, .., act],
//!   "policy_params": [..],         per layer: row-major weights, then biases
//!   "log_std": [..],               act entries
//!   "value_sizes": [obs, h1, .., 1],
//!   "value_params": [..],
//!   "adam": { "m": [..], "v": [..], "t": n },   flat order policy, log_std, value
//!   "steps": n, "updates": n,
//!   "ppo": {..}, "episode": {..}, "weights": {..}, "safety": {..}
//! }
//! ```
//!
//! Floats are written with round-trip precision.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Adam, Mlp, PolicyError, PolicyParams, PpoConfig, Trainer};
use crate::cost::CostWeights;
use crate::env::EpisodeConfig;
use crate::safety::SafetyConfig;

pub const CHECKPOINT_FORMAT: &str = "rltraj-policy";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub policy_sizes: Vec<usize>,
    pub policy_params: Vec<f64>,
    pub log_std: Vec<f64>,
    pub value_sizes: Vec<usize>,
    pub value_params: Vec<f64>,
    pub adam: Adam,
    pub steps: usize,
    pub updates: usize,
    pub ppo: PpoConfig,
    pub episode: EpisodeConfig,
    pub weights: CostWeights,
    pub safety: SafetyConfig,
}

impl Checkpoint {
    pub fn new(trainer: &Trainer) -> Self {
        let mut c = Self::from_params(
            &trainer.params,
            trainer.ppo.clone(),
            trainer.episode.clone(),
            trainer.weights,
            trainer.safety.clone(),
        );
        c.adam = trainer.adam.clone();
        c.steps = trainer.steps;
        c.updates = trainer.updates;
        c
    }

    /// A checkpoint of bare parameters with fresh optimizer state.
    pub fn from_params(
        params: &PolicyParams,
        ppo: PpoConfig,
        episode: EpisodeConfig,
        weights: CostWeights,
        safety: SafetyConfig,
    ) -> Self {
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            policy_sizes: params.policy.sizes().to_vec(),
            policy_params: params.policy.params().to_vec(),
            log_std: params.log_std.clone(),
            value_sizes: params.value.sizes().to_vec(),
            value_params: params.value.params().to_vec(),
            adam: Adam::new(params.num_params()),
            steps: 0,
            updates: 0,
            ppo,
            episode,
            weights,
            safety,
        }
    }

    pub fn params(&self) -> Result<PolicyParams, PolicyError> {
        let policy = Mlp::from_params(&self.policy_sizes, self.policy_params.clone())?;
        let value = Mlp::from_params(&self.value_sizes, self.value_params.clone())?;
        if self.log_std.len() != policy.output_len()
            || value.output_len() != 1
            || value.input_len() != policy.input_len()
        {
            return Err(PolicyError::Checkpoint("inconsistent network shapes".into()));
        }
        let params = PolicyParams {
            policy,
            log_std: self.log_std.clone(),
            value,
        };
        let n = params.num_params();
        if self.adam.m.len() != n || self.adam.v.len() != n {
            return Err(PolicyError::Checkpoint(format!(
                "optimizer state has {} entries, parameters {}",
                self.adam.m.len(),
                n
            )));
        }
        Ok(params)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("checkpoint fields are serializable")
    }

    pub fn from_json(text: &str) -> Result<Self, PolicyError> {
        let c: Checkpoint =
            serde_json::from_str(text).map_err(|e| PolicyError::Checkpoint(e.to_string()))?;
        if c.format != CHECKPOINT_FORMAT {
            return Err(PolicyError::Checkpoint(format!("unknown format tag {:?}", c.format)));
        }
        if c.version != CHECKPOINT_VERSION {
            return Err(PolicyError::Checkpoint(format!(
                "unsupported version {} (expected {})",
                c.version, CHECKPOINT_VERSION
            )));
        }
        c.params()?;
        Ok(c)
    }

    /// Writes to a temporary file next to `path` and renames it into place.
    pub fn save(&self, path: &Path) -> Result<(), PolicyError> {
        write_atomic(path, self.to_json().as_bytes())?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self, PolicyError> {
        Self::from_json(&fs::read_to_string(path)?)
    }
}

/// Replaces `path` with `bytes` so readers never see a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let name = path
        .file_name()
        .ok_or_else(|| std::io::Error::new(std::io::ErrorKind::InvalidInput, "path has no file name"))?;
    let tmp = path.with_file_name(format!(".{}.tmp", name.to_string_lossy()));
    {
        let mut f = fs::File::create(&tmp)?;
        f.write_all(bytes)?;
        f.sync_all()?;
    }
    fs::rename(&tmp, path)
}
