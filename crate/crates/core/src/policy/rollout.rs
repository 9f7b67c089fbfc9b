use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{compute_gae, sample_action, PolicyError, PolicyParams};
use crate::cost::CostWeights;
use crate::env::{derive_seed, DrivingEnv, EpisodeConfig, TerminalKind};
use crate::safety::SafetyConfig;

/// Transitions from `n_envs` environments over `n_steps` synchronized steps.
///
/// Per-transition arrays are env-major: transition `t` of environment `e`
/// sits at index `e * n_steps + t`.
#[derive(Debug, Clone, PartialEq)]
pub struct RolloutBatch {
    pub n_envs: usize,
    pub n_steps: usize,
    pub obs_dim: usize,
    pub act_dim: usize,
    pub observations: Vec<f64>,
    /// Unclamped sampled actions.
    pub actions: Vec<f64>,
    pub rewards: Vec<f64>,
    pub dones: Vec<bool>,
    pub values: Vec<f64>,
    pub log_probs: Vec<f64>,
    /// Value of each environment's state after its last transition.
    pub last_values: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl RolloutBatch {
    pub fn len(&self) -> usize {
        self.rewards.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rewards.is_empty()
    }

    pub fn index(&self, env: usize, t: usize) -> usize {
        env * self.n_steps + t
    }

    pub fn obs(&self, i: usize) -> &[f64] {
        &self.observations[i * self.obs_dim..(i + 1) * self.obs_dim]
    }

    pub fn action(&self, i: usize) -> &[f64] {
        &self.actions[i * self.act_dim..(i + 1) * self.act_dim]
    }

    /// Fills `advantages` and `returns` by GAE, environment by environment.
    pub fn compute_advantages(&mut self, gamma: f64, lambda: f64) -> Result<(), PolicyError> {
        self.advantages = vec![0.0; self.len()];
        self.returns = vec![0.0; self.len()];
        for e in 0..self.n_envs {
            let span = self.index(e, 0)..self.index(e, 0) + self.n_steps;
            let mut values = self.values[span.clone()].to_vec();
            values.push(self.last_values[e]);
            let (adv, ret) = compute_gae(
                &self.rewards[span.clone()],
                &values,
                &self.dones[span.clone()],
                gamma,
                lambda,
            )?;
            self.advantages[span.clone()].copy_from_slice(&adv);
            self.returns[span].copy_from_slice(&ret);
        }
        Ok(())
    }
}

/// A finished training episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    /// Sum of step rewards.
    pub reward: f64,
    pub steps: usize,
    pub terminal: TerminalKind,
}

/// Environments stepped in lockstep, each reset automatically when done.
#[derive(Debug, Clone)]
pub struct VecEnv {
    envs: Vec<DrivingEnv>,
    obs: Vec<Vec<f64>>,
    returns: Vec<f64>,
    lengths: Vec<usize>,
}

impl VecEnv {
    /// `n` environments whose seeds are derived from `seed`.
    pub fn new(
        config: &EpisodeConfig,
        weights: &CostWeights,
        safety: &SafetyConfig,
        n: usize,
        seed: u64,
    ) -> Result<Self, PolicyError> {
        let envs = (0..n)
            .map(|i| {
                let c = EpisodeConfig {
                    rng_seed: derive_seed(seed, i as u64),
                    ..config.clone()
                };
                DrivingEnv::new(c, *weights, safety.clone())
            })
            .collect::<Result<Vec<_>, _>>()?;
        let obs = envs.iter().map(DrivingEnv::observation).collect();
        Ok(Self {
            envs,
            obs,
            returns: vec![0.0; n],
            lengths: vec![0; n],
        })
    }

    pub fn len(&self) -> usize {
        self.envs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.envs.is_empty()
    }

    pub fn envs(&self) -> &[DrivingEnv] {
        &self.envs
    }

    pub fn observations(&self) -> &[Vec<f64>] {
        &self.obs
    }
}

/// Runs `n_steps` policy samples in every environment.
///
/// Actions are drawn environment by environment within each step from
/// `rng`. Finished episodes are appended to `finished`.
pub fn collect_rollouts<R: Rng + ?Sized>(
    params: &PolicyParams,
    venv: &mut VecEnv,
    n_steps: usize,
    rng: &mut R,
    finished: &mut Vec<EpisodeRecord>,
) -> Result<RolloutBatch, PolicyError> {
    let n_envs = venv.len();
    let obs_dim = params.policy.input_len();
    let act_dim = params.policy.output_len();
    let total = n_envs * n_steps;
    let mut batch = RolloutBatch {
        n_envs,
        n_steps,
        obs_dim,
        act_dim,
        observations: vec![0.0; total * obs_dim],
        actions: vec![0.0; total * act_dim],
        rewards: vec![0.0; total],
        dones: vec![false; total],
        values: vec![0.0; total],
        log_probs: vec![0.0; total],
        last_values: vec![0.0; n_envs],
        advantages: Vec::new(),
        returns: Vec::new(),
    };
    let std = params.std();
    for t in 0..n_steps {
        for e in 0..n_envs {
            let i = e * n_steps + t;
            let obs = &venv.obs[e];
            if obs.len() != obs_dim {
                return Err(PolicyError::ShapeMismatch {
                    expected: obs_dim,
                    got: obs.len(),
                });
            }
            let mean = params.policy.forward(obs);
            let (action, lp) = sample_action(&mean, &std, rng);
            batch.values[i] = params.value.forward(obs)[0];
            batch.observations[i * obs_dim..(i + 1) * obs_dim].copy_from_slice(obs);
            batch.actions[i * act_dim..(i + 1) * act_dim].copy_from_slice(&action);
            batch.log_probs[i] = lp;

            let out = venv.envs[e].step(&action)?;
            batch.rewards[i] = out.reward;
            batch.dones[i] = out.done;
            venv.returns[e] += out.reward;
            venv.lengths[e] += 1;
            if out.done {
                finished.push(EpisodeRecord {
                    reward: venv.returns[e],
                    steps: venv.lengths[e],
                    terminal: out.info.terminal,
                });
                venv.returns[e] = 0.0;
                venv.lengths[e] = 0;
                venv.obs[e] = venv.envs[e].reset();
            } else {
                venv.obs[e] = out.observation;
            }
        }
    }
    for e in 0..n_envs {
        batch.last_values[e] = params.value.forward(&venv.obs[e])[0];
    }
    Ok(batch)
}
