use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{
    collect_rollouts, init_params, ppo_update, Adam, Checkpoint, EpisodeRecord, PolicyDims,
    PolicyError, PolicyParams, PpoConfig, UpdateStats, VecEnv,
};
use crate::cost::CostWeights;
use crate::env::{derive_seed, EpisodeConfig};
use crate::safety::SafetyConfig;

/// Median of each trailing window of up to `window` values.
pub fn rolling_median(xs: &[f64], window: usize) -> Vec<f64> {
    assert!(window > 0, "window must be positive");
    let mut buf: Vec<f64> = Vec::with_capacity(window);
    (0..xs.len())
        .map(|i| {
            let lo = (i + 1).saturating_sub(window);
            buf.clear();
            buf.extend_from_slice(&xs[lo..=i]);
            buf.sort_by(f64::total_cmp);
            let k = buf.len();
            if k % 2 == 1 {
                buf[k / 2]
            } else {
                0.5 * (buf[k / 2 - 1] + buf[k / 2])
            }
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct RewardHistory {
    pub episodes: Vec<EpisodeRecord>,
}

impl RewardHistory {
    pub fn rewards(&self) -> Vec<f64> {
        self.episodes.iter().map(|e| e.reward).collect()
    }

    pub fn rolling_median(&self, window: usize) -> Vec<f64> {
        rolling_median(&self.rewards(), window)
    }
}

/// PPO training state: parameters, optimizer, environments and counters.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub ppo: PpoConfig,
    pub episode: EpisodeConfig,
    pub weights: CostWeights,
    pub safety: SafetyConfig,
    pub params: PolicyParams,
    pub adam: Adam,
    pub history: RewardHistory,
    /// Environment transitions collected so far.
    pub steps: usize,
    pub updates: usize,
    venv: VecEnv,
    rng: ChaCha8Rng,
}

impl Trainer {
    pub fn new(
        ppo: PpoConfig,
        episode: EpisodeConfig,
        weights: CostWeights,
        safety: SafetyConfig,
    ) -> Result<Self, PolicyError> {
        ppo.validate().map_err(PolicyError::InvalidConfig)?;
        let dims = PolicyDims {
            obs: episode.observation_len(),
            act: episode.action_len(),
            hidden: ppo.hidden.clone(),
        };
        let mut rng = ChaCha8Rng::seed_from_u64(ppo.seed);
        let params = init_params(&dims, &mut rng);
        let adam = Adam::new(params.num_params());
        Self::assemble(ppo, episode, weights, safety, params, adam, 0, 0, rng)
    }

    /// Continues from a checkpoint. Parameters, optimizer moments and
    /// counters are restored; environments and the sampling stream restart
    /// from seeds derived from the step counter.
    pub fn resume(ckpt: Checkpoint, total_steps: Option<usize>) -> Result<Self, PolicyError> {
        let mut ppo = ckpt.ppo.clone();
        if let Some(t) = total_steps {
            ppo.total_steps = t;
        }
        let params = ckpt.params()?;
        let rng = ChaCha8Rng::seed_from_u64(derive_seed(ppo.seed, ckpt.steps as u64));
        Self::assemble(
            ppo,
            ckpt.episode.clone(),
            ckpt.weights,
            ckpt.safety.clone(),
            params,
            ckpt.adam.clone(),
            ckpt.steps,
            ckpt.updates,
            rng,
        )
    }

    #[allow(clippy::too_many_arguments)]
    fn assemble(
        ppo: PpoConfig,
        episode: EpisodeConfig,
        weights: CostWeights,
        safety: SafetyConfig,
        params: PolicyParams,
        adam: Adam,
        steps: usize,
        updates: usize,
        mut rng: ChaCha8Rng,
    ) -> Result<Self, PolicyError> {
        use rand::RngCore;
        episode.validate().map_err(PolicyError::InvalidConfig)?;
        if params.policy.input_len() != episode.observation_len()
            || params.policy.output_len() != episode.action_len()
        {
            return Err(PolicyError::ShapeMismatch {
                expected: episode.observation_len(),
                got: params.policy.input_len(),
            });
        }
        let venv = VecEnv::new(&episode, &weights, &safety, ppo.n_envs, rng.next_u64())?;
        Ok(Self {
            ppo,
            episode,
            weights,
            safety,
            params,
            adam,
            history: RewardHistory::default(),
            steps,
            updates,
            venv,
            rng,
        })
    }

    pub fn done(&self) -> bool {
        self.updates >= self.ppo.num_updates()
    }

    /// One collect / advantage / update cycle.
    pub fn update(&mut self) -> Result<UpdateStats, PolicyError> {
        let mut batch = collect_rollouts(
            &self.params,
            &mut self.venv,
            self.ppo.n_steps,
            &mut self.rng,
            &mut self.history.episodes,
        )?;
        batch.compute_advantages(self.ppo.gamma, self.ppo.gae_lambda)?;
        let stats = ppo_update(&mut self.params, &mut self.adam, &batch, &self.ppo, &mut self.rng)
            .map_err(|e| match e {
                PolicyError::NonFiniteLoss {
                    epoch,
                    policy_loss,
                    value_loss,
                    entropy,
                    ..
                } => PolicyError::NonFiniteLoss {
                    update: self.updates,
                    epoch,
                    policy_loss,
                    value_loss,
                    entropy,
                },
                other => other,
            })?;
        self.steps += batch.len();
        self.updates += 1;
        Ok(stats)
    }

    /// Runs updates until `total_steps` is covered, calling `progress` after
    /// each one.
    pub fn run<F: FnMut(&Trainer, &UpdateStats)>(&mut self, mut progress: F) -> Result<(), PolicyError> {
        while !self.done() {
            let stats = self.update()?;
            progress(self, &stats);
        }
        Ok(())
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::new(self)
    }
}

/// Trains from scratch and returns the final parameters and the per-episode
/// reward history.
pub fn train(
    ppo: &PpoConfig,
    episode: &EpisodeConfig,
    weights: &CostWeights,
    safety: &SafetyConfig,
) -> Result<(PolicyParams, RewardHistory), PolicyError> {
    let mut trainer = Trainer::new(ppo.clone(), episode.clone(), *weights, safety.clone())?;
    trainer.run(|_, _| {})?;
    Ok((trainer.params, trainer.history))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rolling_median_windows() {
        let xs = [5.0, 1.0, 3.0, 2.0, 4.0];
        assert_eq!(rolling_median(&xs, 3), vec![5.0, 3.0, 3.0, 2.0, 3.0]);
        assert_eq!(rolling_median(&xs, 1), xs.to_vec());
    }
}
