use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{entropy, log_prob, PolicyError, PolicyParams, RolloutBatch};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub n_envs: usize,
    pub n_steps: usize,
    pub minibatch_size: usize,
    pub gamma: f64,
    pub learning_rate: f64,
    pub ent_coef: f64,
    pub clip: f64,
    pub n_epochs: usize,
    pub gae_lambda: f64,
    /// Environment transitions to train for.
    pub total_steps: usize,
    pub vf_coef: f64,
    pub max_grad_norm: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub normalize_advantages: bool,
    pub hidden: Vec<usize>,
    pub seed: u64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            n_envs: 32,
            n_steps: 64,
            minibatch_size: 32,
            gamma: 0.999,
            learning_rate: 2e-4,
            ent_coef: 0.01,
            clip: 0.4,
            n_epochs: 25,
            gae_lambda: 0.99,
            total_steps: 2_000_000,
            vf_coef: 1.0,
            max_grad_norm: 0.5,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            normalize_advantages: true,
            hidden: vec![64, 64],
            seed: 0,
        }
    }
}

impl PpoConfig {
    pub fn batch_size(&self) -> usize {
        self.n_envs * self.n_steps
    }

    /// Updates needed to cover `total_steps` transitions.
    pub fn num_updates(&self) -> usize {
        self.total_steps.div_ceil(self.batch_size())
    }

    pub fn validate(&self) -> Result<(), String> {
        if self.n_envs == 0 || self.n_steps == 0 || self.minibatch_size == 0 {
            return Err("n_envs, n_steps and minibatch_size must be >= 1".into());
        }
        if self.batch_size() % self.minibatch_size != 0 {
            return Err(format!(
                "n_envs * n_steps = {} is not divisible by minibatch_size {}",
                self.batch_size(),
                self.minibatch_size
            ));
        }
        if !(0.0..=1.0).contains(&self.gamma) || !(0.0..=1.0).contains(&self.gae_lambda) {
            return Err("gamma and gae_lambda must be in [0, 1]".into());
        }
        if !(self.learning_rate >= 0.0) || !(self.clip > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err("learning_rate must be >= 0, clip and max_grad_norm > 0".into());
        }
        if !(self.ent_coef >= 0.0) || !(self.vf_coef >= 0.0) {
            return Err("ent_coef and vf_coef must be >= 0".into());
        }
        if !(0.0..1.0).contains(&self.adam_beta1)
            || !(0.0..1.0).contains(&self.adam_beta2)
            || !(self.adam_eps > 0.0)
        {
            return Err("adam betas must be in [0, 1) and eps > 0".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err("hidden layer widths must be >= 1".into());
        }
        Ok(())
    }
}

/// Adam moments over the flat parameter vector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Adam {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub t: u64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Self {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
        }
    }

    /// One bias-corrected Adam step on `params` (flat order) along `grad`.
    pub fn step(&mut self, params: &mut PolicyParams, grad: &[f64], cfg: &PpoConfig) {
        assert_eq!(grad.len(), self.m.len(), "gradient length");
        self.t += 1;
        let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
        let c1 = 1.0 - b1.powi(self.t as i32);
        let c2 = 1.0 - b2.powi(self.t as i32);
        let mut k = 0;
        for seg in params.segments_mut() {
            for p in seg.iter_mut() {
                let g = grad[k];
                self.m[k] = b1 * self.m[k] + (1.0 - b1) * g;
                self.v[k] = b2 * self.v[k] + (1.0 - b2) * g * g;
                let m_hat = self.m[k] / c1;
                let v_hat = self.v[k] / c2;
                *p -= cfg.learning_rate * m_hat / (v_hat.sqrt() + cfg.adam_eps);
                k += 1;
            }
        }
    }
}

/// Scales `grad` so its Euclidean norm is at most `max_norm`; returns the
/// norm before clipping.
pub fn clip_grad_norm(grad: &mut [f64], max_norm: f64) -> f64 {
    let norm = grad.iter().map(|g| g * g).sum::<f64>().sqrt();
    let coef = max_norm / (norm + 1e-6);
    if coef < 1.0 {
        grad.iter_mut().for_each(|g| *g *= coef);
    }
    norm
}

/// Shifts and scales to mean 0 and (population) standard deviation 1.
pub fn normalize_advantages(adv: &[f64]) -> Vec<f64> {
    let n = adv.len() as f64;
    if adv.len() < 2 {
        return adv.to_vec();
    }
    let mean = adv.iter().sum::<f64>() / n;
    let std = (adv.iter().map(|a| (a - mean).powi(2)).sum::<f64>() / n).sqrt();
    adv.iter().map(|a| (a - mean) / (std + 1e-8)).collect()
}

/// Minibatch loss components; `total = policy - ent_coef * entropy + vf_coef * value`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossParts {
    pub policy: f64,
    pub value: f64,
    pub entropy: f64,
    pub total: f64,
    /// Mean of `old_log_prob - log_prob`.
    pub approx_kl: f64,
    /// Fraction of samples whose ratio lies outside the clip band.
    pub clip_fraction: f64,
}

/// PPO loss over the samples `indices` of `batch` and its gradient in flat
/// parameter order. `advantages` is indexed like the batch.
pub fn loss_and_grad(
    params: &PolicyParams,
    batch: &RolloutBatch,
    indices: &[usize],
    advantages: &[f64],
    cfg: &PpoConfig,
) -> (LossParts, Vec<f64>) {
    let np = params.policy.num_params();
    let na = params.log_std.len();
    let mut grad = vec![0.0; params.num_params()];
    let (gp, rest) = grad.split_at_mut(np);
    let (gl, gv) = rest.split_at_mut(na);
    let inv_var: Vec<f64> = params.log_std.iter().map(|l| (-2.0 * l).exp()).collect();
    let b = indices.len() as f64;
    let mut parts = LossParts::default();
    let mut grad_mean = vec![0.0; na];

    for &i in indices {
        let obs = batch.obs(i);
        let x = batch.action(i);
        let a = advantages[i];

        let acts = params.policy.forward_trace(obs);
        let mean = &acts[acts.len() - 1];
        let lp = log_prob(x, mean, &params.log_std);
        let ratio = (lp - batch.log_probs[i]).exp();
        let clipped = ratio.clamp(1.0 - cfg.clip, 1.0 + cfg.clip);
        let (s1, s2) = (ratio * a, clipped * a);
        parts.policy -= s1.min(s2) / b;
        parts.approx_kl += (batch.log_probs[i] - lp) / b;
        if (ratio - 1.0).abs() > cfg.clip {
            parts.clip_fraction += 1.0 / b;
        }
        // d(-min(s1, s2))/d log_prob, zero when the clipped branch is active
        let d_lp = if s1 <= s2 { -a * ratio / b } else { 0.0 };
        if d_lp != 0.0 {
            for j in 0..na {
                let diff = x[j] - mean[j];
                grad_mean[j] = d_lp * diff * inv_var[j];
                gl[j] += d_lp * (diff * diff * inv_var[j] - 1.0);
            }
            params.policy.backward(&acts, &grad_mean, gp);
        }

        let vacts = params.value.forward_trace(obs);
        let v = vacts[vacts.len() - 1][0];
        let err = v - batch.returns[i];
        parts.value += err * err / b;
        params
            .value
            .backward(&vacts, &[cfg.vf_coef * 2.0 * err / b], gv);
    }
    parts.entropy = entropy(&params.log_std);
    gl.iter_mut().for_each(|g| *g -= cfg.ent_coef);
    parts.total = parts.policy - cfg.ent_coef * parts.entropy + cfg.vf_coef * parts.value;
    (parts, grad)
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct UpdateStats {
    /// Loss components averaged over all minibatches.
    pub loss: LossParts,
    /// Pre-clipping gradient norm of the last minibatch.
    pub grad_norm: f64,
    pub minibatches: usize,
}

/// `n_epochs` passes of shuffled minibatches over `batch`, each followed by a
/// clipped-gradient Adam step. `batch.advantages` and `returns` must be set.
pub fn ppo_update<R: Rng + ?Sized>(
    params: &mut PolicyParams,
    adam: &mut Adam,
    batch: &RolloutBatch,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateStats, PolicyError> {
    if batch.advantages.len() != batch.len() || batch.returns.len() != batch.len() {
        return Err(PolicyError::LengthMismatch(
            "advantages and returns must be computed before the update".into(),
        ));
    }
    let advantages = if cfg.normalize_advantages {
        normalize_advantages(&batch.advantages)
    } else {
        batch.advantages.clone()
    };
    let mut order: Vec<usize> = (0..batch.len()).collect();
    let mut stats = UpdateStats::default();
    for epoch in 0..cfg.n_epochs {
        order.shuffle(rng);
        for chunk in order.chunks(cfg.minibatch_size) {
            let (parts, mut grad) = loss_and_grad(params, batch, chunk, &advantages, cfg);
            if !parts.total.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(PolicyError::NonFiniteLoss {
                    update: adam.t as usize,
                    epoch,
                    policy_loss: parts.policy,
                    value_loss: parts.value,
                    entropy: parts.entropy,
                });
            }
            stats.grad_norm = clip_grad_norm(&mut grad, cfg.max_grad_norm);
            adam.step(params, &grad, cfg);
            stats.minibatches += 1;
            let l = &mut stats.loss;
            l.policy += parts.policy;
            l.value += parts.value;
            l.entropy += parts.entropy;
            l.total += parts.total;
            l.approx_kl += parts.approx_kl;
            l.clip_fraction += parts.clip_fraction;
        }
    }
    if stats.minibatches > 0 {
        let k = stats.minibatches as f64;
        let l = &mut stats.loss;
        l.policy /= k;
        l.value /= k;
        l.entropy /= k;
        l.total /= k;
        l.approx_kl /= k;
        l.clip_fraction /= k;
    }
    Ok(stats)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_are_valid() {
        let c = PpoConfig::default();
        c.validate().unwrap();
        assert_eq!(c.batch_size(), 2048);
        let bad = PpoConfig {
            minibatch_size: 30,
            ..Default::default()
        };
        assert!(bad.validate().is_err());
    }

    #[test]
    fn clipping_caps_the_norm() {
        let mut g = vec![3.0, 4.0];
        assert_eq!(clip_grad_norm(&mut g, 0.5), 5.0);
        let n = (g[0] * g[0] + g[1] * g[1]).sqrt();
        assert!((n - 0.5).abs() < 1e-6);
        let mut small = vec![0.1, 0.0];
        clip_grad_norm(&mut small, 0.5);
        assert_eq!(small, vec![0.1, 0.0]);
    }

    #[test]
    fn normalized_advantages_are_standard() {
        let a = normalize_advantages(&[1.0, 2.0, 3.0, 6.0]);
        let mean: f64 = a.iter().sum::<f64>() / 4.0;
        let var: f64 = a.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / 4.0;
        assert!(mean.abs() < 1e-12 && (var - 1.0).abs() < 1e-7);
    }
}
