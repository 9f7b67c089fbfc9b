use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{Mlp, PolicyError};

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PolicyDims {
    pub obs: usize,
    pub act: usize,
    /// Hidden layer widths shared by the policy and value networks.
    pub hidden: Vec<usize>,
}

impl PolicyDims {
    pub fn new(obs: usize, act: usize) -> Self {
        Self {
            obs,
            act,
            hidden: vec![64, 64],
        }
    }

    fn layers(&self, out: usize) -> Vec<usize> {
        let mut s = vec![self.obs];
        s.extend(&self.hidden);
        s.push(out);
        s
    }
}

/// Policy network, state-independent log standard deviations and value
/// network. The flat parameter order is policy, `log_std`, value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PolicyParams {
    pub policy: Mlp,
    pub log_std: Vec<f64>,
    pub value: Mlp,
}

impl PolicyParams {
    /// All-zero networks with unit standard deviation.
    pub fn zeros(dims: &PolicyDims) -> Self {
        Self {
            policy: Mlp::zeros(&dims.layers(dims.act)),
            log_std: vec![0.0; dims.act],
            value: Mlp::zeros(&dims.layers(1)),
        }
    }

    pub fn dims(&self) -> PolicyDims {
        let s = self.policy.sizes();
        PolicyDims {
            obs: s[0],
            act: s[s.len() - 1],
            hidden: s[1..s.len() - 1].to_vec(),
        }
    }

    pub fn num_params(&self) -> usize {
        self.policy.num_params() + self.log_std.len() + self.value.num_params()
    }

    pub fn flat(&self) -> Vec<f64> {
        let mut v = Vec::with_capacity(self.num_params());
        v.extend_from_slice(self.policy.params());
        v.extend_from_slice(&self.log_std);
        v.extend_from_slice(self.value.params());
        v
    }

    pub fn set_flat(&mut self, flat: &[f64]) {
        assert_eq!(flat.len(), self.num_params(), "flat parameter length");
        let (p, rest) = flat.split_at(self.policy.num_params());
        let (l, v) = rest.split_at(self.log_std.len());
        self.policy.params_mut().copy_from_slice(p);
        self.log_std.copy_from_slice(l);
        self.value.params_mut().copy_from_slice(v);
    }

    /// Mutable views in flat order.
    pub fn segments_mut(&mut self) -> [&mut [f64]; 3] {
        [
            self.policy.params_mut(),
            &mut self.log_std,
            self.value.params_mut(),
        ]
    }

    pub fn std(&self) -> Vec<f64> {
        self.log_std.iter().map(|l| l.exp()).collect()
    }
}

/// Orthogonal hidden weights, policy head gain 0.01, value head gain 1,
/// zero biases, `log_std = 0`.
pub fn init_params<R: Rng + ?Sized>(dims: &PolicyDims, rng: &mut R) -> PolicyParams {
    PolicyParams {
        policy: Mlp::init(&dims.layers(dims.act), 0.01, rng),
        log_std: vec![0.0; dims.act],
        value: Mlp::init(&dims.layers(1), 1.0, rng),
    }
}

fn check_obs(params: &PolicyParams, obs: &[f64]) -> Result<(), PolicyError> {
    let expected = params.policy.input_len();
    if obs.len() != expected {
        return Err(PolicyError::ShapeMismatch {
            expected,
            got: obs.len(),
        });
    }
    Ok(())
}

/// Action mean and standard deviation for one observation.
pub fn forward_policy(params: &PolicyParams, obs: &[f64]) -> Result<(Vec<f64>, Vec<f64>), PolicyError> {
    check_obs(params, obs)?;
    Ok((params.policy.forward(obs), params.std()))
}

pub fn forward_value(params: &PolicyParams, obs: &[f64]) -> Result<f64, PolicyError> {
    check_obs(params, obs)?;
    Ok(params.value.forward(obs)[0])
}
