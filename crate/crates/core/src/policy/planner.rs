use super::PolicyParams;
use crate::env::{decode_action, EpisodeConfig, Scene};
use crate::safety::{self, SafetyConfig, SafetyError};
use crate::search::Planner;
use crate::trajectory::Trajectory;

/// The policy mean for `scene`, clamped to `[-1, 1]`.
pub fn deterministic_action(params: &PolicyParams, scene: &Scene, config: &EpisodeConfig) -> Vec<f64> {
    let obs = scene.encode(f64::from(config.v_max));
    params
        .policy
        .forward(&obs)
        .into_iter()
        .map(|m| m.clamp(-1.0, 1.0))
        .collect()
}

/// Decodes the deterministic action and passes it through the safety
/// projection.
pub fn plan_rl(
    params: &PolicyParams,
    scene: &Scene,
    config: &EpisodeConfig,
    safety: &SafetyConfig,
) -> Result<Trajectory, SafetyError> {
    let raw = deterministic_action(params, scene, config);
    let proposed = decode_action(&raw, scene.n0, scene.v0, config);
    safety::constrain(&proposed, scene, config, safety)
}

/// Queries the policy for a trajectory. With `safety` set, the proposal is
/// also passed through the safety projection.
#[derive(Debug, Clone)]
pub struct RlPlanner {
    pub params: PolicyParams,
    pub config: EpisodeConfig,
    pub safety: Option<SafetyConfig>,
}

impl Planner for RlPlanner {
    fn name(&self) -> &str {
        "rl"
    }

    fn plan(&mut self, scene: &Scene) -> Result<Trajectory, SafetyError> {
        match &self.safety {
            Some(safety) => plan_rl(&self.params, scene, &self.config, safety),
            None => {
                let raw = deterministic_action(&self.params, scene, &self.config);
                Ok(decode_action(&raw, scene.n0, scene.v0, &self.config))
            }
        }
    }
}
