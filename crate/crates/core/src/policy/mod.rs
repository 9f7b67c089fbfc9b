//! Gaussian MLP policy trained with PPO.
//!
//! The policy network maps an observation to the mean of a diagonal Gaussian
//! over raw actions; the log standard deviation is a free, state-independent
//! vector. A separate value network with no shared parameters estimates
//! returns. Gradients are computed by hand-written backpropagation.

mod checkpoint;
mod gae;
mod gaussian;
mod mlp;
mod model;
mod planner;
mod ppo;
mod rollout;
mod train;

pub use checkpoint::{write_atomic, Checkpoint, CHECKPOINT_FORMAT, CHECKPOINT_VERSION};
pub use gae::compute_gae;
pub use gaussian::{entropy, log_prob, sample_action, LN_2PI};
pub use mlp::Mlp;
pub use model::{forward_policy, forward_value, init_params, PolicyDims, PolicyParams};
pub use planner::{deterministic_action, plan_rl, RlPlanner};
pub use ppo::{clip_grad_norm, loss_and_grad, normalize_advantages, ppo_update, Adam, LossParts, PpoConfig, UpdateStats};
pub use rollout::{collect_rollouts, EpisodeRecord, RolloutBatch, VecEnv};
pub use train::{rolling_median, train, RewardHistory, Trainer};

use thiserror::Error;

use crate::env::EnvError;

#[derive(Debug, Error)]
pub enum PolicyError {
    #[error("input has length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("sequence lengths differ: {0}")]
    LengthMismatch(String),
    #[error("non-finite loss at update {update}, epoch {epoch}: policy {policy_loss}, value {value_loss}, entropy {entropy}")]
    NonFiniteLoss {
        update: usize,
        epoch: usize,
        policy_loss: f64,
        value_loss: f64,
        entropy: f64,
    },
    #[error("invalid training config: {0}")]
    InvalidConfig(String),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error("checkpoint: {0}")]
    Checkpoint(String),
    #[error(transparent)]
    Io(#[from] std::io::Error),
}
