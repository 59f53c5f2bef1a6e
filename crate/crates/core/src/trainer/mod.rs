//! PPO with a Lagrange multiplier on the episode intrusion cost.

pub mod env;
pub mod gae;
pub mod lagrange;
pub mod ppo;
mod run;

pub use env::{Environment, ToyCmdp};
pub use gae::compute_gae;
pub use lagrange::{lambda_step, LagrangeState};
pub use ppo::{clipped_surrogate, combined_advantage, critic_losses, normalize};
pub use run::{read_log, train, train_crowd, write_log, LogRow, TrainResult};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub discount: f64,
    pub gae_lambda: f64,
    pub clip_eps: f64,
    pub epochs: usize,
    pub minibatch_size: usize,
    /// c1
    pub value_coef: f64,
    /// c2
    pub cost_value_coef: f64,
    pub lr: f64,
    /// Per-network gradient norm limit.
    pub max_grad_norm: f64,
    pub total_steps: usize,
    /// Environment steps collected per iteration, across all environments.
    pub rollout_steps: usize,
    pub n_parallel_envs: usize,
    pub lambda_init: f64,
    pub lr_lambda: f64,
    /// Optimistic correction weight for the multiplier step; 0 is plain
    /// projected gradient descent on the multiplier loss.
    pub lambda_optimism: f64,
    /// Episode cost limit.
    pub cost_limit: f64,
    /// Episodes averaged for the multiplier update.
    pub cost_window: usize,
    /// Keeps lambda at `lambda_init` (unconstrained ablation when 0).
    pub freeze_lambda: bool,
    /// Episodes in the logged success rate.
    pub sr_window: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            discount: 0.99,
            gae_lambda: 0.95,
            clip_eps: 0.08,
            epochs: 4,
            minibatch_size: 32,
            value_coef: 0.5,
            cost_value_coef: 0.5,
            lr: 3e-4,
            max_grad_norm: 0.5,
            total_steps: 2_000_000,
            rollout_steps: 4096,
            n_parallel_envs: 4,
            lambda_init: 0.0,
            lr_lambda: 0.05,
            lambda_optimism: 0.0,
            cost_limit: 0.16,
            cost_window: 20,
            freeze_lambda: false,
            sr_window: 100,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let unit = |v: f64| v > 0.0 && v <= 1.0;
        let checks = [
            (unit(self.discount), "train.discount must be in (0, 1]"),
            (unit(self.gae_lambda), "train.gae_lambda must be in (0, 1]"),
            (self.clip_eps > 0.0, "train.clip_eps must be > 0"),
            (self.epochs >= 1, "train.epochs must be >= 1"),
            (
                self.minibatch_size >= 1,
                "train.minibatch_size must be >= 1",
            ),
            (
                self.value_coef >= 0.0 && self.cost_value_coef >= 0.0,
                "value coefficients must be >= 0",
            ),
            (self.lr > 0.0, "train.lr must be > 0"),
            (self.max_grad_norm > 0.0, "train.max_grad_norm must be > 0"),
            (
                self.n_parallel_envs >= 1,
                "train.n_parallel_envs must be >= 1",
            ),
            (
                self.rollout_steps >= self.n_parallel_envs,
                "train.rollout_steps must be >= n_parallel_envs",
            ),
            (self.lambda_init >= 0.0, "train.lambda_init must be >= 0"),
            (self.lr_lambda >= 0.0, "train.lr_lambda must be >= 0"),
            (
                self.lambda_optimism >= 0.0,
                "train.lambda_optimism must be >= 0",
            ),
            (self.cost_limit >= 0.0, "train.cost_limit must be >= 0"),
            (
                self.cost_window >= 1 && self.sr_window >= 1,
                "episode windows must be >= 1",
            ),
        ];
        match checks.iter().find(|(ok, _)| !ok) {
            Some((_, msg)) => Err(Error::Config((*msg).into())),
            None => Ok(()),
        }
    }
}
