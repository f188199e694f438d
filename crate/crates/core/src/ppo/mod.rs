//! Two actors with a shared critic trained by clipped-surrogate PPO.

mod adam;
mod buffer;
mod dist;
mod gae;
mod net;
mod update;

pub use adam::Adam;
pub use buffer::{ActorRollout, RolloutBuffer};
pub use dist::{entropy, gaussian_log_prob, sample_action, ActionSample};
pub use gae::compute_gae;
pub use net::{Activation, ForwardCache, PolicyNet, Squash};
pub use update::{
    actor_loss_grad, normalize_advantages, ppo_update, Learner, LossStats, UpdateStats,
};

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PpoError {
    #[error("input dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("invalid network shape: {0}")]
    Shape(String),
    #[error("invalid PPO configuration: {0}")]
    InvalidConfig(String),
    #[error("update diverged (epoch {epoch}, minibatch {minibatch}): {detail}")]
    UpdateDiverged {
        epoch: usize,
        minibatch: usize,
        detail: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PpoConfig {
    pub learning_rate: f64,
    pub clip_range: f64,
    pub rollout_steps: usize,
    pub minibatch_size: usize,
    pub epochs: usize,
    pub gamma: f64,
    pub gae_lambda: f64,
    pub target_kl: f64,
    pub max_grad_norm: f64,
    pub entropy_coef: f64,
    pub n_envs: usize,
    pub seed: u64,
}

impl PpoConfig {
    /// Per-stage defaults: lr 5e-5 in stage 1 and 3e-5 afterwards, entropy 0.003 in
    /// stages 3 and 4.
    pub fn for_stage(stage: u8) -> Self {
        Self {
            learning_rate: if stage <= 1 { 5e-5 } else { 3e-5 },
            entropy_coef: if stage >= 3 { 0.003 } else { 0.001 },
            ..Self::default()
        }
    }

    pub fn batch_size(&self) -> usize {
        self.rollout_steps * self.n_envs
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        let bad = |m: &str| Err(PpoError::InvalidConfig(m.into()));
        let positive = [
            ("learning_rate", self.learning_rate),
            ("clip_range", self.clip_range),
            ("gamma", self.gamma),
            ("gae_lambda", self.gae_lambda),
            ("target_kl", self.target_kl),
            ("max_grad_norm", self.max_grad_norm),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(PpoError::InvalidConfig(format!("{name} must be positive")));
            }
        }
        if self.gamma > 1.0 || self.gae_lambda > 1.0 {
            return bad("gamma and gae_lambda must be <= 1");
        }
        if !(self.entropy_coef >= 0.0) {
            return bad("entropy_coef must be >= 0");
        }
        if self.rollout_steps == 0 || self.minibatch_size == 0 || self.epochs == 0 || self.n_envs == 0 {
            return bad("rollout_steps, minibatch_size, epochs and n_envs must be positive");
        }
        if self.minibatch_size > self.batch_size() {
            return bad("minibatch_size exceeds rollout_steps * n_envs");
        }
        Ok(())
    }
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            learning_rate: 5e-5,
            clip_range: 0.15,
            rollout_steps: 2048,
            minibatch_size: 16384,
            epochs: 20,
            gamma: 0.99,
            gae_lambda: 0.95,
            target_kl: 0.01,
            max_grad_norm: 0.5,
            entropy_coef: 0.001,
            n_envs: 32,
            seed: 0,
        }
    }
}

/// Which actors learn and whether the exoskeleton acts on the plant.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct TrainMask {
    pub human_learns: bool,
    pub exo_learns: bool,
    pub exo_acts: bool,
}

impl TrainMask {
    /// Stages 1 and 2.
    pub const HUMAN_ONLY: Self = Self {
        human_learns: true,
        exo_learns: false,
        exo_acts: false,
    };
    /// Stage 3.
    pub const EXO_ONLY: Self = Self {
        human_learns: false,
        exo_learns: true,
        exo_acts: true,
    };
    /// Stage 4.
    pub const JOINT: Self = Self {
        human_learns: true,
        exo_learns: true,
        exo_acts: true,
    };

    pub fn any_learns(&self) -> bool {
        self.human_learns || self.exo_learns
    }

    pub fn validate(&self) -> Result<(), PpoError> {
        if !self.any_learns() {
            return Err(PpoError::InvalidConfig("no actor learns".into()));
        }
        if self.exo_learns && !self.exo_acts {
            return Err(PpoError::InvalidConfig("exo cannot learn without acting".into()));
        }
        Ok(())
    }
}
