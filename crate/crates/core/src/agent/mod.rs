//! Off-policy maximum-entropy actor-critic with a Gaussian return critic
//! trained on the energy distance, plus a scalar-critic SAC baseline.

mod actor;
mod buffer;
mod critic;
mod probe;
mod train;

pub use actor::{actor_loss_and_grads, actor_loss_with_noise, actor_sample, ActorDraw, ActorNet};
pub use buffer::{Batch, ReplayBuffer, TransitionRecord};
pub use critic::{
    critic_loss_and_grads, critic_targets, CriticKind, CriticNet, CriticOutput, LossAndGrad,
};
pub use probe::{overestimation_probe, ProbeSettings};
pub use train::{evaluate, Checkpoint, LogRecord, RunLog, Trainer};

use crate::envs::EnvError;
use crate::gauss::DistError;
use crate::nn::NnError;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum AgentError {
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Env(#[from] EnvError),
    #[error(transparent)]
    Dist(#[from] DistError),
    #[error("insufficient data: have {have}, need {need}")]
    InsufficientData { have: usize, need: usize },
    #[error("non-finite {which} loss at step {step}: {detail}")]
    NonFiniteLoss {
        step: u64,
        which: &'static str,
        detail: String,
    },
    #[error("invalid agent config: {0}")]
    InvalidConfig(String),
    #[error("checkpoint error: {0}")]
    Checkpoint(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Algo {
    #[default]
    Cdsac,
    Sac,
}

impl Algo {
    pub fn name(self) -> &'static str {
        match self {
            Algo::Cdsac => "cdsac",
            Algo::Sac => "sac",
        }
    }
}

impl std::str::FromStr for Algo {
    type Err = AgentError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "cdsac" => Ok(Algo::Cdsac),
            "sac" => Ok(Algo::Sac),
            other => Err(AgentError::InvalidConfig(format!(
                "unknown algo {other:?} (expected cdsac or sac)"
            ))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub algo: Algo,
    pub gamma: f64,
    /// Entropy temperature, fixed for the whole run.
    pub alpha: f64,
    pub tau: f64,
    pub batch_size: usize,
    pub lr: f64,
    pub grad_steps_per_env_step: usize,
    pub target_update_interval: usize,
    pub eval_interval: u64,
    pub eval_episodes: usize,
    /// Environment steps per averaged training log record.
    pub log_interval: u64,
    pub total_steps: u64,
    pub seed: u64,
    /// Uniformly random actions before the policy takes over.
    pub initial_random_steps: u64,
    pub buffer_capacity: usize,
    pub actor_hidden: Vec<usize>,
    pub critic_hidden: Vec<usize>,
    pub sac_critic_hidden: Vec<usize>,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub log_std_min: f64,
    pub log_std_max: f64,
    pub twin_critic: bool,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algo: Algo::Cdsac,
            gamma: 0.99,
            alpha: 0.2,
            tau: 0.005,
            batch_size: 256,
            lr: 3e-4,
            grad_steps_per_env_step: 1,
            target_update_interval: 1,
            eval_interval: 1000,
            eval_episodes: 10,
            log_interval: 1000,
            total_steps: 200_000,
            seed: 0,
            initial_random_steps: 1000,
            buffer_capacity: 1_000_000,
            actor_hidden: vec![256, 256],
            critic_hidden: vec![256, 255],
            sac_critic_hidden: vec![256, 256],
            sigma_min: 0.01,
            sigma_max: 1000.0,
            log_std_min: -20.0,
            log_std_max: 2.0,
            twin_critic: false,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<(), AgentError> {
        let bad = |msg: String| Err(AgentError::InvalidConfig(msg));
        if !(self.gamma.is_finite() && (0.0..1.0).contains(&self.gamma)) {
            return bad(format!("gamma must be in [0, 1), got {}", self.gamma));
        }
        if !(self.alpha.is_finite() && self.alpha >= 0.0) {
            return bad(format!("alpha must be >= 0, got {}", self.alpha));
        }
        if !(self.tau.is_finite() && self.tau > 0.0 && self.tau <= 1.0) {
            return bad(format!("tau must be in (0, 1], got {}", self.tau));
        }
        if !(self.lr.is_finite() && self.lr > 0.0) {
            return bad(format!("lr must be > 0, got {}", self.lr));
        }
        for (name, v) in [
            ("batch_size", self.batch_size),
            ("grad_steps_per_env_step", self.grad_steps_per_env_step),
            ("target_update_interval", self.target_update_interval),
            ("eval_episodes", self.eval_episodes),
            ("buffer_capacity", self.buffer_capacity),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if self.eval_interval == 0 || self.log_interval == 0 {
            return bad("eval_interval and log_interval must be >= 1".into());
        }
        if self.batch_size > self.buffer_capacity {
            return bad("batch_size cannot exceed buffer_capacity".into());
        }
        for (name, h) in [
            ("actor_hidden", &self.actor_hidden),
            ("critic_hidden", &self.critic_hidden),
            ("sac_critic_hidden", &self.sac_critic_hidden),
        ] {
            if h.is_empty() || h.contains(&0) {
                return bad(format!("{name} needs at least one layer, all widths >= 1"));
            }
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite())
        {
            return bad(format!(
                "need 0 < sigma_min < sigma_max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            ));
        }
        if !(self.log_std_min < self.log_std_max
            && self.log_std_min.is_finite()
            && self.log_std_max.is_finite())
        {
            return bad("need log_std_min < log_std_max".into());
        }
        Ok(())
    }

    pub fn critic_hidden_for_algo(&self) -> &[usize] {
        match self.algo {
            Algo::Cdsac => &self.critic_hidden,
            Algo::Sac => &self.sac_critic_hidden,
        }
    }
}
