//! Seedable analytic control tasks.
//!
//! `pendulum` is the classic torque-limited swing-up, `pointmass` a 2-D
//! double integrator with a capture region, and `noisy_chain` a fixed-length
//! chain where one action arm pays a lower mean reward with Gaussian noise.

mod noisy_chain;
mod pendulum;
mod pointmass;

pub use noisy_chain::{NoisyChain, NoisyChainParams};
pub use pendulum::{Pendulum, PendulumParams};
pub use pointmass::{Pointmass, PointmassParams};

use rand::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EnvError {
    #[error("invalid environment parameters: {0}")]
    InvalidParams(String),
    #[error("action has {got} components, expected {expected}")]
    ActionDim { expected: usize, got: usize },
    #[error("non-finite action")]
    NonFiniteAction,
    #[error("episode is finished; call reset first")]
    EpisodeFinished,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnvSpec {
    pub obs_dim: usize,
    pub action_dim: usize,
    /// Symmetric bound per action dimension: actions lie in `[−b, b]`.
    pub action_bound: Vec<f64>,
    pub horizon: usize,
    pub reward_range: (f64, f64),
}

#[derive(Debug, Clone, PartialEq)]
pub struct StepResult {
    pub obs: Vec<f64>,
    pub reward: f64,
    /// True termination; the critic target does not bootstrap past it.
    pub terminal: bool,
    /// Horizon cut; the critic target bootstraps normally.
    pub truncated: bool,
    /// Whether any action component was clipped to the bound.
    pub action_clipped: bool,
}

impl StepResult {
    pub fn done(&self) -> bool {
        self.terminal || self.truncated
    }
}

pub trait Environment {
    fn spec(&self) -> &EnvSpec;
    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64>;
    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<StepResult, EnvError>;
}

/// Validates dimension and finiteness, then clips to the bounds.
pub(crate) fn clip_action(spec: &EnvSpec, action: &[f64]) -> Result<(Vec<f64>, bool), EnvError> {
    if action.len() != spec.action_dim {
        return Err(EnvError::ActionDim {
            expected: spec.action_dim,
            got: action.len(),
        });
    }
    if action.iter().any(|a| !a.is_finite()) {
        return Err(EnvError::NonFiniteAction);
    }
    let mut clipped = false;
    let out = action
        .iter()
        .zip(&spec.action_bound)
        .map(|(a, b)| {
            let c = a.clamp(-b, *b);
            clipped |= c != *a;
            c
        })
        .collect();
    Ok((out, clipped))
}

/// Environment selection as it appears in run configs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "name", rename_all = "snake_case")]
pub enum EnvConfig {
    Pendulum(PendulumParams),
    Pointmass(PointmassParams),
    NoisyChain(NoisyChainParams),
}

impl Default for EnvConfig {
    fn default() -> Self {
        EnvConfig::Pendulum(PendulumParams::default())
    }
}

impl EnvConfig {
    /// Default parameters for a named environment.
    pub fn by_name(name: &str) -> Result<Self, EnvError> {
        match name {
            "pendulum" => Ok(EnvConfig::Pendulum(Default::default())),
            "pointmass" => Ok(EnvConfig::Pointmass(Default::default())),
            "noisy_chain" => Ok(EnvConfig::NoisyChain(Default::default())),
            other => Err(EnvError::InvalidParams(format!(
                "unknown environment {other:?} (expected pendulum, pointmass or noisy_chain)"
            ))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            EnvConfig::Pendulum(_) => "pendulum",
            EnvConfig::Pointmass(_) => "pointmass",
            EnvConfig::NoisyChain(_) => "noisy_chain",
        }
    }

    pub fn build(&self) -> Result<AnyEnv, EnvError> {
        Ok(match self {
            EnvConfig::Pendulum(p) => AnyEnv::Pendulum(Pendulum::new(p.clone())?),
            EnvConfig::Pointmass(p) => AnyEnv::Pointmass(Pointmass::new(p.clone())?),
            EnvConfig::NoisyChain(p) => AnyEnv::NoisyChain(NoisyChain::new(p.clone())?),
        })
    }
}

/// Any of the built-in environments; cloning snapshots the full state.
#[derive(Debug, Clone, PartialEq)]
pub enum AnyEnv {
    Pendulum(Pendulum),
    Pointmass(Pointmass),
    NoisyChain(NoisyChain),
}

impl Environment for AnyEnv {
    fn spec(&self) -> &EnvSpec {
        match self {
            AnyEnv::Pendulum(e) => e.spec(),
            AnyEnv::Pointmass(e) => e.spec(),
            AnyEnv::NoisyChain(e) => e.spec(),
        }
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        match self {
            AnyEnv::Pendulum(e) => e.reset(rng),
            AnyEnv::Pointmass(e) => e.reset(rng),
            AnyEnv::NoisyChain(e) => e.reset(rng),
        }
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<StepResult, EnvError> {
        match self {
            AnyEnv::Pendulum(e) => e.step(action, rng),
            AnyEnv::Pointmass(e) => e.step(action, rng),
            AnyEnv::NoisyChain(e) => e.step(action, rng),
        }
    }
}
