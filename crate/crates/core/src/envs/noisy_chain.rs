use super::{clip_action, EnvError, EnvSpec, Environment, StepResult};
use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

/// Reward noise is clipped at this many standard deviations so rewards stay
/// bounded.
pub const NOISE_CLIP: f64 = 5.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NoisyChainParams {
    /// Number of steps until the chain terminates.
    pub length: usize,
    pub safe_mean: f64,
    pub noisy_mean: f64,
    pub noise_std: f64,
}

impl Default for NoisyChainParams {
    fn default() -> Self {
        Self {
            length: 10,
            safe_mean: 0.1,
            noisy_mean: -0.1,
            noise_std: 1.0,
        }
    }
}

/// Fixed-length chain with a 1-D action in `[−1, 1]`. Actions `a < 0` pull
/// the safe arm (deterministic reward `safe_mean`), actions `a ≥ 0` the noisy
/// arm (`noisy_mean` plus clipped Gaussian noise). The observation is the
/// elapsed fraction `t / length`; the episode terminates after `length`
/// steps.
#[derive(Debug, Clone, PartialEq)]
pub struct NoisyChain {
    params: NoisyChainParams,
    spec: EnvSpec,
    t: usize,
    done: bool,
}

impl NoisyChain {
    pub fn new(params: NoisyChainParams) -> Result<Self, EnvError> {
        if params.length == 0 {
            return Err(EnvError::InvalidParams("chain length must be >= 1".into()));
        }
        if !(params.noise_std.is_finite() && params.noise_std >= 0.0) {
            return Err(EnvError::InvalidParams(format!(
                "noise_std must be >= 0, got {}",
                params.noise_std
            )));
        }
        if !(params.safe_mean.is_finite() && params.noisy_mean.is_finite()) {
            return Err(EnvError::InvalidParams("arm means must be finite".into()));
        }
        if params.noisy_mean >= params.safe_mean {
            return Err(EnvError::InvalidParams(
                "the noisy arm must have a strictly lower mean than the safe arm".into(),
            ));
        }
        let spread = NOISE_CLIP * params.noise_std;
        let spec = EnvSpec {
            obs_dim: 1,
            action_dim: 1,
            action_bound: vec![1.0],
            horizon: params.length,
            reward_range: (
                params.noisy_mean - spread,
                params.safe_mean.max(params.noisy_mean + spread),
            ),
        };
        Ok(Self {
            params,
            spec,
            t: 0,
            done: true,
        })
    }

    pub fn params(&self) -> &NoisyChainParams {
        &self.params
    }

    /// Expected reward of the arm selected by `action`.
    pub fn arm_mean(&self, action: f64) -> f64 {
        if action < 0.0 {
            self.params.safe_mean
        } else {
            self.params.noisy_mean
        }
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.t as f64 / self.params.length as f64]
    }
}

impl Environment for NoisyChain {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, _rng: &mut dyn RngCore) -> Vec<f64> {
        self.t = 0;
        self.done = false;
        self.obs()
    }

    fn step(&mut self, action: &[f64], rng: &mut dyn RngCore) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let (a, action_clipped) = clip_action(&self.spec, action)?;
        let reward = if a[0] < 0.0 {
            self.params.safe_mean
        } else {
            let xi: f64 = StandardNormal.sample(rng);
            self.params.noisy_mean + self.params.noise_std * xi.clamp(-NOISE_CLIP, NOISE_CLIP)
        };
        self.t += 1;
        let terminal = self.t >= self.params.length;
        self.done = terminal;
        Ok(StepResult {
            obs: self.obs(),
            reward,
            terminal,
            truncated: false,
            action_clipped,
        })
    }
}
