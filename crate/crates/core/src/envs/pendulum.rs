use super::{clip_action, EnvError, EnvSpec, Environment, StepResult};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

const MAX_SPEED: f64 = 8.0;
const MAX_TORQUE: f64 = 2.0;
const DT: f64 = 0.05;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PendulumParams {
    pub gravity: f64,
    pub mass: f64,
    pub length: f64,
    pub horizon: usize,
}

impl Default for PendulumParams {
    fn default() -> Self {
        Self {
            gravity: 10.0,
            mass: 1.0,
            length: 1.0,
            horizon: 200,
        }
    }
}

/// Torque-limited swing-up. θ = 0 is upright; obs is `(cos θ, sin θ, θ̇)`
/// and the reward is `−(θ² + 0.1 θ̇² + 0.001 u²)` with θ wrapped to
/// `[−π, π)`.
#[derive(Debug, Clone, PartialEq)]
pub struct Pendulum {
    params: PendulumParams,
    spec: EnvSpec,
    theta: f64,
    theta_dot: f64,
    t: usize,
    done: bool,
}

fn angle_normalize(x: f64) -> f64 {
    (x + PI).rem_euclid(2.0 * PI) - PI
}

impl Pendulum {
    pub fn new(params: PendulumParams) -> Result<Self, EnvError> {
        for (name, v) in [
            ("gravity", params.gravity),
            ("mass", params.mass),
            ("length", params.length),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnvError::InvalidParams(format!(
                    "pendulum {name} must be > 0, got {v}"
                )));
            }
        }
        if params.horizon == 0 {
            return Err(EnvError::InvalidParams(
                "pendulum horizon must be >= 1".into(),
            ));
        }
        let worst = PI * PI + 0.1 * MAX_SPEED * MAX_SPEED + 0.001 * MAX_TORQUE * MAX_TORQUE;
        let spec = EnvSpec {
            obs_dim: 3,
            action_dim: 1,
            action_bound: vec![MAX_TORQUE],
            horizon: params.horizon,
            reward_range: (-worst, 0.0),
        };
        Ok(Self {
            params,
            spec,
            theta: 0.0,
            theta_dot: 0.0,
            t: 0,
            done: true,
        })
    }

    /// Starts an episode from the given angle and angular velocity.
    pub fn reset_to(&mut self, theta: f64, theta_dot: f64) -> Vec<f64> {
        self.theta = theta;
        self.theta_dot = theta_dot.clamp(-MAX_SPEED, MAX_SPEED);
        self.t = 0;
        self.done = false;
        self.obs()
    }

    pub fn state(&self) -> (f64, f64) {
        (self.theta, self.theta_dot)
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.theta.cos(), self.theta.sin(), self.theta_dot]
    }
}

impl Environment for Pendulum {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let theta = rng.random_range(-PI..PI);
        let theta_dot = rng.random_range(-1.0..1.0);
        self.reset_to(theta, theta_dot)
    }

    fn step(&mut self, action: &[f64], _rng: &mut dyn RngCore) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let (a, action_clipped) = clip_action(&self.spec, action)?;
        let u = a[0];
        let PendulumParams {
            gravity: g,
            mass: m,
            length: l,
            ..
        } = self.params;
        let th = angle_normalize(self.theta);
        let cost = th * th + 0.1 * self.theta_dot * self.theta_dot + 0.001 * u * u;
        let acc = 3.0 * g / (2.0 * l) * self.theta.sin() + 3.0 / (m * l * l) * u;
        self.theta_dot = (self.theta_dot + acc * DT).clamp(-MAX_SPEED, MAX_SPEED);
        self.theta = angle_normalize(self.theta + self.theta_dot * DT);
        self.t += 1;
        let truncated = self.t >= self.params.horizon;
        self.done = truncated;
        Ok(StepResult {
            obs: self.obs(),
            reward: -cost,
            terminal: false,
            truncated,
            action_clipped,
        })
    }
}
