use super::{clip_action, EnvError, EnvSpec, Environment, StepResult};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PointmassParams {
    /// Positions are confined to `[−arena, arena]²`.
    pub arena: f64,
    pub max_speed: f64,
    pub goal_radius: f64,
    pub dt: f64,
    pub horizon: usize,
}

impl Default for PointmassParams {
    fn default() -> Self {
        Self {
            arena: 2.0,
            max_speed: 2.0,
            goal_radius: 0.1,
            dt: 0.1,
            horizon: 200,
        }
    }
}

/// Planar double integrator steered toward the origin. The action is an
/// acceleration in `[−1, 1]²`; the reward is `−dt·‖p‖ − 0.01‖a‖²`; reaching
/// `‖p‖ ≤ goal_radius` terminates the episode.
#[derive(Debug, Clone, PartialEq)]
pub struct Pointmass {
    params: PointmassParams,
    spec: EnvSpec,
    pos: [f64; 2],
    vel: [f64; 2],
    t: usize,
    done: bool,
}

impl Pointmass {
    pub fn new(params: PointmassParams) -> Result<Self, EnvError> {
        for (name, v) in [
            ("arena", params.arena),
            ("max_speed", params.max_speed),
            ("goal_radius", params.goal_radius),
            ("dt", params.dt),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(EnvError::InvalidParams(format!(
                    "pointmass {name} must be > 0, got {v}"
                )));
            }
        }
        if params.goal_radius >= params.arena {
            return Err(EnvError::InvalidParams(
                "goal radius must be smaller than the arena".into(),
            ));
        }
        if params.horizon == 0 {
            return Err(EnvError::InvalidParams(
                "pointmass horizon must be >= 1".into(),
            ));
        }
        let worst = params.dt * params.arena * std::f64::consts::SQRT_2 + 0.02;
        let spec = EnvSpec {
            obs_dim: 4,
            action_dim: 2,
            action_bound: vec![1.0, 1.0],
            horizon: params.horizon,
            reward_range: (-worst, 0.0),
        };
        Ok(Self {
            params,
            spec,
            pos: [0.0; 2],
            vel: [0.0; 2],
            t: 0,
            done: true,
        })
    }

    /// Starts an episode at `pos` with velocity `vel` (both clamped to the
    /// arena and speed limits).
    pub fn reset_to(&mut self, pos: [f64; 2], vel: [f64; 2]) -> Vec<f64> {
        let (l, v) = (self.params.arena, self.params.max_speed);
        self.pos = pos.map(|x| x.clamp(-l, l));
        self.vel = vel.map(|x| x.clamp(-v, v));
        self.t = 0;
        self.done = false;
        self.obs()
    }

    fn obs(&self) -> Vec<f64> {
        vec![self.pos[0], self.pos[1], self.vel[0], self.vel[1]]
    }
}

impl Environment for Pointmass {
    fn spec(&self) -> &EnvSpec {
        &self.spec
    }

    fn reset(&mut self, rng: &mut dyn RngCore) -> Vec<f64> {
        let l = self.params.arena;
        let pos = [rng.random_range(-l..=l), rng.random_range(-l..=l)];
        self.reset_to(pos, [0.0; 2])
    }

    fn step(&mut self, action: &[f64], _rng: &mut dyn RngCore) -> Result<StepResult, EnvError> {
        if self.done {
            return Err(EnvError::EpisodeFinished);
        }
        let (a, action_clipped) = clip_action(&self.spec, action)?;
        let PointmassParams {
            arena,
            max_speed,
            goal_radius,
            dt,
            horizon,
        } = self.params;
        for (i, ai) in a.iter().enumerate() {
            self.vel[i] = (self.vel[i] + ai * dt).clamp(-max_speed, max_speed);
            let next = self.pos[i] + self.vel[i] * dt;
            if next.abs() > arena {
                // inelastic wall
                self.pos[i] = next.clamp(-arena, arena);
                self.vel[i] = 0.0;
            } else {
                self.pos[i] = next;
            }
        }
        let dist = self.pos[0].hypot(self.pos[1]);
        let reward = -dt * dist - 0.01 * (a[0] * a[0] + a[1] * a[1]);
        self.t += 1;
        let terminal = dist <= goal_radius;
        let truncated = !terminal && self.t >= horizon;
        self.done = terminal || truncated;
        Ok(StepResult {
            obs: self.obs(),
            reward,
            terminal,
            truncated,
            action_clipped,
        })
    }
}
