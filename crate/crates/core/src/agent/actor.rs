use super::{AgentError, CriticNet, LossAndGrad};
use crate::nn::{self, init_params, AdamConfig, AdamState, MlpSpec, ParameterVector};
use rand::{Rng, RngCore};
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

const HALF_LN_2PI: f64 = 0.918_938_533_204_672_8;

/// `ln(1 − tanh²u)` without cancellation for large `|u|`.
fn log_one_minus_tanh2(u: f64) -> f64 {
    2.0 * (std::f64::consts::LN_2 - u.abs() - (-2.0 * u.abs()).exp().ln_1p())
}

/// Squashed Gaussian policy: the network maps an observation to per-dimension
/// `(μ, log σ)`; actions are `bound · tanh(μ + σξ)` with `ξ ~ N(0, 1)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ActorNet {
    pub spec: MlpSpec,
    pub params: ParameterVector,
    pub adam: AdamState,
    pub action_bound: Vec<f64>,
    pub log_std_min: f64,
    pub log_std_max: f64,
}

/// Per-sample quantities of one reparameterized draw, kept for the backward
/// pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ActorDraw {
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub mean: Vec<f64>,
    pub log_std: Vec<f64>,
    /// Whether `log σ` was clamped (its gradient is then zero).
    pub log_std_clamped: Vec<bool>,
    pub pre_squash: Vec<f64>,
    pub noise: Vec<f64>,
}

impl ActorNet {
    pub fn new(
        obs_dim: usize,
        hidden: &[usize],
        action_bound: Vec<f64>,
        adam: AdamConfig,
        rng: &mut impl Rng,
    ) -> Result<Self, AgentError> {
        if action_bound.is_empty() || action_bound.iter().any(|b| !(b.is_finite() && *b > 0.0)) {
            return Err(AgentError::InvalidConfig(
                "action bounds must be finite and > 0".into(),
            ));
        }
        let spec = MlpSpec::with_hidden(obs_dim, hidden, 2 * action_bound.len())?;
        let params = init_params(&spec, rng);
        let adam = AdamState::new(params.len(), adam);
        Ok(Self {
            spec,
            params,
            adam,
            action_bound,
            log_std_min: -20.0,
            log_std_max: 2.0,
        })
    }

    pub fn obs_dim(&self) -> usize {
        self.spec.input_dim()
    }

    pub fn action_dim(&self) -> usize {
        self.action_bound.len()
    }

    /// Draws actions for `n` observations using the supplied standard normal
    /// noise (`n × action_dim`).
    pub fn draw_with_noise(
        &self,
        obs: &[f64],
        n: usize,
        noise: &[f64],
    ) -> Result<(ActorDraw, nn::Tape), AgentError> {
        let (out, tape) = nn::forward_batch(&self.spec, &self.params, obs, n)?;
        Ok((self.draw_from_output(&out, noise), tape))
    }

    pub(crate) fn draw_from_output(&self, out: &[f64], noise: &[f64]) -> ActorDraw {
        let k = self.action_dim();
        let n = out.len() / (2 * k);
        let mut d = ActorDraw {
            actions: Vec::with_capacity(n * k),
            log_probs: Vec::with_capacity(n),
            mean: Vec::with_capacity(n * k),
            log_std: Vec::with_capacity(n * k),
            log_std_clamped: Vec::with_capacity(n * k),
            pre_squash: Vec::with_capacity(n * k),
            noise: noise.to_vec(),
        };
        for (row, xi_row) in out.chunks_exact(2 * k).zip(noise.chunks_exact(k)) {
            let mut log_prob = 0.0;
            for j in 0..k {
                let mu = row[j];
                let raw = row[k + j];
                let ls = raw.clamp(self.log_std_min, self.log_std_max);
                let xi = xi_row[j];
                let u = mu + ls.exp() * xi;
                let b = self.action_bound[j];
                log_prob += -0.5 * xi * xi - ls - HALF_LN_2PI - b.ln() - log_one_minus_tanh2(u);
                d.actions.push(b * u.tanh());
                d.mean.push(mu);
                d.log_std.push(ls);
                d.log_std_clamped.push(ls != raw);
                d.pre_squash.push(u);
            }
            d.log_probs.push(log_prob);
        }
        d
    }

    /// Reparameterized sample for `n` observations.
    pub fn sample(
        &self,
        obs: &[f64],
        n: usize,
        rng: &mut dyn RngCore,
    ) -> Result<(ActorDraw, nn::Tape), AgentError> {
        let noise: Vec<f64> = (0..n * self.action_dim())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        self.draw_with_noise(obs, n, &noise)
    }

    /// Sample without recording a tape.
    pub fn sample_actions(
        &self,
        obs: &[f64],
        n: usize,
        rng: &mut dyn RngCore,
    ) -> Result<ActorDraw, AgentError> {
        let noise: Vec<f64> = (0..n * self.action_dim())
            .map(|_| StandardNormal.sample(rng))
            .collect();
        let out = nn::predict_batch(&self.spec, &self.params, obs, n)?;
        Ok(self.draw_from_output(&out, &noise))
    }

    /// `bound · tanh(μ(s))` for a single observation.
    pub fn deterministic_action(&self, obs: &[f64]) -> Result<Vec<f64>, AgentError> {
        let out = nn::predict_batch(&self.spec, &self.params, obs, 1)?;
        Ok(out[..self.action_dim()]
            .iter()
            .zip(&self.action_bound)
            .map(|(mu, b)| b * mu.tanh())
            .collect())
    }
}

/// One action and its log-density under the squashed policy.
pub fn actor_sample(
    actor: &ActorNet,
    obs: &[f64],
    rng: &mut dyn RngCore,
) -> Result<(Vec<f64>, f64), AgentError> {
    let d = actor.sample_actions(obs, 1, rng)?;
    Ok((d.actions, d.log_probs[0]))
}

/// Policy loss `mean(α log π(a|s) − Q(s, a))` with `a = bound·tanh(μ + σξ)`,
/// using the supplied noise `ξ` (`n × action_dim`). The gradient covers the
/// direct `log π` term and the pathwise term through the action; critic
/// parameters are read only. With several critics each sample uses the
/// smallest Q.
pub fn actor_loss_with_noise(
    actor: &ActorNet,
    params: &ParameterVector,
    critics: &[CriticNet],
    obs: &[f64],
    n: usize,
    alpha: f64,
    noise: &[f64],
) -> Result<LossAndGrad, AgentError> {
    let k = actor.action_dim();
    if n == 0 || noise.len() != n * k {
        return Err(AgentError::InsufficientData {
            have: noise.len(),
            need: (n * k).max(1),
        });
    }
    if critics.is_empty() {
        return Err(AgentError::InvalidConfig(
            "actor loss needs a critic".into(),
        ));
    }
    let (out, tape) = nn::forward_batch(&actor.spec, params, obs, n)?;
    let d = actor.draw_from_output(&out, noise);
    let mut evals = Vec::with_capacity(critics.len());
    for c in critics {
        let x = c.input(obs, &d.actions, n)?;
        let (cout, ctape) = nn::forward_batch(&c.spec, &c.params, &x, n)?;
        evals.push((c.decode(&cout).mean, ctape));
    }
    let selected: Vec<usize> = (0..n)
        .map(|i| {
            (0..evals.len())
                .min_by(|&a, &b| evals[a].0[i].total_cmp(&evals[b].0[i]))
                .expect("non-empty")
        })
        .collect();
    let scale = 1.0 / n as f64;
    let mut loss = 0.0;
    for i in 0..n {
        let q = evals[selected[i]].0[i];
        let lp = d.log_probs[i];
        if !(q.is_finite() && lp.is_finite()) {
            return Err(AgentError::NonFiniteLoss {
                step: 0,
                which: "actor",
                detail: format!("sample {i}: Q {q}, log_prob {lp}"),
            });
        }
        loss += alpha * lp - q;
    }
    loss *= scale;
    // ∂L/∂a from the −Q term
    let mut action_grad = vec![0.0; n * k];
    for (ci, (c, (_, ctape))) in critics.iter().zip(&evals).enumerate() {
        let width = c.spec.output_dim();
        let mut og = vec![0.0; n * width];
        let mut any = false;
        for i in 0..n {
            if selected[i] == ci {
                og[i * width] = -scale;
                any = true;
            }
        }
        if !any {
            continue;
        }
        let (_, input_grad) = nn::backward(&c.spec, &c.params, ctape, &og)?;
        let in_dim = c.obs_dim + c.action_dim;
        for i in 0..n {
            if selected[i] == ci {
                let row = &input_grad[i * in_dim + c.obs_dim..][..k];
                action_grad[i * k..][..k].copy_from_slice(row);
            }
        }
    }
    let mut out_grad = vec![0.0; n * 2 * k];
    for i in 0..n {
        for j in 0..k {
            let idx = i * k + j;
            let t = d.pre_squash[idx].tanh();
            let sigma_xi = d.log_std[idx].exp() * d.noise[idx];
            let du = action_grad[idx] * actor.action_bound[j] * (1.0 - t * t);
            out_grad[i * 2 * k + j] = alpha * scale * 2.0 * t + du;
            if !d.log_std_clamped[idx] {
                out_grad[i * 2 * k + k + j] =
                    alpha * scale * (2.0 * t * sigma_xi - 1.0) + du * sigma_xi;
            }
        }
    }
    let (grad, _) = nn::backward(&actor.spec, params, &tape, &out_grad)?;
    Ok(LossAndGrad {
        loss,
        grad,
        mean_head_grads: Vec::new(),
        mean_sigma: None,
    })
}

/// [`actor_loss_with_noise`] with fresh standard normal noise.
pub fn actor_loss_and_grads(
    actor: &ActorNet,
    critics: &[CriticNet],
    obs: &[f64],
    n: usize,
    alpha: f64,
    rng: &mut dyn RngCore,
) -> Result<LossAndGrad, AgentError> {
    let noise: Vec<f64> = (0..n * actor.action_dim())
        .map(|_| StandardNormal.sample(rng))
        .collect();
    actor_loss_with_noise(actor, &actor.params, critics, obs, n, alpha, &noise)
}
