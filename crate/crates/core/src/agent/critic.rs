use super::{ActorNet, AgentError, Batch};
use crate::gauss::{energy_distance_closed_form, grad_mean, grad_std_exact, GaussianReturn};
use crate::nn::{self, init_params, AdamConfig, AdamState, MlpSpec, ParameterVector};
use rand::{Rng, RngCore};
use serde::{Deserialize, Serialize};

/// Bias of the std head giving `softplus(bias) = 1`.
pub(crate) const UNIT_SOFTPLUS_BIAS: f64 = 0.541_324_854_612_918_1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CriticKind {
    /// Outputs `(Q, raw σ)`; the return is modelled as `N(Q, σ)`.
    Distributional,
    /// Outputs `Q` only.
    Scalar,
}

/// Q-network over the concatenation `[obs, action]` with its Polyak target.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CriticNet {
    pub kind: CriticKind,
    pub spec: MlpSpec,
    pub params: ParameterVector,
    pub target: ParameterVector,
    pub adam: AdamState,
    pub obs_dim: usize,
    pub action_dim: usize,
    pub sigma_min: f64,
    pub sigma_max: f64,
}

/// Per-sample critic outputs; `sigma` is zero for scalar critics.
#[derive(Debug, Clone, PartialEq)]
pub struct CriticOutput {
    pub mean: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `dσ/d(raw)`, zero inside the clamped regions.
    pub dsigma: Vec<f64>,
}

/// Mean loss over a batch and its gradient with respect to the parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct LossAndGrad {
    pub loss: f64,
    pub grad: Vec<f64>,
    /// Per-sample `∂ℓᵢ/∂Qᵢ` of the unaveraged loss (critic losses only).
    pub mean_head_grads: Vec<f64>,
    pub mean_sigma: Option<f64>,
}

fn softplus(x: f64) -> f64 {
    if x > 30.0 {
        x
    } else {
        x.exp().ln_1p()
    }
}

fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

impl CriticNet {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        kind: CriticKind,
        obs_dim: usize,
        action_dim: usize,
        hidden: &[usize],
        adam: AdamConfig,
        sigma_range: (f64, f64),
        rng: &mut impl Rng,
    ) -> Result<Self, AgentError> {
        let out = match kind {
            CriticKind::Distributional => 2,
            CriticKind::Scalar => 1,
        };
        let spec = MlpSpec::with_hidden(obs_dim + action_dim, hidden, out)?;
        let mut params = init_params(&spec, rng);
        if kind == CriticKind::Distributional {
            let last = spec.layers().pop().expect("at least two layers");
            params.values_mut()[last.bias().start + 1] = UNIT_SOFTPLUS_BIAS;
        }
        let target = params.clone();
        let adam = AdamState::new(params.len(), adam);
        Ok(Self {
            kind,
            spec,
            params,
            target,
            adam,
            obs_dim,
            action_dim,
            sigma_min: sigma_range.0,
            sigma_max: sigma_range.1,
        })
    }

    pub fn input(&self, obs: &[f64], actions: &[f64], n: usize) -> Result<Vec<f64>, AgentError> {
        if obs.len() != n * self.obs_dim || actions.len() != n * self.action_dim {
            return Err(nn::NnError::DimensionMismatch {
                expected: n * (self.obs_dim + self.action_dim),
                got: obs.len() + actions.len(),
            }
            .into());
        }
        let mut x = Vec::with_capacity(n * (self.obs_dim + self.action_dim));
        for (o, a) in obs
            .chunks_exact(self.obs_dim)
            .zip(actions.chunks_exact(self.action_dim))
        {
            x.extend_from_slice(o);
            x.extend_from_slice(a);
        }
        Ok(x)
    }

    /// `σ = clamp(softplus(raw), σ_min, σ_max)` and its derivative.
    pub fn sigma_from_raw(&self, raw: f64) -> (f64, f64) {
        let sp = softplus(raw);
        if sp < self.sigma_min {
            (self.sigma_min, 0.0)
        } else if sp > self.sigma_max {
            (self.sigma_max, 0.0)
        } else {
            (sp, sigmoid(raw))
        }
    }

    pub fn decode(&self, out: &[f64]) -> CriticOutput {
        let width = self.spec.output_dim();
        let n = out.len() / width;
        let mut o = CriticOutput {
            mean: Vec::with_capacity(n),
            sigma: Vec::with_capacity(n),
            dsigma: Vec::with_capacity(n),
        };
        for row in out.chunks_exact(width) {
            o.mean.push(row[0]);
            let (s, ds) = match self.kind {
                CriticKind::Distributional => self.sigma_from_raw(row[1]),
                CriticKind::Scalar => (0.0, 0.0),
            };
            o.sigma.push(s);
            o.dsigma.push(ds);
        }
        o
    }

    pub fn predict(
        &self,
        obs: &[f64],
        actions: &[f64],
        n: usize,
    ) -> Result<CriticOutput, AgentError> {
        self.predict_with(&self.params, obs, actions, n)
    }

    pub fn predict_target(
        &self,
        obs: &[f64],
        actions: &[f64],
        n: usize,
    ) -> Result<CriticOutput, AgentError> {
        self.predict_with(&self.target, obs, actions, n)
    }

    fn predict_with(
        &self,
        params: &ParameterVector,
        obs: &[f64],
        actions: &[f64],
        n: usize,
    ) -> Result<CriticOutput, AgentError> {
        let x = self.input(obs, actions, n)?;
        Ok(self.decode(&nn::predict_batch(&self.spec, params, &x, n)?))
    }

    /// Mean of the return distribution at one state-action pair.
    pub fn q_value(&self, obs: &[f64], action: &[f64]) -> Result<f64, AgentError> {
        Ok(self.predict(obs, action, 1)?.mean[0])
    }

    pub fn update_target(&mut self, tau: f64) -> Result<(), AgentError> {
        nn::polyak_update(&mut self.target, &self.params, tau)?;
        Ok(())
    }
}

/// Bootstrapped targets from the target networks. Each next state gets one
/// fresh action `a′ ~ π(·|s′)`; terminal transitions yield a point mass at
/// `r`. With several critics the one with the smallest target mean is used.
pub fn critic_targets(
    batch: &Batch,
    critics: &[CriticNet],
    actor: &ActorNet,
    alpha: f64,
    gamma: f64,
    rng: &mut dyn RngCore,
) -> Result<Vec<GaussianReturn>, AgentError> {
    let n = batch.len;
    let next = actor.sample_actions(&batch.next_obs, n, rng)?;
    let outs = critics
        .iter()
        .map(|c| c.predict_target(&batch.next_obs, &next.actions, n))
        .collect::<Result<Vec<_>, _>>()?;
    let mut targets = Vec::with_capacity(n);
    for i in 0..n {
        let r = batch.rewards[i];
        if batch.terminals[i] {
            targets.push(GaussianReturn::dirac(r));
            continue;
        }
        let best = outs
            .iter()
            .min_by(|a, b| a.mean[i].total_cmp(&b.mean[i]))
            .ok_or_else(|| AgentError::InvalidConfig("no critics".into()))?;
        let mean = r + gamma * (best.mean[i] - alpha * next.log_probs[i]);
        targets.push(GaussianReturn {
            mean,
            std: gamma * best.sigma[i],
        });
    }
    Ok(targets)
}

fn non_finite(which: &'static str, detail: String) -> AgentError {
    AgentError::NonFiniteLoss {
        step: 0,
        which,
        detail,
    }
}

/// Energy-distance loss `mean d_e(target_i, N(Qᵢ, σᵢ))` for distributional
/// critics, squared error to the target mean for scalar ones.
pub fn critic_loss_and_grads(
    critic: &CriticNet,
    batch: &Batch,
    targets: &[GaussianReturn],
) -> Result<LossAndGrad, AgentError> {
    critic_loss_at(critic, &critic.params, batch, targets)
}

pub(crate) fn critic_loss_at(
    critic: &CriticNet,
    params: &ParameterVector,
    batch: &Batch,
    targets: &[GaussianReturn],
) -> Result<LossAndGrad, AgentError> {
    let n = batch.len;
    if targets.len() != n || n == 0 {
        return Err(AgentError::InsufficientData {
            have: targets.len(),
            need: n.max(1),
        });
    }
    let x = critic.input(&batch.obs, &batch.actions, n)?;
    let (out, tape) = nn::forward_batch(&critic.spec, params, &x, n)?;
    let o = critic.decode(&out);
    let width = critic.spec.output_dim();
    let scale = 1.0 / n as f64;
    let mut out_grad = vec![0.0; n * width];
    let mut mean_head_grads = Vec::with_capacity(n);
    let mut loss = 0.0;
    for (i, target) in targets.iter().enumerate() {
        let (q, sigma) = (o.mean[i], o.sigma[i]);
        if !(q.is_finite() && target.mean.is_finite() && target.std.is_finite()) {
            return Err(non_finite(
                "critic",
                format!(
                    "sample {i}: Q {q}, sigma {sigma}, target ({}, {})",
                    target.mean, target.std
                ),
            ));
        }
        match critic.kind {
            CriticKind::Distributional => {
                let current = GaussianReturn {
                    mean: q,
                    std: sigma,
                };
                loss += energy_distance_closed_form(target, &current);
                let gm = grad_mean(&current, target)?;
                let gs = grad_std_exact(&current, target)?;
                mean_head_grads.push(gm);
                out_grad[i * width] = gm * scale;
                out_grad[i * width + 1] = gs * o.dsigma[i] * scale;
            }
            CriticKind::Scalar => {
                let diff = q - target.mean;
                loss += diff * diff;
                mean_head_grads.push(2.0 * diff);
                out_grad[i * width] = 2.0 * diff * scale;
            }
        }
    }
    loss *= scale;
    if !loss.is_finite() {
        return Err(non_finite("critic", format!("loss {loss}")));
    }
    let (grad, _) = nn::backward(&critic.spec, params, &tape, &out_grad)?;
    let mean_sigma =
        (critic.kind == CriticKind::Distributional).then(|| o.sigma.iter().sum::<f64>() * scale);
    Ok(LossAndGrad {
        loss,
        grad,
        mean_head_grads,
        mean_sigma,
    })
}
