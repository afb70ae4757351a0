use super::{ActorNet, AgentError, CriticNet};
use crate::envs::{AnyEnv, Environment};
use rand::RngCore;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProbeSettings {
    /// Episodes rolled with the deterministic policy to collect pairs.
    pub episodes: usize,
    /// Cap on the number of probed pairs (evenly thinned).
    pub max_pairs: usize,
    /// Monte-Carlo rollouts per pair.
    pub n_rollouts: usize,
}

impl Default for ProbeSettings {
    fn default() -> Self {
        Self {
            episodes: 1,
            max_pairs: 50,
            n_rollouts: 20,
        }
    }
}

/// Mean of `Q(s, a) − Ĝ(s, a)` over pairs visited by the deterministic
/// policy `bound·tanh(μ(s))`, where `Ĝ` is a Monte-Carlo estimate of the
/// discounted return of taking `a` in `s` and following that policy. With
/// several critics the smallest Q is used.
pub fn overestimation_probe(
    env: &AnyEnv,
    actor: &ActorNet,
    critics: &[CriticNet],
    gamma: f64,
    settings: &ProbeSettings,
    rng: &mut dyn RngCore,
) -> Result<f64, AgentError> {
    if settings.episodes == 0 || settings.n_rollouts == 0 || settings.max_pairs == 0 {
        return Err(AgentError::InvalidConfig(
            "probe counts must be >= 1".into(),
        ));
    }
    if !(0.0..1.0).contains(&gamma) {
        return Err(AgentError::InvalidConfig(format!(
            "probe gamma {gamma} not in [0, 1)"
        )));
    }
    if critics.is_empty() {
        return Err(AgentError::InvalidConfig("probe needs a critic".into()));
    }
    let mut pairs = Vec::new();
    let mut env_run = env.clone();
    for _ in 0..settings.episodes {
        let mut obs = env_run.reset(rng);
        loop {
            let a = actor.deterministic_action(&obs)?;
            pairs.push((env_run.clone(), obs.clone(), a.clone()));
            let r = env_run.step(&a, rng)?;
            if r.done() {
                break;
            }
            obs = r.obs;
        }
    }
    let stride = pairs.len().div_ceil(settings.max_pairs);
    let mut total = 0.0;
    let mut count = 0usize;
    for (snapshot, obs, action) in pairs.into_iter().step_by(stride) {
        let q = critics
            .iter()
            .map(|c| c.q_value(&obs, &action))
            .collect::<Result<Vec<_>, _>>()?
            .into_iter()
            .fold(f64::INFINITY, f64::min);
        let mut mc = 0.0;
        for _ in 0..settings.n_rollouts {
            mc += discounted_return(snapshot.clone(), &action, actor, gamma, rng)?;
        }
        total += q - mc / settings.n_rollouts as f64;
        count += 1;
    }
    Ok(total / count as f64)
}

fn discounted_return(
    mut env: AnyEnv,
    first: &[f64],
    actor: &ActorNet,
    gamma: f64,
    rng: &mut dyn RngCore,
) -> Result<f64, AgentError> {
    let mut action = first.to_vec();
    let (mut ret, mut discount) = (0.0, 1.0);
    loop {
        let r = env.step(&action, rng)?;
        ret += discount * r.reward;
        discount *= gamma;
        if r.done() {
            return Ok(ret);
        }
        action = actor.deterministic_action(&r.obs)?;
    }
}
