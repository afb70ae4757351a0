use super::critic::critic_loss_at;
use super::{
    actor_loss_and_grads, critic_targets, overestimation_probe, ActorNet, AgentConfig, AgentError,
    Algo, CriticKind, CriticNet, ProbeSettings, ReplayBuffer, TransitionRecord,
};
use crate::envs::{AnyEnv, EnvConfig, Environment};
use crate::nn::AdamConfig;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use std::path::Path;

const STREAM_INIT: u64 = 0;
const STREAM_ENV: u64 = 1;
const STREAM_ACTION: u64 = 2;
const STREAM_UPDATE: u64 = 3;
const STREAM_EVAL: u64 = 4;
const STREAM_PROBE: u64 = 5;

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

/// One line of the run log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum LogRecord {
    /// Averages over the gradient steps since the previous train record.
    Train {
        step: u64,
        critic_loss: f64,
        actor_loss: f64,
        mean_sigma: Option<f64>,
        buffer_size: usize,
    },
    Eval {
        step: u64,
        eval_mean: f64,
        eval_std: f64,
    },
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunLog {
    pub records: Vec<LogRecord>,
}

impl RunLog {
    pub fn to_jsonl(&self) -> String {
        self.records
            .iter()
            .map(|r| serde_json::to_string(r).expect("log records serialize") + "\n")
            .collect()
    }

    /// `(step, mean, std)` of every evaluation.
    pub fn evals(&self) -> Vec<(u64, f64, f64)> {
        self.records
            .iter()
            .filter_map(|r| match *r {
                LogRecord::Eval {
                    step,
                    eval_mean,
                    eval_std,
                } => Some((step, eval_mean, eval_std)),
                LogRecord::Train { .. } => None,
            })
            .collect()
    }

    pub fn final_eval(&self) -> Option<(u64, f64, f64)> {
        self.evals().last().copied()
    }
}

/// Serializable RNG positions of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngStates {
    pub env: ChaCha8Rng,
    pub action: ChaCha8Rng,
    pub update: ChaCha8Rng,
    pub eval: ChaCha8Rng,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub config: AgentConfig,
    pub env: EnvConfig,
    pub step: u64,
    pub grad_steps: u64,
    pub actor: ActorNet,
    pub critics: Vec<CriticNet>,
    pub rng: RngStates,
}

impl Checkpoint {
    pub fn save(&self, path: &Path) -> Result<(), AgentError> {
        let json =
            serde_json::to_string(self).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        std::fs::write(path, json)
            .map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.display())))
    }

    pub fn load(path: &Path) -> Result<Self, AgentError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| AgentError::Checkpoint(format!("{}: {e}", path.display())))?;
        let ck: Self =
            serde_json::from_str(&text).map_err(|e| AgentError::Checkpoint(e.to_string()))?;
        ck.validate()?;
        Ok(ck)
    }

    fn validate(&self) -> Result<(), AgentError> {
        let bad = |m: &str| Err(AgentError::Checkpoint(m.into()));
        if self.actor.params.len() != self.actor.spec.param_count()
            || !self.actor.params.is_finite()
        {
            return bad("actor parameters do not match their spec");
        }
        for c in &self.critics {
            let n = c.spec.param_count();
            if c.params.len() != n
                || c.target.len() != n
                || !c.params.is_finite()
                || !c.target.is_finite()
            {
                return bad("critic parameters do not match their spec");
            }
        }
        let env = self.env.build()?;
        if env.spec().obs_dim != self.actor.obs_dim()
            || env.spec().action_dim != self.actor.action_dim()
        {
            return bad("actor shape does not match the environment");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Default)]
struct Accumulator {
    critic_loss: f64,
    actor_loss: f64,
    sigma: f64,
    count: u64,
}

/// Rolls `n_episodes` with the deterministic action `bound·tanh(μ(s))` and
/// returns the mean and sample standard deviation of the undiscounted
/// episode returns.
pub fn evaluate(
    actor: &ActorNet,
    env: &AnyEnv,
    n_episodes: usize,
    rng: &mut dyn rand::RngCore,
) -> Result<(f64, f64), AgentError> {
    if n_episodes == 0 {
        return Err(AgentError::InvalidConfig(
            "evaluation needs at least one episode".into(),
        ));
    }
    let mut env = env.clone();
    let mut returns = Vec::with_capacity(n_episodes);
    for _ in 0..n_episodes {
        let mut obs = env.reset(rng);
        let mut total = 0.0;
        loop {
            let a = actor.deterministic_action(&obs)?;
            let r = env.step(&a, rng)?;
            total += r.reward;
            if r.done() {
                break;
            }
            obs = r.obs;
        }
        returns.push(total);
    }
    Ok(mean_and_sample_std(&returns))
}

/// Shifted by the first value so identical returns give exactly zero spread.
pub(crate) fn mean_and_sample_std(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let x0 = xs[0];
    let s1: f64 = xs.iter().map(|x| x - x0).sum();
    let mean = x0 + s1 / n;
    if xs.len() < 2 {
        return (mean, 0.0);
    }
    let s2: f64 = xs.iter().map(|x| (x - x0) * (x - x0)).sum();
    (mean, ((s2 - s1 * s1 / n) / (n - 1.0)).max(0.0).sqrt())
}

/// Single-threaded training loop owning all mutable run state.
#[derive(Debug, Clone)]
pub struct Trainer {
    config: AgentConfig,
    env_config: EnvConfig,
    env: AnyEnv,
    eval_env: AnyEnv,
    buffer: ReplayBuffer,
    actor: ActorNet,
    critics: Vec<CriticNet>,
    rng: RngStates,
    step: u64,
    grad_steps: u64,
    obs: Option<Vec<f64>>,
    acc: Accumulator,
    clipped_actions: u64,
}

impl Trainer {
    pub fn new(env_config: EnvConfig, config: AgentConfig) -> Result<Self, AgentError> {
        config.validate()?;
        let env = env_config.build()?;
        let spec = env.spec().clone();
        let adam = AdamConfig {
            lr: config.lr,
            ..AdamConfig::default()
        };
        let mut init = stream(config.seed, STREAM_INIT);
        let mut actor = ActorNet::new(
            spec.obs_dim,
            &config.actor_hidden,
            spec.action_bound.clone(),
            adam,
            &mut init,
        )?;
        actor.log_std_min = config.log_std_min;
        actor.log_std_max = config.log_std_max;
        let kind = match config.algo {
            Algo::Cdsac => CriticKind::Distributional,
            Algo::Sac => CriticKind::Scalar,
        };
        let n_critics = if config.twin_critic { 2 } else { 1 };
        let critics = (0..n_critics)
            .map(|_| {
                CriticNet::new(
                    kind,
                    spec.obs_dim,
                    spec.action_dim,
                    config.critic_hidden_for_algo(),
                    adam,
                    (config.sigma_min, config.sigma_max),
                    &mut init,
                )
            })
            .collect::<Result<Vec<_>, _>>()?;
        let buffer = ReplayBuffer::new(config.buffer_capacity, spec.obs_dim, spec.action_dim)?;
        let rng = RngStates {
            env: stream(config.seed, STREAM_ENV),
            action: stream(config.seed, STREAM_ACTION),
            update: stream(config.seed, STREAM_UPDATE),
            eval: stream(config.seed, STREAM_EVAL),
        };
        Ok(Self {
            config,
            env_config,
            eval_env: env.clone(),
            env,
            buffer,
            actor,
            critics,
            rng,
            step: 0,
            grad_steps: 0,
            obs: None,
            acc: Accumulator::default(),
            clipped_actions: 0,
        })
    }

    pub fn config(&self) -> &AgentConfig {
        &self.config
    }

    pub fn env_config(&self) -> &EnvConfig {
        &self.env_config
    }

    pub fn actor(&self) -> &ActorNet {
        &self.actor
    }

    pub fn critics(&self) -> &[CriticNet] {
        &self.critics
    }

    pub fn buffer(&self) -> &ReplayBuffer {
        &self.buffer
    }

    pub fn env_steps(&self) -> u64 {
        self.step
    }

    pub fn grad_steps(&self) -> u64 {
        self.grad_steps
    }

    /// Environment steps whose action had to be clipped to the bounds.
    pub fn clipped_actions(&self) -> u64 {
        self.clipped_actions
    }

    pub fn is_finished(&self) -> bool {
        self.step >= self.config.total_steps
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint {
            config: self.config.clone(),
            env: self.env_config.clone(),
            step: self.step,
            grad_steps: self.grad_steps,
            actor: self.actor.clone(),
            critics: self.critics.clone(),
            rng: self.rng.clone(),
        }
    }

    /// Critic bias against Monte-Carlo returns of the current deterministic
    /// policy, on a dedicated random stream so training is unaffected.
    pub fn overestimation_bias(&self, settings: &ProbeSettings) -> Result<f64, AgentError> {
        let mut rng = stream(self.config.seed, STREAM_PROBE);
        overestimation_probe(
            &self.eval_env,
            &self.actor,
            &self.critics,
            self.config.gamma,
            settings,
            &mut rng,
        )
    }

    /// Runs the remaining steps and collects every log record.
    pub fn run(&mut self) -> Result<RunLog, AgentError> {
        let mut log = RunLog::default();
        while !self.is_finished() {
            log.records.extend(self.step()?);
        }
        Ok(log)
    }

    /// One environment step followed by its gradient updates; returns any
    /// log records due at this step.
    pub fn step(&mut self) -> Result<Vec<LogRecord>, AgentError> {
        let obs = match self.obs.take() {
            Some(o) => o,
            None => self.env.reset(&mut self.rng.env),
        };
        let action = if self.step < self.config.initial_random_steps {
            let rng = &mut self.rng.action;
            self.actor
                .action_bound
                .iter()
                .map(|&b| rng.random_range(-b..=b))
                .collect()
        } else {
            self.actor
                .sample_actions(&obs, 1, &mut self.rng.action)?
                .actions
        };
        let res = self.env.step(&action, &mut self.rng.env)?;
        if res.action_clipped {
            self.clipped_actions += 1;
        }
        self.buffer.push(&TransitionRecord {
            obs,
            action,
            reward: res.reward,
            next_obs: res.obs.clone(),
            terminal: res.terminal,
        })?;
        self.obs = (!res.done()).then_some(res.obs);
        self.step += 1;

        if self.buffer.len() >= self.config.batch_size {
            for _ in 0..self.config.grad_steps_per_env_step {
                self.update().map_err(|e| match e {
                    AgentError::NonFiniteLoss { which, detail, .. } => AgentError::NonFiniteLoss {
                        step: self.step,
                        which,
                        detail,
                    },
                    other => other,
                })?;
            }
        }

        let mut records = Vec::new();
        if self.step.is_multiple_of(self.config.log_interval) && self.acc.count > 0 {
            let n = self.acc.count as f64;
            records.push(LogRecord::Train {
                step: self.step,
                critic_loss: self.acc.critic_loss / n,
                actor_loss: self.acc.actor_loss / n,
                mean_sigma: (self.config.algo == Algo::Cdsac).then_some(self.acc.sigma / n),
                buffer_size: self.buffer.len(),
            });
            self.acc = Accumulator::default();
        }
        if self.step.is_multiple_of(self.config.eval_interval)
            || self.step == self.config.total_steps
        {
            let (eval_mean, eval_std) = evaluate(
                &self.actor,
                &self.eval_env,
                self.config.eval_episodes,
                &mut self.rng.eval,
            )?;
            records.push(LogRecord::Eval {
                step: self.step,
                eval_mean,
                eval_std,
            });
        }
        Ok(records)
    }

    /// One critic update, one actor update and, when due, a Polyak step.
    fn update(&mut self) -> Result<(), AgentError> {
        let c = &self.config;
        let batch = self.buffer.sample(c.batch_size, &mut self.rng.update)?;
        let targets = critic_targets(
            &batch,
            &self.critics,
            &self.actor,
            c.alpha,
            c.gamma,
            &mut self.rng.update,
        )?;
        let mut critic_loss = 0.0;
        let mut sigma = 0.0;
        for critic in &mut self.critics {
            let lg = critic_loss_at(critic, &critic.params, &batch, &targets)?;
            critic.adam.step(&mut critic.params, &lg.grad, false)?;
            critic_loss += lg.loss;
            sigma += lg.mean_sigma.unwrap_or(0.0);
        }
        let k = self.critics.len() as f64;
        let lg = actor_loss_and_grads(
            &self.actor,
            &self.critics,
            &batch.obs,
            batch.len,
            c.alpha,
            &mut self.rng.update,
        )?;
        self.actor
            .adam
            .step(&mut self.actor.params, &lg.grad, false)?;
        self.grad_steps += 1;
        if self
            .grad_steps
            .is_multiple_of(c.target_update_interval as u64)
        {
            for critic in &mut self.critics {
                critic.update_target(c.tau)?;
            }
        }
        self.acc.critic_loss += critic_loss / k;
        self.acc.sigma += sigma / k;
        self.acc.actor_loss += lg.loss;
        self.acc.count += 1;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::envs::NoisyChainParams;

    fn tiny(algo: Algo, total_steps: u64) -> AgentConfig {
        AgentConfig {
            algo,
            total_steps,
            batch_size: 16,
            initial_random_steps: 20,
            eval_interval: 25,
            eval_episodes: 2,
            log_interval: 10,
            actor_hidden: vec![8, 8],
            critic_hidden: vec![8, 7],
            sac_critic_hidden: vec![8, 8],
            ..AgentConfig::default()
        }
    }

    #[test]
    fn zero_steps_leaves_initialization() {
        let mut t = Trainer::new(EnvConfig::default(), tiny(Algo::Cdsac, 0)).unwrap();
        let before = t.checkpoint();
        let log = t.run().unwrap();
        assert!(log.records.is_empty());
        assert_eq!(t.checkpoint(), before);
    }

    #[test]
    fn identical_seeds_give_identical_logs() {
        for algo in [Algo::Cdsac, Algo::Sac] {
            let a = Trainer::new(EnvConfig::default(), tiny(algo, 60))
                .unwrap()
                .run()
                .unwrap();
            let b = Trainer::new(EnvConfig::default(), tiny(algo, 60))
                .unwrap()
                .run()
                .unwrap();
            assert_eq!(a.to_jsonl(), b.to_jsonl());
            assert_eq!(a.evals().len(), 3);
            assert!(a
                .records
                .iter()
                .any(|r| matches!(r, LogRecord::Train { .. })));
        }
    }

    #[test]
    fn algorithms_share_the_pipeline_until_updates() {
        let mut cfg = tiny(Algo::Cdsac, 15);
        cfg.initial_random_steps = 5;
        let mut a = Trainer::new(EnvConfig::default(), cfg.clone()).unwrap();
        let mut b = Trainer::new(
            EnvConfig::default(),
            AgentConfig {
                algo: Algo::Sac,
                ..cfg
            },
        )
        .unwrap();
        a.run().unwrap();
        b.run().unwrap();
        assert_eq!(a.grad_steps(), 0);
        let ra: Vec<_> = a.buffer().iter_ordered().collect();
        let rb: Vec<_> = b.buffer().iter_ordered().collect();
        assert_eq!(ra, rb);
        assert_eq!(a.actor(), b.actor());
    }

    #[test]
    fn terminal_chain_runs_and_checkpoints_round_trip() {
        let env = EnvConfig::NoisyChain(NoisyChainParams::default());
        let mut cfg = tiny(Algo::Cdsac, 40);
        cfg.twin_critic = true;
        let mut t = Trainer::new(env, cfg).unwrap();
        t.run().unwrap();
        assert!(t.buffer().iter_ordered().any(|r| r.terminal));
        let ck = t.checkpoint();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("ck.json");
        ck.save(&path).unwrap();
        let back = Checkpoint::load(&path).unwrap();
        assert_eq!(back, ck);
        assert_eq!(back.critics.len(), 2);
    }

    #[test]
    fn evaluation_statistics() {
        let chain = EnvConfig::NoisyChain(NoisyChainParams {
            noise_std: 0.0,
            ..Default::default()
        })
        .build()
        .unwrap();
        let actor =
            ActorNet::new(1, &[4], vec![1.0], AdamConfig::default(), &mut stream(0, 0)).unwrap();
        let mut rng = stream(1, 0);
        let (m1, s1) = evaluate(&actor, &chain, 1, &mut rng).unwrap();
        assert_eq!(s1, 0.0);
        let (m, s) = evaluate(&actor, &chain, 5, &mut rng).unwrap();
        assert_eq!(s, 0.0);
        assert!((m - m1).abs() < 1e-12);
        assert!(evaluate(&actor, &chain, 0, &mut rng).is_err());
    }
}
