use cdsac::agent::{
    actor_loss_with_noise, critic_loss_and_grads, critic_targets, ActorNet, AgentConfig, Algo,
    Batch, CriticKind, CriticNet, ReplayBuffer, Trainer, TransitionRecord,
};
use cdsac::envs::{EnvConfig, NoisyChainParams};
use cdsac::gauss::{grad_mean, GaussianReturn};
use cdsac::nn::{self, AdamConfig};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use statrs::distribution::{ChiSquared, ContinuousCDF};

const OBS: usize = 3;
const ACT: usize = 2;

fn critic(kind: CriticKind, rng: &mut ChaCha8Rng) -> CriticNet {
    CriticNet::new(
        kind,
        OBS,
        ACT,
        &[8, 7],
        AdamConfig::default(),
        (0.01, 1000.0),
        rng,
    )
    .unwrap()
}

fn actor(rng: &mut ChaCha8Rng) -> ActorNet {
    ActorNet::new(OBS, &[8, 7], vec![1.0, 2.0], AdamConfig::default(), rng).unwrap()
}

fn random_batch(n: usize, terminal_every: usize, rng: &mut ChaCha8Rng) -> Batch {
    let records: Vec<_> = (0..n)
        .map(|i| TransitionRecord {
            obs: (0..OBS).map(|_| rng.random_range(-1.5..1.5)).collect(),
            action: vec![rng.random_range(-1.0..1.0), rng.random_range(-2.0..2.0)],
            reward: rng.random_range(-1.0..1.0),
            next_obs: (0..OBS).map(|_| rng.random_range(-1.5..1.5)).collect(),
            terminal: terminal_every > 0 && i % terminal_every == 0,
        })
        .collect();
    Batch::from_records(&records).unwrap()
}

fn near_kink(spec: &nn::MlpSpec, params: &nn::ParameterVector, x: &[f64], n: usize) -> bool {
    let (_, tape) = nn::forward_batch(spec, params, x, n).unwrap();
    tape.pre_activations()
        .iter()
        .flatten()
        .any(|z| z.abs() < 1e-3)
}

fn close(a: f64, b: f64, rel: f64) -> bool {
    (a - b).abs() <= rel * a.abs().max(b.abs()).max(1e-3)
}

/// Central differences of `loss(θ)` over every coordinate.
fn fd_check(theta: &[f64], analytic: &[f64], rel: f64, mut loss: impl FnMut(&[f64]) -> f64) {
    let h = 1e-5;
    let mut t = theta.to_vec();
    for i in 0..t.len() {
        let orig = t[i];
        t[i] = orig + h;
        let up = loss(&t);
        t[i] = orig - h;
        let down = loss(&t);
        t[i] = orig;
        let fd = (up - down) / (2.0 * h);
        assert!(
            close(analytic[i], fd, rel),
            "coordinate {i}: analytic {} vs fd {fd}",
            analytic[i]
        );
    }
}

fn with_params(c: &CriticNet, theta: &[f64]) -> CriticNet {
    let mut c = c.clone();
    c.params.values_mut().copy_from_slice(theta);
    c
}

fn random_targets(n: usize, rng: &mut ChaCha8Rng) -> Vec<GaussianReturn> {
    (0..n)
        .map(|i| GaussianReturn {
            mean: rng.random_range(-2.0..2.0),
            std: if i == 0 {
                0.0
            } else {
                rng.random_range(0.1..2.0)
            },
        })
        .collect()
}

#[test]
fn distributional_critic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(10);
    let mut checked = 0;
    while checked < 5 {
        let c = critic(CriticKind::Distributional, &mut rng);
        let batch = random_batch(4, 0, &mut rng);
        let x = c.input(&batch.obs, &batch.actions, 4).unwrap();
        if near_kink(&c.spec, &c.params, &x, 4) {
            continue;
        }
        checked += 1;
        let targets = random_targets(4, &mut rng);
        let lg = critic_loss_and_grads(&c, &batch, &targets).unwrap();
        fd_check(c.params.values(), &lg.grad, 1e-5, |theta| {
            critic_loss_and_grads(&with_params(&c, theta), &batch, &targets)
                .unwrap()
                .loss
        });
    }
}

#[test]
fn scalar_critic_gradient_matches_finite_differences() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut checked = 0;
    while checked < 5 {
        let c = critic(CriticKind::Scalar, &mut rng);
        let batch = random_batch(4, 0, &mut rng);
        let x = c.input(&batch.obs, &batch.actions, 4).unwrap();
        if near_kink(&c.spec, &c.params, &x, 4) {
            continue;
        }
        checked += 1;
        let targets = random_targets(4, &mut rng);
        let lg = critic_loss_and_grads(&c, &batch, &targets).unwrap();
        assert!(lg.mean_sigma.is_none());
        fd_check(c.params.values(), &lg.grad, 1e-5, |theta| {
            critic_loss_and_grads(&with_params(&c, theta), &batch, &targets)
                .unwrap()
                .loss
        });
    }
}

fn actor_fd(kind: CriticKind, twin: bool, seed: u64) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut checked = 0;
    while checked < 5 {
        let a = actor(&mut rng);
        let critics: Vec<_> = (0..if twin { 2 } else { 1 })
            .map(|_| critic(kind, &mut rng))
            .collect();
        let n = 4;
        let obs: Vec<f64> = (0..n * OBS).map(|_| rng.random_range(-1.5..1.5)).collect();
        let noise: Vec<f64> = (0..n * ACT)
            .map(|_| StandardNormal.sample(&mut rng))
            .collect();
        if near_kink(&a.spec, &a.params, &obs, n) {
            continue;
        }
        let (draw, _) = a.draw_with_noise(&obs, n, &noise).unwrap();
        let xs: Vec<_> = critics
            .iter()
            .map(|c| c.input(&obs, &draw.actions, n).unwrap())
            .collect();
        if critics
            .iter()
            .zip(&xs)
            .any(|(c, x)| near_kink(&c.spec, &c.params, x, n))
        {
            continue;
        }
        if twin {
            // keep the per-sample minimum away from ties
            let q: Vec<_> = critics
                .iter()
                .map(|c| c.predict(&obs, &draw.actions, n).unwrap().mean)
                .collect();
            if (0..n).any(|i| (q[0][i] - q[1][i]).abs() < 1e-3) {
                continue;
            }
        }
        checked += 1;
        let alpha = 0.2;
        let lg = actor_loss_with_noise(&a, &a.params, &critics, &obs, n, alpha, &noise).unwrap();
        fd_check(a.params.values(), &lg.grad, 1e-4, |theta| {
            let mut p = a.params.clone();
            p.values_mut().copy_from_slice(theta);
            actor_loss_with_noise(&a, &p, &critics, &obs, n, alpha, &noise)
                .unwrap()
                .loss
        });
    }
}

#[test]
fn actor_gradient_matches_finite_differences() {
    actor_fd(CriticKind::Distributional, false, 12);
}

#[test]
fn actor_gradient_with_scalar_critic_matches_finite_differences() {
    actor_fd(CriticKind::Scalar, false, 13);
}

#[test]
fn actor_gradient_with_twin_critics_matches_finite_differences() {
    actor_fd(CriticKind::Distributional, true, 14);
}

#[test]
fn matching_prediction_gives_zero_loss_and_gradient() {
    let mut rng = ChaCha8Rng::seed_from_u64(15);
    for kind in [CriticKind::Distributional, CriticKind::Scalar] {
        let c = critic(kind, &mut rng);
        let batch = random_batch(5, 0, &mut rng);
        let out = c.predict(&batch.obs, &batch.actions, 5).unwrap();
        let targets: Vec<_> = out
            .mean
            .iter()
            .zip(&out.sigma)
            .map(|(&mean, &std)| GaussianReturn { mean, std })
            .collect();
        let lg = critic_loss_and_grads(&c, &batch, &targets).unwrap();
        assert_eq!(lg.loss, 0.0);
        assert!(lg.grad.iter().all(|g| g.abs() < 1e-15), "{kind:?}");
    }
}

fn zero_head(c: &mut CriticNet, out: usize, bias: f64) {
    let last = c.spec.layers().pop().unwrap();
    let width = c.spec.output_dim();
    let w = last.weights();
    let fan_in = last.fan_in;
    let values = c.params.values_mut();
    for v in &mut values[w.start + out * fan_in..][..fan_in] {
        *v = 0.0;
    }
    values[last.bias().start + out] = bias;
    assert!(out < width);
}

#[test]
fn mean_head_gradient_at_the_sigma_ceiling() {
    let mut rng = ChaCha8Rng::seed_from_u64(16);
    let mut c = critic(CriticKind::Distributional, &mut rng);
    zero_head(&mut c, 1, 1e4);
    let batch = random_batch(64, 0, &mut rng);
    let out = c.predict(&batch.obs, &batch.actions, 64).unwrap();
    assert!(out.sigma.iter().all(|&s| s == 1000.0));
    // targets within 2 of the prediction
    let targets: Vec<_> = out
        .mean
        .iter()
        .map(|&q| GaussianReturn {
            mean: q + rng.random_range(-2.0..2.0),
            std: rng.random_range(0.0..5.0),
        })
        .collect();
    let lg = critic_loss_and_grads(&c, &batch, &targets).unwrap();
    for g in &lg.mean_head_grads {
        assert!(g.abs() <= 0.002, "{g}");
    }
    assert_eq!(lg.mean_sigma, Some(1000.0));
}

#[test]
fn mean_head_gradient_shrinks_as_sigma_grows() {
    let target = GaussianReturn {
        mean: 0.0,
        std: 0.5,
    };
    let mut prev = f64::INFINITY;
    for k in 0..60 {
        let sigma = 0.01 * 10f64.powf(k as f64 / 12.0);
        let g = grad_mean(
            &GaussianReturn {
                mean: 1.5,
                std: sigma,
            },
            &target,
        )
        .unwrap();
        assert!(g.abs() <= 2.0 / sigma);
        assert!(g < prev);
        prev = g;
    }
}

#[test]
fn target_rules() {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let a = actor(&mut rng);
    let c = critic(CriticKind::Distributional, &mut rng);
    let batch = random_batch(6, 3, &mut rng);
    let t = critic_targets(&batch, std::slice::from_ref(&c), &a, 0.2, 0.99, &mut rng).unwrap();
    for i in [0, 3] {
        assert_eq!(t[i], GaussianReturn::dirac(batch.rewards[i]));
    }
    let mut terminal = batch.clone();
    terminal.rewards[0] = 2.0;
    let t = critic_targets(&terminal, std::slice::from_ref(&c), &a, 0.2, 0.99, &mut rng).unwrap();
    assert_eq!(
        t[0],
        GaussianReturn {
            mean: 2.0,
            std: 0.0
        }
    );

    let t = critic_targets(&batch, std::slice::from_ref(&c), &a, 0.2, 0.0, &mut rng).unwrap();
    for (ti, r) in t.iter().zip(&batch.rewards) {
        assert_eq!(*ti, GaussianReturn { mean: *r, std: 0.0 });
    }

    // σ̄ ≡ 1 through a zeroed std head on the target network
    let mut unit = c.clone();
    let mut tmp = unit.clone();
    zero_head(&mut tmp, 1, 0.541_324_854_612_918_1);
    unit.target = tmp.params.clone();
    let mut det = a.clone();
    let last = det.spec.layers().pop().unwrap();
    let values = det.params.values_mut();
    for v in &mut values[last.weights().start + ACT * last.fan_in..last.weights().end] {
        *v = 0.0;
    }
    values[last.bias().start + ACT] = -20.0;
    values[last.bias().start + ACT + 1] = -20.0;
    let t = critic_targets(&batch, &[unit], &det, 0.0, 0.9, &mut rng).unwrap();
    for (i, ti) in t.iter().enumerate() {
        if !batch.terminals[i] {
            assert!((ti.std - 0.9).abs() < 1e-14, "{}", ti.std);
        }
    }
}

#[test]
fn targets_ignore_online_parameters() {
    let mut rng = ChaCha8Rng::seed_from_u64(18);
    let a = actor(&mut rng);
    let c = critic(CriticKind::Distributional, &mut rng);
    let batch = random_batch(8, 4, &mut rng);
    let t1 = critic_targets(
        &batch,
        std::slice::from_ref(&c),
        &a,
        0.2,
        0.99,
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    let mut perturbed = c.clone();
    for v in perturbed.params.values_mut() {
        *v += rng.random_range(-1.0..1.0);
    }
    let t2 = critic_targets(
        &batch,
        &[perturbed],
        &a,
        0.2,
        0.99,
        &mut ChaCha8Rng::seed_from_u64(1),
    )
    .unwrap();
    assert_eq!(t1, t2);
}

#[test]
fn actor_ignores_a_constant_critic_without_entropy() {
    let mut rng = ChaCha8Rng::seed_from_u64(19);
    let a = actor(&mut rng);
    let mut c = critic(CriticKind::Distributional, &mut rng);
    let q = 3.5;
    for v in c.params.values_mut() {
        *v = 0.0;
    }
    zero_head(&mut c, 0, q);
    let obs: Vec<f64> = (0..4 * OBS).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noise: Vec<f64> = (0..4 * ACT)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let lg = actor_loss_with_noise(&a, &a.params, &[c], &obs, 4, 0.0, &noise).unwrap();
    assert_eq!(lg.loss, -q);
    assert!(lg.grad.iter().all(|g| *g == 0.0));
}

#[test]
fn entropy_share_grows_with_alpha() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let a = actor(&mut rng);
    let c = critic(CriticKind::Distributional, &mut rng);
    let obs: Vec<f64> = (0..8 * OBS).map(|_| rng.random_range(-1.0..1.0)).collect();
    let noise: Vec<f64> = (0..8 * ACT)
        .map(|_| StandardNormal.sample(&mut rng))
        .collect();
    let (draw, _) = a.draw_with_noise(&obs, 8, &noise).unwrap();
    let mean_lp = draw.log_probs.iter().sum::<f64>() / 8.0;
    let base = actor_loss_with_noise(
        &a,
        &a.params,
        std::slice::from_ref(&c),
        &obs,
        8,
        0.0,
        &noise,
    )
    .unwrap()
    .loss;
    let mut prev_share = 0.0;
    for alpha in [0.05, 0.1, 0.2, 0.5, 1.0] {
        let loss = actor_loss_with_noise(
            &a,
            &a.params,
            std::slice::from_ref(&c),
            &obs,
            8,
            alpha,
            &noise,
        )
        .unwrap()
        .loss;
        let bonus = loss - base;
        assert!((bonus - alpha * mean_lp).abs() < 1e-12);
        let share = bonus.abs() / (bonus.abs() + base.abs());
        assert!(share > prev_share);
        prev_share = share;
    }
}

#[test]
fn perfect_scalar_critic_on_single_transition() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let c = critic(CriticKind::Scalar, &mut rng);
    let batch = random_batch(1, 0, &mut rng);
    let q = c.predict(&batch.obs, &batch.actions, 1).unwrap().mean[0];
    let lg = critic_loss_and_grads(&c, &batch, &[GaussianReturn::dirac(q)]).unwrap();
    assert_eq!(lg.loss, 0.0);
}

#[test]
fn uniform_selection_passes_chi_square() {
    let n = 100_000;
    let mut buf = ReplayBuffer::new(n, 1, 1).unwrap();
    for k in 0..n {
        buf.push(&TransitionRecord {
            obs: vec![k as f64],
            action: vec![0.0],
            reward: k as f64,
            next_obs: vec![0.0],
            terminal: false,
        })
        .unwrap();
    }
    let mut counts = vec![0u32; n];
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    let draws = 10 * n;
    for _ in 0..draws / 1000 {
        for r in buf.sample(1000, &mut rng).unwrap().rewards {
            counts[r as usize] += 1;
        }
    }
    let expected = draws as f64 / n as f64;
    let stat: f64 = counts
        .iter()
        .map(|&c| (c as f64 - expected).powi(2) / expected)
        .sum();
    let p = 1.0 - ChiSquared::new((n - 1) as f64).unwrap().cdf(stat);
    assert!(p > 1e-3, "chi-square {stat}, p {p}");
}

#[test]
fn full_runs_are_bit_reproducible() {
    let env = EnvConfig::NoisyChain(NoisyChainParams {
        noise_std: 3.0,
        ..Default::default()
    });
    let cfg = AgentConfig {
        algo: Algo::Cdsac,
        total_steps: 300,
        batch_size: 32,
        initial_random_steps: 50,
        eval_interval: 100,
        eval_episodes: 3,
        log_interval: 50,
        actor_hidden: vec![16, 16],
        critic_hidden: vec![16, 16],
        seed: 9,
        ..AgentConfig::default()
    };
    let mut a = Trainer::new(env.clone(), cfg.clone()).unwrap();
    let mut b = Trainer::new(env, cfg).unwrap();
    let (la, lb) = (a.run().unwrap(), b.run().unwrap());
    assert_eq!(la.to_jsonl(), lb.to_jsonl());
    assert_eq!(a.checkpoint(), b.checkpoint());
    let ra: Vec<_> = a.buffer().iter_ordered().collect();
    let rb: Vec<_> = b.buffer().iter_ordered().collect();
    assert_eq!(ra, rb);
    assert_eq!(la.evals().len(), 3);
}
