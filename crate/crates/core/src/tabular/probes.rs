//! Randomized certification probes over the tabular engine.
//!
//! Each probe draws its instances from its own ChaCha stream derived from the
//! caller's seed, so results do not depend on which probes run or in which
//! order.

use super::{
    brute_force_optimal, classical_policy_iteration, contraction_probe, dist_policy_evaluation,
    dist_soft_bellman, dist_soft_policy_iteration, policy_evaluation, soft_bellman_operator_q,
    soft_policy_improvement, soft_policy_iteration, soft_value_iteration_oracle,
    sup_energy_distance, FiniteMdp, QTable, ReturnTable, TabularError, TabularPolicy,
};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

const GAMMAS: [f64; 3] = [0.5, 0.9, 0.99];
const ALPHAS: [f64; 2] = [0.0, 0.2];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProbeReport {
    pub name: String,
    pub claim: String,
    pub instances: usize,
    /// Largest observed violation measure; the probe passes when this is at
    /// most `tolerance`.
    pub worst: f64,
    pub tolerance: f64,
    pub pass: bool,
}

pub type ProbeFn = fn(u64, usize) -> Result<ProbeReport, TabularError>;

/// Every probe, sorted by name.
pub fn catalog() -> Vec<(&'static str, ProbeFn)> {
    let mut all: Vec<(&'static str, ProbeFn)> = vec![
        ("bellman_contraction", bellman_contraction),
        (
            "classical_improvement_monotone",
            classical_improvement_monotone,
        ),
        (
            "classical_iteration_vs_enumeration",
            classical_iteration_vs_enumeration,
        ),
        ("distributional_contraction", distributional_contraction),
        (
            "distributional_iteration_vs_oracle",
            distributional_iteration_vs_oracle,
        ),
        ("expectation_consistency", expectation_consistency),
        ("fixed_point_uniqueness", fixed_point_uniqueness),
        ("one_step_soft_improvement", one_step_soft_improvement),
        ("soft_bellman_contraction", soft_bellman_contraction),
        ("soft_improvement_monotone", soft_improvement_monotone),
        ("soft_iteration_vs_oracle", soft_iteration_vs_oracle),
    ];
    all.sort_by_key(|(name, _)| *name);
    all
}

/// Runs every probe sequentially.
pub fn run_all(seed: u64, instances: usize) -> Result<Vec<ProbeReport>, TabularError> {
    catalog()
        .into_iter()
        .map(|(_, f)| f(seed, instances))
        .collect()
}

fn stream(seed: u64, name: &str) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    // FNV-1a of the probe name selects the stream
    let id = name.bytes().fold(0xcbf2_9ce4_8422_2325u64, |h, b| {
        (h ^ b as u64).wrapping_mul(0x100_0000_01b3)
    });
    rng.set_stream(id);
    rng
}

fn report(name: &str, claim: &str, instances: usize, worst: f64, tolerance: f64) -> ProbeReport {
    ProbeReport {
        name: name.into(),
        claim: claim.into(),
        instances,
        worst,
        tolerance,
        pass: worst <= tolerance,
    }
}

fn check_instances(instances: usize) -> Result<(), TabularError> {
    if instances == 0 {
        return Err(TabularError::InvalidArgument(
            "instance count must be >= 1".into(),
        ));
    }
    Ok(())
}

fn random_mdp(
    rng: &mut ChaCha8Rng,
    max_states: usize,
    max_actions: usize,
    gamma: f64,
) -> Result<FiniteMdp, TabularError> {
    let n_s = rng.random_range(2..=max_states);
    let n_a = rng.random_range(1..=max_actions);
    let n_terminal = rng.random_range(0..n_s);
    FiniteMdp::random(n_s, n_a, n_terminal, gamma, rng)
}

fn pick<T: Copy>(rng: &mut ChaCha8Rng, xs: &[T]) -> T {
    xs[rng.random_range(0..xs.len())]
}

fn distributional_contraction(seed: u64, instances: usize) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "distributional_contraction";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..instances {
        let gamma = GAMMAS[i % GAMMAS.len()];
        let alpha = ALPHAS[(i / GAMMAS.len()) % ALPHAS.len()];
        let mdp = random_mdp(&mut rng, 6, 3, gamma)?;
        let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
        let pi = TabularPolicy::random(n_s, n_a, &mut rng);
        let z1 = ReturnTable::random(n_s, n_a, 4, 3.0, &mut rng);
        let z2 = if rng.random_bool(0.5) {
            let c = rng.random_range(-2.0..2.0);
            z1.map(|d| d.affine(c, 1.0))
        } else {
            ReturnTable::random(n_s, n_a, 4, 3.0, &mut rng)
        };
        let ratio = match contraction_probe(&mdp, &pi, &z1, &z2, alpha) {
            Err(TabularError::ZeroDistance) => continue,
            r => r?,
        };
        worst = worst.max(ratio - gamma);
    }
    Ok(report(
        NAME,
        "distributional soft backup contracts d̄_e by γ: max(ratio − γ)",
        instances,
        worst,
        1e-9,
    ))
}

fn scalar_contraction(
    name: &str,
    seed: u64,
    instances: usize,
    alpha: f64,
) -> Result<ProbeReport, TabularError> {
    check_instances(instances)?;
    let mut rng = stream(seed, name);
    let mut worst = f64::NEG_INFINITY;
    for i in 0..instances {
        let gamma = GAMMAS[i % GAMMAS.len()];
        let mdp = random_mdp(&mut rng, 6, 3, gamma)?;
        let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
        let pi = TabularPolicy::random(n_s, n_a, &mut rng);
        let q1 = QTable::random(n_s, n_a, 5.0, &mut rng);
        let q2 = QTable::random(n_s, n_a, 5.0, &mut rng);
        let t1 = soft_bellman_operator_q(&mdp, &pi, &q1, alpha)?;
        let t2 = soft_bellman_operator_q(&mdp, &pi, &q2, alpha)?;
        worst = worst.max(t1.sup_distance(&t2) / q1.sup_distance(&q2) - gamma);
    }
    Ok(report(
        name,
        "scalar backup contracts the sup norm by γ: max(ratio − γ)",
        instances,
        worst,
        1e-9,
    ))
}

fn bellman_contraction(seed: u64, instances: usize) -> Result<ProbeReport, TabularError> {
    scalar_contraction("bellman_contraction", seed, instances, 0.0)
}

fn soft_bellman_contraction(seed: u64, instances: usize) -> Result<ProbeReport, TabularError> {
    scalar_contraction("soft_bellman_contraction", seed, instances, 0.2)
}

fn expectation_consistency(seed: u64, instances: usize) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "expectation_consistency";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mdp = random_mdp(&mut rng, 6, 3, GAMMAS[i % GAMMAS.len()])?;
        let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
        let alpha = ALPHAS[i % ALPHAS.len()];
        let pi = TabularPolicy::random(n_s, n_a, &mut rng);
        let z = ReturnTable::random(n_s, n_a, 4, 3.0, &mut rng);
        let dist_mean = dist_soft_bellman(&mdp, &pi, &z, alpha)?.mean_table();
        let scalar = soft_bellman_operator_q(&mdp, &pi, &z.mean_table(), alpha)?;
        worst = worst.max(dist_mean.sup_distance(&scalar));
    }
    Ok(report(
        NAME,
        "mean of the distributional backup equals the scalar soft backup of the means",
        instances,
        worst,
        1e-10,
    ))
}

fn classical_improvement_monotone(
    seed: u64,
    instances: usize,
) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "classical_improvement_monotone";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mdp = random_mdp(&mut rng, 8, 4, GAMMAS[i % GAMMAS.len()])?;
        let res = classical_policy_iteration(&mdp, 1e-9)?;
        for pair in res.history.windows(2) {
            worst = worst.max(pair[0].max_decrease_to(&pair[1]));
        }
    }
    Ok(report(
        NAME,
        "greedy policy iteration never decreases any Q entry",
        instances,
        worst,
        1e-9,
    ))
}

fn classical_iteration_vs_enumeration(
    seed: u64,
    instances: usize,
) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "classical_iteration_vs_enumeration";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let gamma = pick(&mut rng, &[0.5, 0.9]);
        let mdp = random_mdp(&mut rng, 5, 3, gamma)?;
        let res = classical_policy_iteration(&mdp, 1e-9)?;
        let (pi, q) = brute_force_optimal(&mdp, 1e-9)?;
        let gap = if res.policy == pi {
            res.q.sup_distance(&q)
        } else {
            f64::INFINITY
        };
        worst = worst.max(gap);
    }
    Ok(report(
        NAME,
        "policy iteration returns the enumerated optimal policy; sup |Q − Q*| (∞ on policy mismatch)",
        instances,
        worst,
        1e-9,
    ))
}

fn one_step_soft_improvement(seed: u64, instances: usize) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "one_step_soft_improvement";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let mut worst: f64 = 0.0;
    let alpha = 0.2;
    for i in 0..instances {
        let mdp = random_mdp(&mut rng, 6, 3, GAMMAS[i % 2])?;
        let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
        let pi = TabularPolicy::random(n_s, n_a, &mut rng);
        let q = policy_evaluation(&mdp, &pi, alpha, 1e-12)?;
        let next = soft_policy_improvement(&mdp, &q, alpha)?;
        let soft_v = |p: &TabularPolicy, s: usize| -> f64 {
            (0..n_a).map(|a| p.prob(s, a) * q.get(s, a)).sum::<f64>() + alpha * p.entropy(s)
        };
        for s in 0..n_s {
            worst = worst.max(soft_v(&pi, s) - soft_v(&next, s));
        }
    }
    Ok(report(
        NAME,
        "E_new[Q − α log π_new] ≥ E_old[Q − α log π_old] in every state",
        instances,
        worst,
        1e-10,
    ))
}

fn soft_improvement_monotone(seed: u64, instances: usize) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "soft_improvement_monotone";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mdp = random_mdp(&mut rng, 6, 3, GAMMAS[i % 2])?;
        let res = soft_policy_iteration(&mdp, 0.2, 1e-10)?;
        for pair in res.history.windows(2) {
            worst = worst.max(pair[0].max_decrease_to(&pair[1]));
        }
    }
    Ok(report(
        NAME,
        "soft policy iteration never decreases any soft Q entry",
        instances,
        worst,
        1e-10,
    ))
}

fn soft_iteration_vs_oracle(seed: u64, instances: usize) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "soft_iteration_vs_oracle";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mdp = FiniteMdp::random(5, 3, rng.random_range(0..2), GAMMAS[i % 2], &mut rng)?;
        let res = soft_policy_iteration(&mdp, 0.2, 1e-10)?;
        let oracle = soft_value_iteration_oracle(&mdp, 0.2, 1e-12)?;
        worst = worst.max(res.q.sup_distance(&oracle));
    }
    Ok(report(
        NAME,
        "soft policy iteration reaches the soft-optimal Q: sup gap to value iteration",
        instances,
        worst,
        1e-6,
    ))
}

fn distributional_iteration_vs_oracle(
    seed: u64,
    instances: usize,
) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "distributional_iteration_vs_oracle";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let mut worst: f64 = 0.0;
    for _ in 0..instances {
        let mdp = FiniteMdp::random(4, 2, 1, 0.9, &mut rng)?;
        let res = dist_soft_policy_iteration(&mdp, 0.2, 1e-8, 32)?;
        let oracle = soft_value_iteration_oracle(&mdp, 0.2, 1e-12)?;
        worst = worst.max(res.table.mean_table().sup_distance(&oracle));
    }
    Ok(report(
        NAME,
        "distributional soft policy iteration: sup |E[Z] − Q*_soft|",
        instances,
        worst,
        1e-3,
    ))
}

fn fixed_point_uniqueness(seed: u64, instances: usize) -> Result<ProbeReport, TabularError> {
    const NAME: &str = "fixed_point_uniqueness";
    check_instances(instances)?;
    let mut rng = stream(seed, NAME);
    let tol = 1e-9;
    let mut worst: f64 = 0.0;
    for i in 0..instances {
        let mdp = FiniteMdp::random(4, 2, 1, GAMMAS[i % 2], &mut rng)?;
        let pi = TabularPolicy::random(4, 2, &mut rng);
        let alpha = ALPHAS[i % ALPHAS.len()];
        let a = ReturnTable::random(4, 2, 3, 1.0, &mut rng);
        let b = ReturnTable::random(4, 2, 3, 5.0, &mut rng);
        let za = dist_policy_evaluation(&mdp, &pi, alpha, a, tol, 64)?.table;
        let zb = dist_policy_evaluation(&mdp, &pi, alpha, b, tol, 64)?.table;
        worst = worst.max(sup_energy_distance(&za, &zb)? / tol);
    }
    Ok(report(
        NAME,
        "evaluations from different starts agree: d̄_e / tol",
        instances,
        worst,
        2.0,
    ))
}
