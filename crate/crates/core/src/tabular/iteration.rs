//! Policy evaluation, improvement and the iteration schemes built on them.
//!
//! Every evaluation loop stops once the successive sup-norm change `Δ`
//! satisfies `Δ·max(1, γ/(1−γ)) < tol`. This implies `Δ < tol` and, by the
//! γ-contraction of the backups, also bounds the distance of the returned
//! iterate to the true fixed point by `tol`.

use super::dist::{sup_energy_distance, DiscreteReturnDist, ReturnTable};
use super::operators::{dist_soft_bellman, soft_bellman_operator_q};
use super::{FiniteMdp, QTable, TabularError, TabularPolicy};

/// Cap on outer improvement steps and on sweeps of any evaluation loop.
pub const MAX_ITERATIONS: usize = 1_000_000;

const MAX_OUTER: usize = 10_000;
const MAX_ENUMERATED_POLICIES: u128 = 1_000_000;

fn check_tol(tol: f64) -> Result<(), TabularError> {
    if tol.is_finite() && tol > 0.0 {
        Ok(())
    } else {
        Err(TabularError::InvalidArgument(format!(
            "tol must be > 0, got {tol}"
        )))
    }
}

fn check_positive_alpha(alpha: f64) -> Result<(), TabularError> {
    if alpha.is_finite() && alpha > 0.0 {
        Ok(())
    } else {
        Err(TabularError::InvalidArgument(format!(
            "alpha must be > 0, got {alpha}"
        )))
    }
}

fn stop_factor(gamma: f64) -> f64 {
    (gamma / (1.0 - gamma)).max(1.0)
}

fn cap_error(iterations: usize, residual: f64, policy: &TabularPolicy) -> TabularError {
    TabularError::IterationCap {
        iterations,
        residual,
        last_policy: Box::new(policy.clone()),
    }
}

fn evaluate_from(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    alpha: f64,
    tol: f64,
    start: QTable,
) -> Result<QTable, TabularError> {
    let factor = stop_factor(mdp.discount());
    let mut q = start;
    let mut change = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let next = soft_bellman_operator_q(mdp, policy, &q, alpha)?;
        change = next.sup_distance(&q);
        q = next;
        if change * factor < tol {
            return Ok(q);
        }
    }
    Err(cap_error(MAX_ITERATIONS, change, policy))
}

/// Soft state-action value `Q_h^π` by iterating the soft backup from zero.
pub fn policy_evaluation(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    alpha: f64,
    tol: f64,
) -> Result<QTable, TabularError> {
    check_tol(tol)?;
    evaluate_from(mdp, policy, alpha, tol, QTable::for_mdp(mdp))
}

/// `π(a|s) ∝ exp(Q(s,a)/α)`, computed with the row maximum subtracted.
pub fn soft_policy_improvement(
    mdp: &FiniteMdp,
    q: &QTable,
    alpha: f64,
) -> Result<TabularPolicy, TabularError> {
    check_positive_alpha(alpha)?;
    q.check_shape(mdp)?;
    let mut probs = Vec::with_capacity(mdp.n_states() * mdp.n_actions());
    for s in 0..mdp.n_states() {
        let row = q.row(s);
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let weights: Vec<f64> = row.iter().map(|v| ((v - max) / alpha).exp()).collect();
        let total: f64 = weights.iter().sum();
        probs.extend(weights.iter().map(|w| w / total));
    }
    TabularPolicy::new(mdp.n_states(), mdp.n_actions(), probs)
}

/// Deterministic greedy policy; among actions within `tie_tol` of the row
/// maximum the smallest index wins.
pub fn greedy_policy(q: &QTable, tie_tol: f64) -> TabularPolicy {
    let actions: Vec<usize> = (0..q.n_states())
        .map(|s| {
            let row = q.row(s);
            let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            row.iter().position(|v| *v >= max - tie_tol).unwrap_or(0)
        })
        .collect();
    TabularPolicy::deterministic(q.n_actions(), &actions)
}

#[derive(Debug, Clone, PartialEq)]
pub struct SoftPiResult {
    pub policy: TabularPolicy,
    pub q: QTable,
    /// `Q_h^{π_k}` for every evaluated policy, starting from the uniform one.
    pub history: Vec<QTable>,
}

/// Soft policy iteration from the uniform policy. Each evaluation is
/// accurate to `tol / 100`; iteration stops when the policy moves less
/// than `tol` in sup norm.
pub fn soft_policy_iteration(
    mdp: &FiniteMdp,
    alpha: f64,
    tol: f64,
) -> Result<SoftPiResult, TabularError> {
    check_positive_alpha(alpha)?;
    check_tol(tol)?;
    let mut policy = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let mut q = QTable::for_mdp(mdp);
    let mut history = Vec::new();
    let mut change = f64::INFINITY;
    for _ in 0..MAX_OUTER {
        q = evaluate_from(mdp, &policy, alpha, tol * 1e-2, q)?;
        history.push(q.clone());
        let next = soft_policy_improvement(mdp, &q, alpha)?;
        change = next.sup_distance(&policy);
        policy = next;
        if change < tol {
            return Ok(SoftPiResult { policy, q, history });
        }
    }
    Err(cap_error(MAX_OUTER, change, &policy))
}

/// Fixed point of `Q(s,a) ← r + γ E_{s'}[α log Σ_{a'} exp(Q(s',a')/α)]`,
/// accurate to `tol` in sup norm.
pub fn soft_value_iteration_oracle(
    mdp: &FiniteMdp,
    alpha: f64,
    tol: f64,
) -> Result<QTable, TabularError> {
    check_positive_alpha(alpha)?;
    check_tol(tol)?;
    value_iteration(mdp, tol, |row| {
        let max = row.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = row.iter().map(|v| ((v - max) / alpha).exp()).sum();
        max + alpha * sum.ln()
    })
}

/// Fixed point of the hard optimality backup, accurate to `tol`.
pub fn classical_value_iteration(mdp: &FiniteMdp, tol: f64) -> Result<QTable, TabularError> {
    check_tol(tol)?;
    value_iteration(mdp, tol, |row| {
        row.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    })
}

fn value_iteration(
    mdp: &FiniteMdp,
    tol: f64,
    state_value: impl Fn(&[f64]) -> f64,
) -> Result<QTable, TabularError> {
    let factor = stop_factor(mdp.discount());
    let mut q = QTable::for_mdp(mdp);
    let mut change = f64::INFINITY;
    for _ in 0..MAX_ITERATIONS {
        let v: Vec<f64> = (0..mdp.n_states())
            .map(|s| {
                if mdp.is_terminal(s) {
                    0.0
                } else {
                    state_value(q.row(s))
                }
            })
            .collect();
        let mut next = QTable::for_mdp(mdp);
        for s in 0..mdp.n_states() {
            for a in 0..mdp.n_actions() {
                let r = mdp.reward(s, a);
                if mdp.is_terminal(s) {
                    next.set(s, a, r);
                    continue;
                }
                let ev: f64 = mdp
                    .next_states(s, a)
                    .iter()
                    .zip(&v)
                    .map(|(p, x)| p * x)
                    .sum();
                next.set(s, a, r + mdp.discount() * ev);
            }
        }
        change = next.sup_distance(&q);
        q = next;
        if change * factor < tol {
            return Ok(q);
        }
    }
    Err(cap_error(
        MAX_ITERATIONS,
        change,
        &TabularPolicy::uniform(mdp.n_states(), mdp.n_actions()),
    ))
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClassicalPiResult {
    pub policy: TabularPolicy,
    pub q: QTable,
    pub history: Vec<QTable>,
}

/// Greedy policy iteration from the all-zeros deterministic policy. Values
/// are evaluated to `tol / 10` and ties within `tol` go to the smallest
/// action index; stops when the greedy policy repeats.
pub fn classical_policy_iteration(
    mdp: &FiniteMdp,
    tol: f64,
) -> Result<ClassicalPiResult, TabularError> {
    check_tol(tol)?;
    let mut policy = TabularPolicy::deterministic(mdp.n_actions(), &vec![0; mdp.n_states()]);
    let mut history = Vec::new();
    for _ in 0..MAX_OUTER {
        let q = evaluate_from(mdp, &policy, 0.0, tol * 0.1, QTable::for_mdp(mdp))?;
        history.push(q.clone());
        let next = greedy_policy(&q, tol);
        if next == policy {
            return Ok(ClassicalPiResult { policy, q, history });
        }
        policy = next;
    }
    Err(cap_error(MAX_OUTER, f64::NAN, &policy))
}

/// Entrywise maximum of `Q^π` over every deterministic policy, and the
/// greedy policy of that table. Each evaluation is accurate to `tol / 10`.
pub fn brute_force_optimal(
    mdp: &FiniteMdp,
    tol: f64,
) -> Result<(TabularPolicy, QTable), TabularError> {
    check_tol(tol)?;
    let (n_s, n_a) = (mdp.n_states(), mdp.n_actions());
    let count = (n_a as u128).checked_pow(n_s as u32).unwrap_or(u128::MAX);
    if count > MAX_ENUMERATED_POLICIES {
        return Err(TabularError::InvalidArgument(format!(
            "{n_a}^{n_s} deterministic policies is too many to enumerate"
        )));
    }
    let mut best = QTable::from_values(n_s, n_a, vec![f64::NEG_INFINITY; n_s * n_a])?;
    let mut actions = vec![0usize; n_s];
    loop {
        let policy = TabularPolicy::deterministic(n_a, &actions);
        let q = evaluate_from(mdp, &policy, 0.0, tol * 0.1, QTable::for_mdp(mdp))?;
        for s in 0..n_s {
            for a in 0..n_a {
                if q.get(s, a) > best.get(s, a) {
                    best.set(s, a, q.get(s, a));
                }
            }
        }
        // odometer increment over action assignments
        let mut i = 0;
        while i < n_s {
            actions[i] += 1;
            if actions[i] < n_a {
                break;
            }
            actions[i] = 0;
            i += 1;
        }
        if i == n_s {
            break;
        }
    }
    Ok((greedy_policy(&best, tol), best))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistEvaluation {
    pub table: ReturnTable,
    pub iterations: usize,
    /// `d̄_e` between the last two iterates.
    pub residual: f64,
}

/// Iterates the distributional soft backup from `z0`, projecting any entry
/// with more than `atom_cap` atoms onto a uniform grid of `atom_cap` points.
/// Stops on the same rule as the scalar loops, measured in `d̄_e`.
pub fn dist_policy_evaluation(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    alpha: f64,
    z0: ReturnTable,
    tol: f64,
    atom_cap: usize,
) -> Result<DistEvaluation, TabularError> {
    check_tol(tol)?;
    if atom_cap < 2 {
        return Err(TabularError::InvalidArgument(format!(
            "atom_cap must be >= 2, got {atom_cap}"
        )));
    }
    let factor = stop_factor(mdp.discount());
    let mut z = z0;
    let mut residual = f64::INFINITY;
    for k in 1..=MAX_ITERATIONS {
        let next = dist_soft_bellman(mdp, policy, &z, alpha)?.map(|d| d.project_uniform(atom_cap));
        residual = sup_energy_distance(&next, &z)?;
        z = next;
        if residual * factor < tol {
            return Ok(DistEvaluation {
                table: z,
                iterations: k,
                residual,
            });
        }
    }
    Err(cap_error(MAX_ITERATIONS, residual, policy))
}

#[derive(Debug, Clone, PartialEq)]
pub struct DistPiResult {
    pub policy: TabularPolicy,
    pub table: ReturnTable,
    pub iterations: usize,
}

/// Distributional soft policy iteration: evaluation of `Z` (warm-started,
/// projected at `atom_cap`) alternates with soft improvement on `E[Z]`,
/// until the policy moves less than `tol`.
pub fn dist_soft_policy_iteration(
    mdp: &FiniteMdp,
    alpha: f64,
    tol: f64,
    atom_cap: usize,
) -> Result<DistPiResult, TabularError> {
    check_positive_alpha(alpha)?;
    check_tol(tol)?;
    if atom_cap < 16 {
        return Err(TabularError::InvalidArgument(format!(
            "atom_cap must be >= 16, got {atom_cap}"
        )));
    }
    let mut policy = TabularPolicy::uniform(mdp.n_states(), mdp.n_actions());
    let mut z = ReturnTable::filled(
        mdp.n_states(),
        mdp.n_actions(),
        DiscreteReturnDist::dirac(0.0),
    );
    let mut change = f64::INFINITY;
    for k in 1..=MAX_OUTER {
        z = dist_policy_evaluation(mdp, &policy, alpha, z, tol * 1e-2, atom_cap)?.table;
        let next = soft_policy_improvement(mdp, &z.mean_table(), alpha)?;
        change = next.sup_distance(&policy);
        policy = next;
        if change < tol {
            return Ok(DistPiResult {
                policy,
                table: z,
                iterations: k,
            });
        }
    }
    Err(cap_error(MAX_OUTER, change, &policy))
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn single_action_mdp(reward: f64, gamma: f64) -> FiniteMdp {
        FiniteMdp::new(1, 1, vec![1.0], vec![reward], vec![false], gamma, 1).unwrap()
    }

    #[test]
    fn evaluation_of_chain() {
        let mdp = FiniteMdp::chain(3, 1.0, 0.9).unwrap();
        let pi = TabularPolicy::uniform(3, 1);
        let q = policy_evaluation(&mdp, &pi, 0.0, 1e-12).unwrap();
        assert!((q.get(0, 0) - 1.9).abs() < 1e-12);
        assert!((q.get(1, 0) - 1.0).abs() < 1e-12);
        assert_eq!(q.get(2, 0), 0.0);
    }

    #[test]
    fn evaluation_with_zero_discount_is_reward() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mdp = FiniteMdp::random(4, 2, 1, 0.0, &mut rng).unwrap();
        let pi = TabularPolicy::random(4, 2, &mut rng);
        let q = policy_evaluation(&mdp, &pi, 0.3, 1e-9).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                assert_eq!(q.get(s, a), mdp.reward(s, a));
            }
        }
    }

    #[test]
    fn evaluation_is_a_fixed_point_and_matches_geometric_sum() {
        let q = policy_evaluation(
            &single_action_mdp(1.0, 0.99),
            &TabularPolicy::uniform(1, 1),
            0.0,
            1e-10,
        )
        .unwrap();
        // rounding of the fixed point near 100 adds ~ulp/(1−γ)
        assert!((q.get(0, 0) - 100.0).abs() < 1e-10 + 1e-11);

        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let mdp = FiniteMdp::random(5, 3, 1, 0.9, &mut rng).unwrap();
        let pi = TabularPolicy::random(5, 3, &mut rng);
        let q = policy_evaluation(&mdp, &pi, 0.2, 1e-10).unwrap();
        let again = soft_bellman_operator_q(&mdp, &pi, &q, 0.2).unwrap();
        assert!(again.sup_distance(&q) < 1e-10);
    }

    #[test]
    fn bellman_iterates_converge_geometrically() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        for &gamma in &[0.5, 0.9] {
            let mdp = FiniteMdp::random(5, 2, 1, gamma, &mut rng).unwrap();
            let pi = TabularPolicy::random(5, 2, &mut rng);
            let fixed = policy_evaluation(&mdp, &pi, 0.0, 1e-13).unwrap();
            let mut q = QTable::random(5, 2, 3.0, &mut rng);
            let d0 = q.sup_distance(&fixed);
            for k in 1..=30 {
                q = soft_bellman_operator_q(&mdp, &pi, &q, 0.0).unwrap();
                assert!(q.sup_distance(&fixed) <= gamma.powi(k) * d0 + 1e-12);
            }
        }
    }

    #[test]
    fn improvement_edge_cases() {
        let mdp = FiniteMdp::random(3, 4, 0, 0.9, &mut ChaCha8Rng::seed_from_u64(1)).unwrap();
        let flat = QTable::from_values(3, 4, vec![2.5; 12]).unwrap();
        let pi = soft_policy_improvement(&mdp, &flat, 0.7).unwrap();
        assert_eq!(pi, TabularPolicy::uniform(3, 4));

        let mut q = QTable::zeros(3, 4);
        q.set(1, 2, 0.1);
        let sharp = soft_policy_improvement(&mdp, &q, 1e-6).unwrap();
        assert!(sharp.prob(1, 2) >= 1.0 - 1e-6);

        // large values must not overflow
        let huge = QTable::from_values(3, 4, vec![1e6; 12]).unwrap();
        let pi = soft_policy_improvement(&mdp, &huge, 1e-3).unwrap();
        assert_eq!(pi, TabularPolicy::uniform(3, 4));
        assert!(soft_policy_improvement(&mdp, &q, 0.0).is_err());
    }

    #[test]
    fn one_step_soft_improvement() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        for _ in 0..50 {
            let mdp = FiniteMdp::random(4, 3, 1, 0.9, &mut rng).unwrap();
            let pi = TabularPolicy::random(4, 3, &mut rng);
            let alpha = 0.2;
            let q = policy_evaluation(&mdp, &pi, alpha, 1e-12).unwrap();
            let next = soft_policy_improvement(&mdp, &q, alpha).unwrap();
            let soft_v = |p: &TabularPolicy, s: usize| -> f64 {
                (0..3).map(|a| p.prob(s, a) * q.get(s, a)).sum::<f64>() + alpha * p.entropy(s)
            };
            for s in 0..4 {
                assert!(soft_v(&next, s) >= soft_v(&pi, s) - 1e-12);
            }
        }
    }

    #[test]
    fn single_state_soft_iteration_converges_immediately() {
        let res = soft_policy_iteration(&single_action_mdp(0.5, 0.9), 0.2, 1e-10).unwrap();
        assert_eq!(res.history.len(), 1);
        assert!((res.q.get(0, 0) - 5.0).abs() < 1e-9);
    }

    #[test]
    fn soft_iteration_matches_oracle_and_improves_monotonically() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        for _ in 0..10 {
            let mdp = FiniteMdp::random(5, 3, 1, 0.9, &mut rng).unwrap();
            let res = soft_policy_iteration(&mdp, 0.2, 1e-10).unwrap();
            let oracle = soft_value_iteration_oracle(&mdp, 0.2, 1e-12).unwrap();
            assert!(res.q.sup_distance(&oracle) < 1e-6);
            for pair in res.history.windows(2) {
                assert!(pair[0].max_decrease_to(&pair[1]) <= 1e-10);
            }
        }
    }

    #[test]
    fn oracle_limits() {
        let mut rng = ChaCha8Rng::seed_from_u64(30);
        let zero = FiniteMdp::random(3, 2, 0, 0.0, &mut rng).unwrap();
        let q = soft_value_iteration_oracle(&zero, 0.5, 1e-12).unwrap();
        for s in 0..3 {
            for a in 0..2 {
                assert_eq!(q.get(s, a), zero.reward(s, a));
            }
        }

        let chain = FiniteMdp::chain(4, 0.3, 0.8).unwrap();
        let single = soft_value_iteration_oracle(&chain, 0.5, 1e-12).unwrap();
        let eval = policy_evaluation(&chain, &TabularPolicy::uniform(4, 1), 0.5, 1e-12).unwrap();
        assert!(single.sup_distance(&eval) < 1e-11);

        let mdp = FiniteMdp::random(5, 3, 1, 0.9, &mut rng).unwrap();
        let hard = classical_value_iteration(&mdp, 1e-12).unwrap();
        for &alpha in &[1e-2, 1e-3, 1e-4] {
            let soft = soft_value_iteration_oracle(&mdp, alpha, 1e-12).unwrap();
            // soft value exceeds the hard one by at most α log|A| per step
            let bound = alpha * 3f64.ln() * 0.9 / (1.0 - 0.9);
            let gap = soft.sup_distance(&hard);
            assert!(gap <= bound + 1e-10, "alpha {alpha}: gap {gap} > {bound}");
            assert!(soft.max_decrease_to(&hard) <= 1e-10);
        }
    }

    #[test]
    fn classical_iteration_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(40);
        for _ in 0..10 {
            let mdp = FiniteMdp::random(5, 3, 1, 0.9, &mut rng).unwrap();
            let res = classical_policy_iteration(&mdp, 1e-9).unwrap();
            let (brute_pi, brute_q) = brute_force_optimal(&mdp, 1e-9).unwrap();
            assert_eq!(res.policy, brute_pi);
            assert!(res.q.sup_distance(&brute_q) < 1e-9);
            for pair in res.history.windows(2) {
                assert!(pair[0].max_decrease_to(&pair[1]) <= 1e-9);
            }
            let hard = classical_value_iteration(&mdp, 1e-11).unwrap();
            assert!(res.q.sup_distance(&hard) < 1e-9);
        }
    }

    #[test]
    fn classical_iteration_single_action() {
        let chain = FiniteMdp::chain(3, 1.0, 0.9).unwrap();
        let res = classical_policy_iteration(&chain, 1e-10).unwrap();
        assert_eq!(res.policy, TabularPolicy::uniform(3, 1));
        assert!((res.q.get(0, 0) - 1.9).abs() < 1e-10);
    }

    #[test]
    fn enumeration_refuses_huge_instances() {
        let mdp = FiniteMdp::random(30, 3, 1, 0.9, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        assert!(matches!(
            brute_force_optimal(&mdp, 1e-6),
            Err(TabularError::InvalidArgument(_))
        ));
    }

    fn deterministic_cycle(n: usize, gamma: f64, rng: &mut ChaCha8Rng) -> FiniteMdp {
        use rand::Rng;
        let mut transition = vec![0.0; n * 2 * n];
        let mut reward = Vec::new();
        for s in 0..n {
            for a in 0..2 {
                transition[(s * 2 + a) * n + (s + 1 + a) % n] = 1.0;
                reward.push(rng.random_range(-1.0..1.0));
            }
        }
        FiniteMdp::new(n, 2, transition, reward, vec![false; n], gamma, 1).unwrap()
    }

    #[test]
    fn deterministic_evaluation_collapses_to_single_atoms() {
        let mut rng = ChaCha8Rng::seed_from_u64(50);
        let mdp = deterministic_cycle(4, 0.8, &mut rng);
        let pi = TabularPolicy::deterministic(2, &[0, 1, 1, 0]);
        let z0 = ReturnTable::random(4, 2, 3, 1.0, &mut rng);
        let res = dist_policy_evaluation(&mdp, &pi, 0.0, z0, 1e-12, 64).unwrap();
        let q = policy_evaluation(&mdp, &pi, 0.0, 1e-12).unwrap();
        for s in 0..4 {
            for a in 0..2 {
                let d = res.table.get(s, a);
                assert_eq!(d.len(), 1);
                assert!((d.atoms()[0] - q.get(s, a)).abs() < 1e-11);
            }
        }
    }

    #[test]
    fn unprojected_evaluation_contracts_towards_fixed_point() {
        let mut rng = ChaCha8Rng::seed_from_u64(51);
        let mdp = deterministic_cycle(5, 0.9, &mut rng);
        let pi = TabularPolicy::deterministic(2, &[1, 0, 0, 1, 1]);
        let q = policy_evaluation(&mdp, &pi, 0.2, 1e-13).unwrap();
        let fixed = ReturnTable::new(
            5,
            2,
            q.values()
                .iter()
                .map(|v| DiscreteReturnDist::dirac(*v))
                .collect(),
        )
        .unwrap();
        let mut z = ReturnTable::random(5, 2, 4, 2.0, &mut rng);
        for _ in 0..20 {
            let before = sup_energy_distance(&z, &fixed).unwrap();
            z = dist_soft_bellman(&mdp, &pi, &z, 0.2).unwrap();
            let after = sup_energy_distance(&z, &fixed).unwrap();
            assert!(after <= 0.9 * before + 1e-12);
        }
    }

    #[test]
    fn projected_evaluation_is_unique_and_mean_exact() {
        let mut rng = ChaCha8Rng::seed_from_u64(52);
        let mdp = FiniteMdp::random(4, 2, 1, 0.9, &mut rng).unwrap();
        let pi = TabularPolicy::random(4, 2, &mut rng);
        let tol = 1e-9;
        let a = dist_policy_evaluation(
            &mdp,
            &pi,
            0.2,
            ReturnTable::random(4, 2, 3, 1.0, &mut rng),
            tol,
            64,
        )
        .unwrap();
        let b = dist_policy_evaluation(
            &mdp,
            &pi,
            0.2,
            ReturnTable::random(4, 2, 5, 4.0, &mut rng),
            tol,
            64,
        )
        .unwrap();
        assert!(a.table.max_atoms() <= 64);
        assert!(sup_energy_distance(&a.table, &b.table).unwrap() <= 2.0 * tol);
        let q = policy_evaluation(&mdp, &pi, 0.2, 1e-12).unwrap();
        assert!(a.table.mean_table().sup_distance(&q) < 1e-8);
    }

    #[test]
    fn dist_iteration_matches_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(60);
        for _ in 0..3 {
            let mdp = FiniteMdp::random(4, 2, 1, 0.9, &mut rng).unwrap();
            let res = dist_soft_policy_iteration(&mdp, 0.2, 1e-8, 32).unwrap();
            let oracle = soft_value_iteration_oracle(&mdp, 0.2, 1e-12).unwrap();
            assert!(res.table.mean_table().sup_distance(&oracle) < 1e-3);
        }
    }

    #[test]
    fn dist_iteration_validates_arguments() {
        let mdp = FiniteMdp::chain(3, 1.0, 0.9).unwrap();
        assert!(dist_soft_policy_iteration(&mdp, 0.2, 1e-6, 8).is_err());
        assert!(dist_soft_policy_iteration(&mdp, 0.0, 1e-6, 32).is_err());
        assert!(dist_soft_policy_iteration(&mdp, 0.2, 0.0, 32).is_err());
    }
}
