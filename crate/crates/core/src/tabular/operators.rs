//! One-step backup operators on value and return-distribution tables.

use super::dist::{sup_energy_distance, DiscreteReturnDist, ReturnTable};
use super::{FiniteMdp, QTable, TabularError, TabularPolicy};

fn check_alpha(alpha: f64) -> Result<(), TabularError> {
    if alpha.is_finite() && alpha >= 0.0 {
        Ok(())
    } else {
        Err(TabularError::InvalidArgument(format!(
            "alpha must be >= 0, got {alpha}"
        )))
    }
}

fn check_return_table(mdp: &FiniteMdp, z: &ReturnTable) -> Result<(), TabularError> {
    if z.n_states() != mdp.n_states() || z.n_actions() != mdp.n_actions() {
        return Err(TabularError::ShapeMismatch(format!(
            "return table is {}x{}, mdp is {}x{}",
            z.n_states(),
            z.n_actions(),
            mdp.n_states(),
            mdp.n_actions()
        )));
    }
    Ok(())
}

/// `(𝒯^π Q)(s,a) = r(s,a) + γ Σ P(s'|s,a) Σ π(a'|s') Q(s',a')`.
pub fn bellman_operator_q(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    q: &QTable,
) -> Result<QTable, TabularError> {
    soft_bellman_operator_q(mdp, policy, q, 0.0)
}

/// Standard backup plus `γ α 𝓗(π(·|s'))` for every non-terminal successor.
pub fn soft_bellman_operator_q(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    q: &QTable,
    alpha: f64,
) -> Result<QTable, TabularError> {
    check_alpha(alpha)?;
    policy.check_shape(mdp)?;
    q.check_shape(mdp)?;
    let n_s = mdp.n_states();
    let n_a = mdp.n_actions();
    let soft_value: Vec<f64> = (0..n_s)
        .map(|s| {
            if mdp.is_terminal(s) {
                return 0.0;
            }
            let expected: f64 = (0..n_a).map(|a| policy.prob(s, a) * q.get(s, a)).sum();
            expected + alpha * policy.entropy(s)
        })
        .collect();

    let mut out = QTable::for_mdp(mdp);
    for s in 0..n_s {
        for a in 0..n_a {
            let r = mdp.reward(s, a);
            if mdp.is_terminal(s) {
                out.set(s, a, r);
                continue;
            }
            let next: f64 = mdp
                .next_states(s, a)
                .iter()
                .zip(&soft_value)
                .map(|(p, v)| p * v)
                .sum();
            out.set(s, a, r + mdp.discount() * next);
        }
    }
    Ok(out)
}

/// Exact soft distributional backup. Each output entry is the mixture over
/// successors `(s', a')` and atoms `z` of `Z(s', a')` of the point
/// `r + γ(z − α log π(a'|s'))` with weight `P(s'|s,a)·π(a'|s')·p(z)`.
/// Terminal successors contribute the point `r`.
pub fn dist_soft_bellman(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    z: &ReturnTable,
    alpha: f64,
) -> Result<ReturnTable, TabularError> {
    check_alpha(alpha)?;
    policy.check_shape(mdp)?;
    check_return_table(mdp, z)?;
    let gamma = mdp.discount();
    let mut entries = Vec::with_capacity(mdp.n_states() * mdp.n_actions());
    for s in 0..mdp.n_states() {
        for a in 0..mdp.n_actions() {
            let r = mdp.reward(s, a);
            if mdp.is_terminal(s) {
                entries.push(DiscreteReturnDist::dirac(r));
                continue;
            }
            let mut pairs = Vec::new();
            for (s_next, &p) in mdp.next_states(s, a).iter().enumerate() {
                if p == 0.0 {
                    continue;
                }
                if mdp.is_terminal(s_next) {
                    pairs.push((r, p));
                    continue;
                }
                for a_next in 0..mdp.n_actions() {
                    let pi = policy.prob(s_next, a_next);
                    if pi == 0.0 {
                        continue;
                    }
                    let entropy_shift = -alpha * pi.ln();
                    let d = z.get(s_next, a_next);
                    for (atom, q) in d.atoms().iter().zip(d.probs()) {
                        pairs.push((r + gamma * (atom + entropy_shift), p * pi * q));
                    }
                }
            }
            entries.push(DiscreteReturnDist::from_weighted(pairs)?);
        }
    }
    ReturnTable::new(mdp.n_states(), mdp.n_actions(), entries)
}

/// `d̄_e(𝒯Z₁, 𝒯Z₂) / d̄_e(Z₁, Z₂)`.
pub fn contraction_probe(
    mdp: &FiniteMdp,
    policy: &TabularPolicy,
    z1: &ReturnTable,
    z2: &ReturnTable,
    alpha: f64,
) -> Result<f64, TabularError> {
    let before = sup_energy_distance(z1, z2)?;
    if before == 0.0 {
        return Err(TabularError::ZeroDistance);
    }
    let t1 = dist_soft_bellman(mdp, policy, z1, alpha)?;
    let t2 = dist_soft_bellman(mdp, policy, z2, alpha)?;
    Ok(sup_energy_distance(&t1, &t2)? / before)
}
