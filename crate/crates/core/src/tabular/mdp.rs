use super::TabularError;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::{Deserialize, Serialize};

const ROW_TOL: f64 = 1e-12;

/// Finite MDP with terminal absorbing states.
///
/// `transition` is laid out `[s][a][s']`, `reward` as `[s][a]`. Terminal
/// states self-loop with reward 0 and bootstrapping from them contributes
/// nothing, which gives the same fixed points as an episodic sum for γ < 1.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FiniteMdp {
    n_states: usize,
    n_actions: usize,
    transition: Vec<f64>,
    reward: Vec<f64>,
    terminal: Vec<bool>,
    discount: f64,
    horizon: usize,
}

impl FiniteMdp {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        transition: Vec<f64>,
        reward: Vec<f64>,
        terminal: Vec<bool>,
        discount: f64,
        horizon: usize,
    ) -> Result<Self, TabularError> {
        let invalid = |m: String| Err(TabularError::InvalidMdp(m));
        if n_states == 0 || n_actions == 0 {
            return invalid("need at least one state and one action".into());
        }
        if transition.len() != n_states * n_actions * n_states
            || reward.len() != n_states * n_actions
            || terminal.len() != n_states
        {
            return invalid("table sizes do not match state/action counts".into());
        }
        if !(0.0..1.0).contains(&discount) {
            return invalid(format!("discount {discount} outside [0, 1)"));
        }
        for (i, row) in transition.chunks(n_states).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return invalid(format!("row {i} has a negative or non-finite probability"));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOL {
                return invalid(format!("row {i} sums to {total}"));
            }
        }
        if reward.iter().any(|r| !r.is_finite()) {
            return invalid("non-finite reward".into());
        }
        for s in 0..n_states {
            if !terminal[s] {
                continue;
            }
            for a in 0..n_actions {
                let row = &transition[(s * n_actions + a) * n_states..][..n_states];
                if row[s] != 1.0 || reward[s * n_actions + a] != 0.0 {
                    return invalid(format!("terminal state {s} must self-loop with reward 0"));
                }
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            transition,
            reward,
            terminal,
            discount,
            horizon,
        })
    }

    /// Deterministic chain `0 → 1 → … → n-1`, the last state terminal, every
    /// non-terminal reward `reward`, single action.
    pub fn chain(n_states: usize, reward: f64, discount: f64) -> Result<Self, TabularError> {
        let mut transition = vec![0.0; n_states * n_states];
        let mut rewards = vec![0.0; n_states];
        let mut terminal = vec![false; n_states];
        for s in 0..n_states {
            if s + 1 == n_states {
                transition[s * n_states + s] = 1.0;
                terminal[s] = true;
            } else {
                transition[s * n_states + s + 1] = 1.0;
                rewards[s] = reward;
            }
        }
        Self::new(
            n_states, 1, transition, rewards, terminal, discount, n_states,
        )
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn discount(&self) -> f64 {
        self.discount
    }

    pub fn horizon(&self) -> usize {
        self.horizon
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn reward(&self, s: usize, a: usize) -> f64 {
        self.reward[s * self.n_actions + a]
    }

    /// `P(· | s, a)`.
    pub fn next_states(&self, s: usize, a: usize) -> &[f64] {
        let n = self.n_states;
        &self.transition[(s * self.n_actions + a) * n..][..n]
    }

    pub fn with_discount(&self, discount: f64) -> Result<Self, TabularError> {
        let mut m = self.clone();
        if !(0.0..1.0).contains(&discount) {
            return Err(TabularError::InvalidMdp(format!(
                "discount {discount} outside [0, 1)"
            )));
        }
        m.discount = discount;
        Ok(m)
    }

    /// Random instance: Dirichlet(1, …, 1) transition rows, rewards uniform in
    /// `[-1, 1]`, and the last `n_terminal` states terminal.
    pub fn random(
        n_states: usize,
        n_actions: usize,
        n_terminal: usize,
        discount: f64,
        rng: &mut impl Rng,
    ) -> Result<Self, TabularError> {
        if n_terminal >= n_states {
            return Err(TabularError::InvalidMdp(
                "at least one state must be non-terminal".into(),
            ));
        }
        let first_terminal = n_states - n_terminal;
        let mut transition = Vec::with_capacity(n_states * n_actions * n_states);
        let mut reward = Vec::with_capacity(n_states * n_actions);
        let terminal: Vec<bool> = (0..n_states).map(|s| s >= first_terminal).collect();
        for (s, &is_terminal) in terminal.iter().enumerate() {
            for _ in 0..n_actions {
                if is_terminal {
                    transition.extend((0..n_states).map(|t| if t == s { 1.0 } else { 0.0 }));
                    reward.push(0.0);
                } else {
                    transition.extend(dirichlet_ones(n_states, rng));
                    reward.push(rng.random_range(-1.0..=1.0));
                }
            }
        }
        Self::new(
            n_states, n_actions, transition, reward, terminal, discount, 0,
        )
    }
}

/// Uniform draw from the probability simplex; each row sums to 1 within
/// rounding.
pub(crate) fn dirichlet_ones(n: usize, rng: &mut impl Rng) -> Vec<f64> {
    let mut w: Vec<f64> = (0..n).map(|_| Exp1.sample(rng)).collect();
    let total: f64 = w.iter().sum();
    w.iter_mut().for_each(|x| *x /= total);
    w
}

/// Stochastic policy table `π(a | s)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TabularPolicy {
    n_states: usize,
    n_actions: usize,
    probs: Vec<f64>,
}

impl TabularPolicy {
    pub fn new(n_states: usize, n_actions: usize, probs: Vec<f64>) -> Result<Self, TabularError> {
        if probs.len() != n_states * n_actions {
            return Err(TabularError::ShapeMismatch("policy table size".into()));
        }
        for (s, row) in probs.chunks(n_actions).enumerate() {
            if row.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
                return Err(TabularError::InvalidPolicy(format!(
                    "state {s} has a negative entry"
                )));
            }
            let total: f64 = row.iter().sum();
            if (total - 1.0).abs() > ROW_TOL {
                return Err(TabularError::InvalidPolicy(format!(
                    "state {s} sums to {total}"
                )));
            }
        }
        Ok(Self {
            n_states,
            n_actions,
            probs,
        })
    }

    pub fn uniform(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            probs: vec![1.0 / n_actions as f64; n_states * n_actions],
        }
    }

    pub fn deterministic(n_actions: usize, actions: &[usize]) -> Self {
        let mut probs = vec![0.0; actions.len() * n_actions];
        for (s, &a) in actions.iter().enumerate() {
            probs[s * n_actions + a] = 1.0;
        }
        Self {
            n_states: actions.len(),
            n_actions,
            probs,
        }
    }

    pub fn random(n_states: usize, n_actions: usize, rng: &mut impl Rng) -> Self {
        let probs = (0..n_states)
            .flat_map(|_| dirichlet_ones(n_actions, rng))
            .collect();
        Self {
            n_states,
            n_actions,
            probs,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn prob(&self, s: usize, a: usize) -> f64 {
        self.probs[s * self.n_actions + a]
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.probs[s * self.n_actions..][..self.n_actions]
    }

    /// Shannon entropy of `π(· | s)` with `0 log 0 = 0`.
    pub fn entropy(&self, s: usize) -> f64 {
        self.row(s)
            .iter()
            .filter(|p| **p > 0.0)
            .map(|p| -p * p.ln())
            .sum()
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_shape(&self, mdp: &FiniteMdp) -> Result<(), TabularError> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(TabularError::ShapeMismatch(format!(
                "policy is {}x{}, mdp is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}

/// State-action value table laid out `[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QTable {
    n_states: usize,
    n_actions: usize,
    values: Vec<f64>,
}

impl QTable {
    pub fn zeros(n_states: usize, n_actions: usize) -> Self {
        Self {
            n_states,
            n_actions,
            values: vec![0.0; n_states * n_actions],
        }
    }

    pub fn from_values(
        n_states: usize,
        n_actions: usize,
        values: Vec<f64>,
    ) -> Result<Self, TabularError> {
        if values.len() != n_states * n_actions {
            return Err(TabularError::ShapeMismatch("q table size".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            values,
        })
    }

    pub fn for_mdp(mdp: &FiniteMdp) -> Self {
        Self::zeros(mdp.n_states(), mdp.n_actions())
    }

    pub fn random(n_states: usize, n_actions: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let values = (0..n_states * n_actions)
            .map(|_| rng.random_range(-scale..=scale))
            .collect();
        Self {
            n_states,
            n_actions,
            values,
        }
    }

    pub fn get(&self, s: usize, a: usize) -> f64 {
        self.values[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, v: f64) {
        self.values[s * self.n_actions + a] = v;
    }

    pub fn row(&self, s: usize) -> &[f64] {
        &self.values[s * self.n_actions..][..self.n_actions]
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn sup_distance(&self, other: &Self) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }

    /// Largest entrywise decrease from `self` to `next` (0 if none).
    pub fn max_decrease_to(&self, next: &Self) -> f64 {
        self.values
            .iter()
            .zip(&next.values)
            .map(|(a, b)| a - b)
            .fold(0.0, f64::max)
    }

    pub(crate) fn check_shape(&self, mdp: &FiniteMdp) -> Result<(), TabularError> {
        if self.n_states != mdp.n_states() || self.n_actions != mdp.n_actions() {
            return Err(TabularError::ShapeMismatch(format!(
                "q table is {}x{}, mdp is {}x{}",
                self.n_states,
                self.n_actions,
                mdp.n_states(),
                mdp.n_actions()
            )));
        }
        Ok(())
    }
}
