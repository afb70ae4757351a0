//! Exact finite-MDP engine: scalar and distributional soft Bellman operators,
//! the iteration schemes built on them, and randomized probes that measure
//! contraction ratios and fixed-point agreement.

mod dist;
mod iteration;
mod mdp;
mod operators;
pub mod probes;

pub use dist::{
    energy_distance_discrete, sup_energy_distance, DiscreteReturnDist, ReturnTable, ATOM_MERGE_TOL,
};
pub use iteration::{
    brute_force_optimal, classical_policy_iteration, classical_value_iteration,
    dist_policy_evaluation, dist_soft_policy_iteration, greedy_policy, policy_evaluation,
    soft_policy_improvement, soft_policy_iteration, soft_value_iteration_oracle, ClassicalPiResult,
    DistEvaluation, DistPiResult, SoftPiResult, MAX_ITERATIONS,
};
pub use mdp::{FiniteMdp, QTable, TabularPolicy};
pub use operators::{
    bellman_operator_q, contraction_probe, dist_soft_bellman, soft_bellman_operator_q,
};

use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TabularError {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("invalid mdp: {0}")]
    InvalidMdp(String),
    #[error("invalid policy: {0}")]
    InvalidPolicy(String),
    #[error("invalid return distribution: {0}")]
    InvalidDistribution(String),
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
    #[error("input tables are identical; contraction ratio undefined")]
    ZeroDistance,
    #[error("no convergence after {iterations} iterations (last change {residual:e})")]
    IterationCap {
        iterations: usize,
        residual: f64,
        last_policy: Box<TabularPolicy>,
    },
}
