pub mod agent;
pub mod envs;
pub mod gauss;
pub mod nn;
pub mod tabular;
