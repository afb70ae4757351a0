use super::{DistError, GaussianReturn};
use serde::{Deserialize, Serialize};

/// Anything with a cumulative distribution function on the real line.
pub trait Cdf {
    fn cdf(&self, x: f64) -> f64;
    /// Components whose means and spreads decide where quadrature nodes go.
    fn components(&self) -> Vec<GaussianReturn>;
}

impl Cdf for GaussianReturn {
    fn cdf(&self, x: f64) -> f64 {
        GaussianReturn::cdf(self, x)
    }

    fn components(&self) -> Vec<GaussianReturn> {
        vec![*self]
    }
}

/// Finite mixture of Gaussians and Dirac masses.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixtureCdf {
    components: Vec<(f64, GaussianReturn)>,
}

impl MixtureCdf {
    pub fn new(components: Vec<(f64, GaussianReturn)>) -> Result<Self, DistError> {
        if components.is_empty() {
            return Err(DistError::InvalidMixture("no components".into()));
        }
        let mut total = 0.0;
        for (w, _) in &components {
            if !(0.0..=1.0).contains(w) {
                return Err(DistError::InvalidMixture(format!(
                    "weight {w} outside [0, 1]"
                )));
            }
            total += w;
        }
        if (total - 1.0).abs() > 1e-12 {
            return Err(DistError::InvalidMixture(format!("weights sum to {total}")));
        }
        Ok(Self { components })
    }

    /// Empirical distribution with equal mass on every sample.
    pub fn empirical(samples: &[f64]) -> Result<Self, DistError> {
        let w = 1.0 / samples.len() as f64;
        Self::new(
            samples
                .iter()
                .map(|&x| (w, GaussianReturn::dirac(x)))
                .collect(),
        )
    }

    pub fn weighted(&self) -> &[(f64, GaussianReturn)] {
        &self.components
    }

    pub fn mean(&self) -> f64 {
        self.components.iter().map(|(w, g)| w * g.mean).sum()
    }
}

impl Cdf for MixtureCdf {
    fn cdf(&self, x: f64) -> f64 {
        self.components.iter().map(|(w, g)| w * g.cdf(x)).sum()
    }

    fn components(&self) -> Vec<GaussianReturn> {
        self.components.iter().map(|(_, g)| *g).collect()
    }
}
