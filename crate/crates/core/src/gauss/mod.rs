//! Gaussian return distributions and the energy distance between them.
//!
//! The critic models every return as `N(Q, σ)`; a standard deviation of zero
//! denotes a Dirac mass, which is how terminal targets are represented. The
//! energy distance `∫ (F_U − F_V)² dx` is available in closed form for any
//! pair of Gaussians or Dirac masses and by Gauss–Legendre quadrature for
//! mixtures, which also serves as an independent check of the closed form.

mod analysis;
mod energy;
mod mixture;
mod quadrature;

pub use analysis::{gradient_curve, GradientCurvePoint, GradientCurveSpec};
pub use energy::{
    energy_distance_between, energy_distance_closed_form, energy_distance_mixture,
    energy_distance_quadrature, grad_mean, grad_mean_quadrature, grad_std, grad_std_exact,
    gradient_weight_b, gradient_weight_error,
};
pub use mixture::{Cdf, MixtureCdf};
pub use quadrature::{gauss_legendre, QuadratureSpec};

use rand::RngCore;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub(crate) const FRAC_1_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
pub(crate) const FRAC_1_SQRT_PI: f64 = 0.564_189_583_547_756_3;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DistError {
    #[error("degenerate distribution: operation requires std > 0 (mean {mean})")]
    Degenerate { mean: f64 },
    #[error("invalid gaussian parameters: mean {mean}, std {std}")]
    InvalidParameters { mean: f64, std: f64 },
    #[error("invalid quadrature spec: {0}")]
    InvalidQuadrature(String),
    #[error("invalid sigma grid: {0}")]
    InvalidGrid(String),
    #[error("invalid mixture: {0}")]
    InvalidMixture(String),
}

/// A Gaussian return distribution `N(mean, std²)`; `std == 0` is a Dirac mass.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianReturn {
    pub mean: f64,
    pub std: f64,
}

impl GaussianReturn {
    pub fn new(mean: f64, std: f64) -> Result<Self, DistError> {
        if !mean.is_finite() || !std.is_finite() || std < 0.0 {
            return Err(DistError::InvalidParameters { mean, std });
        }
        Ok(Self { mean, std })
    }

    /// Point mass at `x`.
    pub fn dirac(x: f64) -> Self {
        Self { mean: x, std: 0.0 }
    }

    pub fn is_dirac(&self) -> bool {
        self.std == 0.0
    }

    pub fn pdf(&self, x: f64) -> Result<f64, DistError> {
        if self.is_dirac() {
            return Err(DistError::Degenerate { mean: self.mean });
        }
        Ok(std_normal_pdf((x - self.mean) / self.std) / self.std)
    }

    /// Right-continuous CDF; a step at `mean` when `std == 0`.
    pub fn cdf(&self, x: f64) -> f64 {
        if self.is_dirac() {
            if x < self.mean {
                0.0
            } else {
                1.0
            }
        } else {
            std_normal_cdf((x - self.mean) / self.std)
        }
    }

    pub fn sample(&self, rng: &mut (impl RngCore + ?Sized)) -> f64 {
        if self.is_dirac() {
            return self.mean;
        }
        let xi: f64 = StandardNormal.sample(rng);
        self.mean + self.std * xi
    }
}

pub fn pdf(g: &GaussianReturn, x: f64) -> Result<f64, DistError> {
    g.pdf(x)
}

pub fn cdf(g: &GaussianReturn, x: f64) -> f64 {
    g.cdf(x)
}

pub fn sample(g: &GaussianReturn, rng: &mut (impl RngCore + ?Sized)) -> f64 {
    g.sample(rng)
}

#[inline]
pub fn std_normal_pdf(z: f64) -> f64 {
    FRAC_1_SQRT_2PI * (-0.5 * z * z).exp()
}

#[inline]
pub fn std_normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}
