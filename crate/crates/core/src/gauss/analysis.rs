//! Sweeps of the critic's mean-gradient weight over the model's σ.

use super::{grad_mean, gradient_weight_error, DistError, GaussianReturn};
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCurveSpec {
    pub q_current: f64,
    pub q_target: f64,
    pub sigma_target: f64,
    /// Mean of the noisy (overestimated) target used for ΔΨ; it shares
    /// `sigma_target` with the exact target.
    pub q_noisy: f64,
    pub sigma_min: f64,
    pub sigma_max: f64,
    pub points: usize,
}

impl Default for GradientCurveSpec {
    fn default() -> Self {
        Self {
            q_current: 0.0,
            q_target: 1.0,
            sigma_target: 1.0,
            q_noisy: 2.0,
            sigma_min: 0.01,
            sigma_max: 1000.0,
            points: 200,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GradientCurvePoint {
    pub sigma: f64,
    pub psi: f64,
    pub psi_envelope: f64,
    pub delta_psi: f64,
}

impl GradientCurveSpec {
    pub fn validate(&self) -> Result<(), DistError> {
        let bad = |msg: String| Err(DistError::InvalidGrid(msg));
        if self.points < 2 {
            return bad(format!(
                "sigma grid needs at least 2 points, got {}",
                self.points
            ));
        }
        if !(self.sigma_min > 0.0 && self.sigma_min < self.sigma_max && self.sigma_max.is_finite())
        {
            return bad(format!(
                "sigma grid bounds must satisfy 0 < min < max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            ));
        }
        for (name, v) in [
            ("q_current", self.q_current),
            ("q_target", self.q_target),
            ("q_noisy", self.q_noisy),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        if !(self.sigma_target.is_finite() && self.sigma_target >= 0.0) {
            return bad(format!(
                "sigma_target must be >= 0, got {}",
                self.sigma_target
            ));
        }
        Ok(())
    }

    /// Log-spaced σ values from `sigma_min` to `sigma_max` inclusive.
    pub fn sigma_grid(&self) -> Vec<f64> {
        let (lo, hi) = (self.sigma_min.ln(), self.sigma_max.ln());
        let last = (self.points - 1) as f64;
        (0..self.points)
            .map(|i| match i {
                0 => self.sigma_min,
                i if i == self.points - 1 => self.sigma_max,
                i => (lo + (hi - lo) * i as f64 / last).exp(),
            })
            .collect()
    }
}

/// Ψ, its `2/σ` envelope and ΔΨ at every grid σ.
pub fn gradient_curve(spec: &GradientCurveSpec) -> Result<Vec<GradientCurvePoint>, DistError> {
    spec.validate()?;
    let exact = GaussianReturn::new(spec.q_target, spec.sigma_target)?;
    let noisy = GaussianReturn::new(spec.q_noisy, spec.sigma_target)?;
    spec.sigma_grid()
        .into_iter()
        .map(|sigma| {
            let current = GaussianReturn::new(spec.q_current, sigma)?;
            Ok(GradientCurvePoint {
                sigma,
                psi: grad_mean(&current, &exact)?,
                psi_envelope: 2.0 / sigma,
                delta_psi: gradient_weight_error(&current, &noisy, &exact)?,
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equal_means_give_zero_psi() {
        let spec = GradientCurveSpec {
            q_target: 0.0,
            ..Default::default()
        };
        for p in gradient_curve(&spec).unwrap() {
            assert_eq!(p.psi, 0.0);
        }
    }

    #[test]
    fn default_sweep_within_envelope() {
        let curve = gradient_curve(&GradientCurveSpec::default()).unwrap();
        assert_eq!(curve.len(), 200);
        assert_eq!(curve[0].sigma, 0.01);
        assert_eq!(curve[199].sigma, 1000.0);
        for p in &curve {
            assert!(p.psi.abs() <= p.psi_envelope);
            assert!(p.delta_psi <= p.psi_envelope);
        }
        assert!(curve[199].psi.abs() <= curve[0].psi.abs() / 500.0);
    }

    #[test]
    fn rejects_bad_grid() {
        let mut spec = GradientCurveSpec {
            points: 1,
            ..Default::default()
        };
        assert!(gradient_curve(&spec).is_err());
        spec.points = 10;
        spec.sigma_min = 0.0;
        assert!(gradient_curve(&spec).is_err());
        spec.sigma_min = 5.0;
        spec.sigma_max = 1.0;
        assert!(gradient_curve(&spec).is_err());
    }
}
