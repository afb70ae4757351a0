use super::mixture::{Cdf, MixtureCdf};
use super::quadrature::QuadratureSpec;
use super::{
    std_normal_cdf, std_normal_pdf, DistError, GaussianReturn, FRAC_1_SQRT_2PI, FRAC_1_SQRT_PI,
};
use std::f64::consts::{FRAC_1_SQRT_2, SQRT_2};

/// Closed-form energy distance `∫ (F₁ − F₂)² dx` between two Gaussians or
/// Dirac masses.
///
/// Uses `E|U−V| − ½E|U−U′| − ½E|V−V′|` with `U − V ~ N(d, s²)`, rearranged so
/// that no two large terms cancel:
///
/// `2sφ(0)·expm1(−z²/2) + d·erf(z/√2) + (σ₁−σ₂)² / (√π (√2 s + σ₁ + σ₂))`
/// with `z = d/s`.
pub fn energy_distance_closed_form(g1: &GaussianReturn, g2: &GaussianReturn) -> f64 {
    if g1 == g2 {
        return 0.0;
    }
    let d = g1.mean - g2.mean;
    let s = g1.std.hypot(g2.std);
    if s == 0.0 {
        return d.abs();
    }
    let z = d / s;
    let spread = g1.std - g2.std;
    let value = 2.0 * s * FRAC_1_SQRT_2PI * (-0.5 * z * z).exp_m1()
        + d * libm::erf(z * FRAC_1_SQRT_2)
        + spread * spread * FRAC_1_SQRT_PI / (SQRT_2 * s + g1.std + g2.std);
    value.max(0.0)
}

/// Energy distance between two Gaussians (or Dirac masses) by quadrature.
pub fn energy_distance_quadrature(
    g1: &GaussianReturn,
    g2: &GaussianReturn,
    spec: &QuadratureSpec,
) -> Result<f64, DistError> {
    energy_distance_between(g1, g2, spec)
}

/// Energy distance between a mixture and a Gaussian by quadrature over the
/// union of all component windows.
pub fn energy_distance_mixture(
    mix: &MixtureCdf,
    g: &GaussianReturn,
    spec: &QuadratureSpec,
) -> Result<f64, DistError> {
    energy_distance_between(mix, g, spec)
}

/// Quadrature energy distance between any two CDFs.
pub fn energy_distance_between(
    a: &impl Cdf,
    b: &impl Cdf,
    spec: &QuadratureSpec,
) -> Result<f64, DistError> {
    spec.validate()?;
    let mut comps = a.components();
    comps.extend(b.components());
    let bp = spec.breakpoints(&comps);
    Ok(spec.integrate(&bp, |x| {
        let gap = a.cdf(x) - b.cdf(x);
        gap * gap
    }))
}

fn require_spread(current: &GaussianReturn) -> Result<(), DistError> {
    if current.std > 0.0 {
        Ok(())
    } else {
        Err(DistError::Degenerate { mean: current.mean })
    }
}

/// `B = ∫ (F_current − F_target) φ_current dx`, evaluated as
/// `½ − Φ((Q − Q′)/√(σ² + σ′²))`.
///
/// `E[F_current(X)] = ½` and `E[F_target(X)] = P(Y ≤ X)` for independent
/// `X ~ current`, `Y ~ target`. Always `|B| ≤ ½`.
pub fn gradient_weight_b(
    current: &GaussianReturn,
    target: &GaussianReturn,
) -> Result<f64, DistError> {
    require_spread(current)?;
    let s = current.std.hypot(target.std);
    Ok(0.5 - std_normal_cdf((current.mean - target.mean) / s))
}

/// `Ψ = ∂/∂Q d_e(N(Q, σ), target) = −2B`, which equals `erf(z/√2)` with
/// `z = (Q − Q′)/√(σ² + σ′²)`.
///
/// Shrinks towards zero as σ grows for a fixed mean gap; `|Ψ| ≤ 1` and
/// `|Ψ| ≤ √(2/π)·|Q − Q′|/σ`.
pub fn grad_mean(current: &GaussianReturn, target: &GaussianReturn) -> Result<f64, DistError> {
    require_spread(current)?;
    let s = current.std.hypot(target.std);
    Ok(libm::erf((current.mean - target.mean) / s * FRAC_1_SQRT_2))
}

/// `∂/∂Q d_e(N(Q, σ), target)` for an arbitrary target CDF, as
/// `−2 ∫ (F − G) φ dx` by quadrature.
pub fn grad_mean_quadrature(
    current: &GaussianReturn,
    target: &impl Cdf,
    spec: &QuadratureSpec,
) -> Result<f64, DistError> {
    require_spread(current)?;
    spec.validate()?;
    let mut comps = target.components();
    comps.push(*current);
    let bp = spec.breakpoints(&comps);
    let (q, sigma) = (current.mean, current.std);
    let b = spec.integrate(&bp, |x| {
        let z = (x - q) / sigma;
        (std_normal_cdf(z) - target.cdf(x)) * std_normal_pdf(z) / sigma
    });
    Ok(-2.0 * b)
}

/// `∂/∂σ d_e(N(Q, σ), target)` by quadrature of `2(F − G)·∂F/∂σ` with
/// `∂F/∂σ = −((x − Q)/σ)·φ(x)`.
pub fn grad_std(
    current: &GaussianReturn,
    target: &impl Cdf,
    spec: &QuadratureSpec,
) -> Result<f64, DistError> {
    require_spread(current)?;
    spec.validate()?;
    let mut comps = target.components();
    comps.push(*current);
    let bp = spec.breakpoints(&comps);
    let (q, sigma) = (current.mean, current.std);
    Ok(spec.integrate(&bp, |x| {
        let z = (x - q) / sigma;
        -2.0 * (std_normal_cdf(z) - target.cdf(x)) * z * std_normal_pdf(z) / sigma
    }))
}

/// Closed-form `∂/∂σ d_e(N(Q, σ), target) = 2φ(z)·σ/s − 1/√π`.
pub fn grad_std_exact(current: &GaussianReturn, target: &GaussianReturn) -> Result<f64, DistError> {
    require_spread(current)?;
    let s = current.std.hypot(target.std);
    let z = (current.mean - target.mean) / s;
    Ok(2.0 * std_normal_pdf(z) * current.std / s - FRAC_1_SQRT_PI)
}

/// `ΔΨ = |Ψ(current, noisy) − Ψ(current, exact)|`.
pub fn gradient_weight_error(
    current: &GaussianReturn,
    noisy_target: &GaussianReturn,
    exact_target: &GaussianReturn,
) -> Result<f64, DistError> {
    Ok((grad_mean(current, noisy_target)? - grad_mean(current, exact_target)?).abs())
}
