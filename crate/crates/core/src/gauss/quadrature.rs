use super::{DistError, GaussianReturn};
use serde::{Deserialize, Serialize};

/// Largest single Gauss–Legendre panel; larger node counts are split into
/// several panels of at most this order.
const MAX_PANEL_ORDER: usize = 31;

/// Floor on the bounding-interval scale so all-Dirac inputs still get a
/// non-empty interval.
const EPS_GRID: f64 = 1e-9;

/// Discretization of the real line used by the quadrature paths.
///
/// `node_count` Gauss–Legendre nodes are placed on every segment between
/// breakpoints (each component mean and the ends of its `±bound_multiplier·σ`
/// window); the whole integral spans
/// `[min mean − m·σ_max, max mean + m·σ_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureSpec {
    pub node_count: usize,
    pub bound_multiplier: f64,
}

impl Default for QuadratureSpec {
    fn default() -> Self {
        Self {
            node_count: 31,
            bound_multiplier: 15.0,
        }
    }
}

impl QuadratureSpec {
    pub fn new(node_count: usize, bound_multiplier: f64) -> Result<Self, DistError> {
        let spec = Self {
            node_count,
            bound_multiplier,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), DistError> {
        if self.node_count < 3 {
            return Err(DistError::InvalidQuadrature(format!(
                "node_count must be >= 3, got {}",
                self.node_count
            )));
        }
        if !(self.bound_multiplier.is_finite() && self.bound_multiplier > 0.0) {
            return Err(DistError::InvalidQuadrature(format!(
                "bound_multiplier must be positive, got {}",
                self.bound_multiplier
            )));
        }
        Ok(())
    }

    /// Sorted breakpoints for integrating CDF differences of `components`.
    pub(crate) fn breakpoints<'a>(
        &self,
        components: impl IntoIterator<Item = &'a GaussianReturn>,
    ) -> Vec<f64> {
        let comps: Vec<&GaussianReturn> = components.into_iter().collect();
        let m = self.bound_multiplier;
        let sigma_max = comps.iter().map(|g| g.std).fold(EPS_GRID, f64::max);
        let lo = comps.iter().map(|g| g.mean).fold(f64::INFINITY, f64::min) - m * sigma_max;
        let hi = comps
            .iter()
            .map(|g| g.mean)
            .fold(f64::NEG_INFINITY, f64::max)
            + m * sigma_max;

        let mut points = vec![lo, hi];
        for g in comps {
            points.push(g.mean);
            if g.std > 0.0 {
                points.push((g.mean - m * g.std).max(lo));
                points.push((g.mean + m * g.std).min(hi));
            }
        }
        points.sort_by(f64::total_cmp);
        points.dedup();
        points
    }

    /// Integrates `f` over `[breakpoints[0], breakpoints[last]]`, applying the
    /// node rule separately on every segment so discontinuities placed at
    /// breakpoints are never sampled.
    pub(crate) fn integrate(&self, breakpoints: &[f64], mut f: impl FnMut(f64) -> f64) -> f64 {
        let panels = self.node_count.div_ceil(MAX_PANEL_ORDER);
        let order = self.node_count.div_ceil(panels);
        let (nodes, weights) = gauss_legendre(order);

        let mut total = 0.0;
        for seg in breakpoints.windows(2) {
            let (a, b) = (seg[0], seg[1]);
            if b <= a {
                continue;
            }
            let width = (b - a) / panels as f64;
            for p in 0..panels {
                let pa = a + p as f64 * width;
                let half = 0.5 * width;
                let mid = pa + half;
                let mut acc = 0.0;
                for (x, w) in nodes.iter().zip(&weights) {
                    acc += w * f(mid + half * x);
                }
                total += half * acc;
            }
        }
        total
    }
}

/// Gauss–Legendre nodes and weights on `[-1, 1]`, nodes ascending.
pub fn gauss_legendre(n: usize) -> (Vec<f64>, Vec<f64>) {
    assert!(n >= 1, "gauss_legendre needs at least one node");
    let mut nodes = vec![0.0; n];
    let mut weights = vec![0.0; n];
    let nf = n as f64;
    for i in 0..n.div_ceil(2) {
        // Tricomi initial guess for the i-th largest root.
        let mut x = (std::f64::consts::PI * (i as f64 + 0.75) / (nf + 0.5)).cos();
        let mut dp = 0.0;
        for _ in 0..100 {
            let (p, d) = legendre_with_derivative(n, x);
            dp = d;
            let dx = p / d;
            x -= dx;
            if dx.abs() < 1e-16 {
                break;
            }
        }
        let (_, d) = legendre_with_derivative(n, x);
        if d != 0.0 {
            dp = d;
        }
        let w = 2.0 / ((1.0 - x * x) * dp * dp);
        nodes[n - 1 - i] = x;
        nodes[i] = -x;
        weights[n - 1 - i] = w;
        weights[i] = w;
    }
    (nodes, weights)
}

fn legendre_with_derivative(n: usize, x: f64) -> (f64, f64) {
    let mut p0 = 1.0;
    let mut p1 = x;
    for k in 2..=n {
        let kf = k as f64;
        let p2 = ((2.0 * kf - 1.0) * x * p1 - (kf - 1.0) * p0) / kf;
        p0 = p1;
        p1 = p2;
    }
    if n == 0 {
        return (1.0, 0.0);
    }
    let d = n as f64 * (x * p1 - p0) / (x * x - 1.0);
    (p1, d)
}
