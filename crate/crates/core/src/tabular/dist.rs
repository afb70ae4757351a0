use super::TabularError;
use rand::Rng;
use serde::{Deserialize, Serialize};

/// Atoms closer than this are merged into one.
pub const ATOM_MERGE_TOL: f64 = 1e-12;
const PROB_TOL: f64 = 1e-10;

/// Finitely supported return distribution: strictly increasing atoms with
/// their probabilities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiscreteReturnDist {
    atoms: Vec<f64>,
    probs: Vec<f64>,
}

impl DiscreteReturnDist {
    pub fn new(atoms: Vec<f64>, probs: Vec<f64>) -> Result<Self, TabularError> {
        if atoms.is_empty() || atoms.len() != probs.len() {
            return Err(TabularError::InvalidDistribution(
                "atoms and probabilities must be non-empty and aligned".into(),
            ));
        }
        if atoms.iter().any(|x| !x.is_finite()) {
            return Err(TabularError::InvalidDistribution("non-finite atom".into()));
        }
        if atoms.windows(2).any(|w| w[0] >= w[1]) {
            return Err(TabularError::InvalidDistribution(
                "atoms must be strictly increasing".into(),
            ));
        }
        if probs.iter().any(|p| !(p.is_finite() && *p >= 0.0)) {
            return Err(TabularError::InvalidDistribution(
                "negative probability".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if (total - 1.0).abs() > PROB_TOL {
            return Err(TabularError::InvalidDistribution(format!(
                "probabilities sum to {total}"
            )));
        }
        Ok(Self { atoms, probs })
    }

    pub fn dirac(x: f64) -> Self {
        Self {
            atoms: vec![x],
            probs: vec![1.0],
        }
    }

    /// Builds a distribution from unsorted `(atom, weight)` pairs: zero
    /// weights are dropped, weights renormalized, and atoms within
    /// [`ATOM_MERGE_TOL`] merged at their weighted mean.
    pub fn from_weighted(mut pairs: Vec<(f64, f64)>) -> Result<Self, TabularError> {
        pairs.retain(|(_, w)| *w > 0.0);
        if pairs.is_empty() {
            return Err(TabularError::InvalidDistribution("no positive mass".into()));
        }
        if pairs.iter().any(|(x, w)| !x.is_finite() || !w.is_finite()) {
            return Err(TabularError::InvalidDistribution(
                "non-finite atom or weight".into(),
            ));
        }
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        let total: f64 = pairs.iter().map(|(_, w)| w).sum();

        let mut atoms: Vec<f64> = Vec::with_capacity(pairs.len());
        let mut probs: Vec<f64> = Vec::with_capacity(pairs.len());
        // Merge runs by distance to the run's first atom so a run never drifts.
        let mut run_start = f64::NAN;
        for (x, w) in pairs {
            let p = w / total;
            match atoms.last_mut() {
                Some(last) if x - run_start <= ATOM_MERGE_TOL => {
                    let q = probs.last_mut().unwrap();
                    if x != *last {
                        *last = (*last * *q + x * p) / (*q + p);
                    }
                    *q += p;
                }
                _ => {
                    run_start = x;
                    atoms.push(x);
                    probs.push(p);
                }
            }
        }
        Ok(Self { atoms, probs })
    }

    /// `n_atoms` distinct atoms uniform in `[-scale, scale]` with Dirichlet
    /// probabilities.
    pub fn random(n_atoms: usize, scale: f64, rng: &mut impl Rng) -> Self {
        let weights = super::mdp::dirichlet_ones(n_atoms, rng);
        let pairs = weights
            .into_iter()
            .map(|w| (rng.random_range(-scale..=scale), w))
            .collect();
        Self::from_weighted(pairs).expect("random atoms are finite with positive mass")
    }

    pub fn atoms(&self) -> &[f64] {
        &self.atoms
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    pub fn mean(&self) -> f64 {
        self.atoms.iter().zip(&self.probs).map(|(x, p)| x * p).sum()
    }

    /// Right-continuous CDF.
    pub fn cdf(&self, x: f64) -> f64 {
        let k = self.atoms.partition_point(|a| *a <= x);
        self.probs[..k].iter().sum::<f64>().min(1.0)
    }

    /// Affine map of every atom: `x ↦ offset + scale·x`.
    pub fn affine(&self, offset: f64, scale: f64) -> Self {
        let pairs = self
            .atoms
            .iter()
            .zip(&self.probs)
            .map(|(x, p)| (offset + scale * x, *p))
            .collect();
        Self::from_weighted(pairs).expect("affine image of a valid distribution")
    }

    /// Projects onto `n_points` equally spaced points spanning this
    /// distribution's own support, splitting each atom's mass linearly
    /// between its two neighbouring grid points. Support and mean are
    /// preserved; the energy-distance error is bounded by the grid spacing.
    pub fn project_uniform(&self, n_points: usize) -> Self {
        if self.atoms.len() <= n_points || n_points < 2 {
            return self.clone();
        }
        let lo = self.atoms[0];
        let hi = self.atoms[self.atoms.len() - 1];
        let h = (hi - lo) / (n_points - 1) as f64;
        let mut mass = vec![0.0; n_points];
        for (x, p) in self.atoms.iter().zip(&self.probs) {
            let pos = (x - lo) / h;
            let j = (pos.floor() as usize).min(n_points - 2);
            let frac = (pos - j as f64).clamp(0.0, 1.0);
            mass[j] += p * (1.0 - frac);
            mass[j + 1] += p * frac;
        }
        let pairs = mass
            .into_iter()
            .enumerate()
            .map(|(j, m)| {
                let x = if j == n_points - 1 {
                    hi
                } else {
                    lo + j as f64 * h
                };
                (x, m)
            })
            .collect();
        Self::from_weighted(pairs).expect("projection keeps positive mass")
    }
}

/// Exact `∫ (F₁ − F₂)² dx` for two step CDFs: the gap is constant between
/// consecutive points of the merged support.
pub fn energy_distance_discrete(d1: &DiscreteReturnDist, d2: &DiscreteReturnDist) -> f64 {
    let (a, b) = (&d1.atoms, &d2.atoms);
    let (mut i, mut j) = (0, 0);
    let (mut f1, mut f2) = (0.0, 0.0);
    let mut x_prev = f64::NAN;
    let mut total = 0.0;
    while i < a.len() || j < b.len() {
        let x = match (a.get(i), b.get(j)) {
            (Some(&xa), Some(&xb)) => xa.min(xb),
            (Some(&xa), None) => xa,
            (None, Some(&xb)) => xb,
            (None, None) => unreachable!(),
        };
        if !x_prev.is_nan() {
            let gap = f1 - f2;
            total += (x - x_prev) * gap * gap;
        }
        while i < a.len() && a[i] == x {
            f1 += d1.probs[i];
            i += 1;
        }
        while j < b.len() && b[j] == x {
            f2 += d2.probs[j];
            j += 1;
        }
        x_prev = x;
    }
    total
}

/// One return distribution per state-action pair, laid out `[s][a]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReturnTable {
    n_states: usize,
    n_actions: usize,
    entries: Vec<DiscreteReturnDist>,
}

impl ReturnTable {
    pub fn new(
        n_states: usize,
        n_actions: usize,
        entries: Vec<DiscreteReturnDist>,
    ) -> Result<Self, TabularError> {
        if entries.len() != n_states * n_actions {
            return Err(TabularError::ShapeMismatch("return table size".into()));
        }
        Ok(Self {
            n_states,
            n_actions,
            entries,
        })
    }

    pub fn filled(n_states: usize, n_actions: usize, d: DiscreteReturnDist) -> Self {
        Self {
            n_states,
            n_actions,
            entries: vec![d; n_states * n_actions],
        }
    }

    pub fn random(
        n_states: usize,
        n_actions: usize,
        max_atoms: usize,
        scale: f64,
        rng: &mut impl Rng,
    ) -> Self {
        let entries = (0..n_states * n_actions)
            .map(|_| {
                let k = rng.random_range(1..=max_atoms);
                DiscreteReturnDist::random(k, scale, rng)
            })
            .collect();
        Self {
            n_states,
            n_actions,
            entries,
        }
    }

    pub fn n_states(&self) -> usize {
        self.n_states
    }

    pub fn n_actions(&self) -> usize {
        self.n_actions
    }

    pub fn get(&self, s: usize, a: usize) -> &DiscreteReturnDist {
        &self.entries[s * self.n_actions + a]
    }

    pub fn set(&mut self, s: usize, a: usize, d: DiscreteReturnDist) {
        self.entries[s * self.n_actions + a] = d;
    }

    pub fn entries(&self) -> &[DiscreteReturnDist] {
        &self.entries
    }

    pub fn map(&self, f: impl Fn(&DiscreteReturnDist) -> DiscreteReturnDist) -> Self {
        Self {
            n_states: self.n_states,
            n_actions: self.n_actions,
            entries: self.entries.iter().map(f).collect(),
        }
    }

    pub fn mean_table(&self) -> super::QTable {
        super::QTable::from_values(
            self.n_states,
            self.n_actions,
            self.entries.iter().map(DiscreteReturnDist::mean).collect(),
        )
        .expect("shape preserved")
    }

    pub fn max_atoms(&self) -> usize {
        self.entries
            .iter()
            .map(DiscreteReturnDist::len)
            .max()
            .unwrap_or(0)
    }
}

/// `sup_{s,a} d_e(Z₁(s,a), Z₂(s,a))`.
pub fn sup_energy_distance(z1: &ReturnTable, z2: &ReturnTable) -> Result<f64, TabularError> {
    if z1.n_states != z2.n_states || z1.n_actions != z2.n_actions {
        return Err(TabularError::ShapeMismatch(
            "return tables differ in shape".into(),
        ));
    }
    Ok(z1
        .entries
        .iter()
        .zip(&z2.entries)
        .map(|(a, b)| energy_distance_discrete(a, b))
        .fold(0.0, f64::max))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn d(pairs: &[(f64, f64)]) -> DiscreteReturnDist {
        DiscreteReturnDist::from_weighted(pairs.to_vec()).unwrap()
    }

    /// Midpoint rule over a fine grid; independent of the merge walk.
    fn grid_integral(d1: &DiscreteReturnDist, d2: &DiscreteReturnDist, lo: f64, hi: f64) -> f64 {
        let n = 200_000;
        let h = (hi - lo) / n as f64;
        (0..n)
            .map(|k| {
                let x = lo + (k as f64 + 0.5) * h;
                (d1.cdf(x) - d2.cdf(x)).powi(2) * h
            })
            .sum()
    }

    #[test]
    fn reference_values() {
        let a = d(&[(0.0, 0.5), (2.0, 0.5)]);
        assert_eq!(energy_distance_discrete(&a, &a), 0.0);
        assert_eq!(
            energy_distance_discrete(
                &DiscreteReturnDist::dirac(0.0),
                &DiscreteReturnDist::dirac(1.0)
            ),
            1.0
        );
        let v = energy_distance_discrete(&a, &DiscreteReturnDist::dirac(1.0));
        assert!((v - 0.5).abs() < 1e-15);
        let g = grid_integral(&a, &DiscreteReturnDist::dirac(1.0), -1.0, 3.0);
        assert!((g - 0.5).abs() < 1e-9);
    }

    #[test]
    fn validation() {
        assert!(DiscreteReturnDist::new(vec![1.0, 0.0], vec![0.5, 0.5]).is_err());
        assert!(DiscreteReturnDist::new(vec![0.0, 1.0], vec![0.5, 0.4]).is_err());
        assert!(DiscreteReturnDist::new(vec![], vec![]).is_err());
        assert!(DiscreteReturnDist::from_weighted(vec![(1.0, 0.0)]).is_err());
    }

    #[test]
    fn close_atoms_merge() {
        let m = d(&[(1.0, 0.5), (1.0 + 5e-13, 0.5), (2.0, 1.0)]);
        assert_eq!(m.len(), 2);
        assert!((m.probs()[0] - 0.5).abs() < 1e-15);
    }

    #[test]
    fn sup_distance_picks_worst_entry() {
        let base = ReturnTable::filled(2, 2, DiscreteReturnDist::dirac(0.0));
        assert_eq!(sup_energy_distance(&base, &base).unwrap(), 0.0);
        let mut other = base.clone();
        other.set(1, 0, DiscreteReturnDist::dirac(1.0));
        assert_eq!(sup_energy_distance(&base, &other).unwrap(), 1.0);
        let wrong = ReturnTable::filled(3, 2, DiscreteReturnDist::dirac(0.0));
        assert!(sup_energy_distance(&base, &wrong).is_err());
    }

    #[test]
    fn sup_distance_monotone_under_entrywise_dominance() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..50 {
            let z1 = ReturnTable::random(3, 2, 4, 3.0, &mut rng);
            let z2 = ReturnTable::random(3, 2, 4, 3.0, &mut rng);
            let z3 = ReturnTable::random(3, 2, 4, 3.0, &mut rng);
            // If every entry of (z1, z2) is no farther apart than (z1, z3),
            // so is the supremum.
            let dominated =
                z1.entries()
                    .iter()
                    .zip(z2.entries())
                    .zip(z3.entries())
                    .all(|((a, b), c)| {
                        energy_distance_discrete(a, b) <= energy_distance_discrete(a, c)
                    });
            let brute = |x: &ReturnTable, y: &ReturnTable| {
                let mut best = 0.0f64;
                for s in 0..3 {
                    for a in 0..2 {
                        best = best.max(energy_distance_discrete(x.get(s, a), y.get(s, a)));
                    }
                }
                best
            };
            assert_eq!(sup_energy_distance(&z1, &z2).unwrap(), brute(&z1, &z2));
            if dominated {
                assert!(
                    sup_energy_distance(&z1, &z2).unwrap()
                        <= sup_energy_distance(&z1, &z3).unwrap()
                );
            }
        }
    }

    #[test]
    fn projection_preserves_mean_and_support() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let x = DiscreteReturnDist::random(500, 4.0, &mut rng);
        let p = x.project_uniform(32);
        assert!(p.len() <= 32);
        assert!((p.mean() - x.mean()).abs() < 1e-12);
        assert_eq!(p.atoms()[0], x.atoms()[0]);
        assert_eq!(p.atoms()[p.len() - 1], x.atoms()[x.len() - 1]);
        let spacing = (x.atoms()[x.len() - 1] - x.atoms()[0]) / 31.0;
        assert!(energy_distance_discrete(&x, &p) <= spacing);
    }

    proptest! {
        #[test]
        fn matches_fine_grid(
            a in prop::collection::vec((-3.0..3.0f64, 0.01..1.0f64), 1..5),
            b in prop::collection::vec((-3.0..3.0f64, 0.01..1.0f64), 1..5),
        ) {
            let (d1, d2) = (d(&a), d(&b));
            let exact = energy_distance_discrete(&d1, &d2);
            let approx = grid_integral(&d1, &d2, -3.5, 3.5);
            prop_assert!((exact - approx).abs() < 1e-3, "{} vs {}", exact, approx);
            prop_assert!((exact - energy_distance_discrete(&d2, &d1)).abs() < 1e-14);
        }

        #[test]
        fn scale_law(
            a in prop::collection::vec((-3.0..3.0f64, 0.01..1.0f64), 1..5),
            b in prop::collection::vec((-3.0..3.0f64, 0.01..1.0f64), 1..5),
            k in 0.1..10.0f64, c in -5.0..5.0f64,
        ) {
            let (d1, d2) = (d(&a), d(&b));
            let base = energy_distance_discrete(&d1, &d2);
            let scaled = energy_distance_discrete(&d1.affine(c, k), &d2.affine(c, k));
            prop_assert!((scaled - k * base).abs() <= 1e-10 * (1.0 + k * base));
        }
    }
}
