//! The reference measure on the mark space `L = R` together with its
//! quadrature and inverse-CDF sampler.

use std::fmt;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;

use crate::error::{Error, Result};

/// Total mass of a measure.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Mass {
    Finite(f64),
    Infinite,
}

impl Mass {
    pub fn finite(self) -> Option<f64> {
        match self {
            Mass::Finite(m) => Some(m),
            Mass::Infinite => None,
        }
    }
}

/// A density on `R \ {0}` with closed-form tails.
pub trait MarkDensity: Send + Sync {
    fn density(&self, z: f64) -> f64;

    /// `nu([y, inf))` for `y > 0`.
    fn tail_upper(&self, y: f64) -> f64;

    /// `nu((-inf, y])` for `y < 0`.
    fn tail_lower(&self, y: f64) -> f64;

    /// `nu((0, inf))`, possibly infinite.
    fn positive_mass(&self) -> f64;

    /// `nu((-inf, 0))`, possibly infinite.
    fn negative_mass(&self) -> f64;

    /// Inverse CDF of the normalized measure, `u` in `(0, 1)`. `None` when the
    /// measure cannot be normalized.
    fn inverse_cdf(&self, u: f64) -> Option<f64>;

    fn total_mass(&self) -> Mass {
        let m = self.positive_mass() + self.negative_mass();
        if m.is_finite() {
            Mass::Finite(m)
        } else {
            Mass::Infinite
        }
    }

    /// `nu((a, b) \ {0})` for `a < b`.
    fn mass_between(&self, a: f64, b: f64) -> f64 {
        if b <= a {
            return 0.0;
        }
        if a >= 0.0 {
            let upper = |y: f64| if y > 0.0 { self.tail_upper(y) } else { self.positive_mass() };
            upper(a) - upper(b)
        } else if b <= 0.0 {
            let lower = |y: f64| if y < 0.0 { self.tail_lower(y) } else { self.negative_mass() };
            lower(b) - lower(a)
        } else {
            self.mass_between(a, 0.0) + self.mass_between(0.0, b)
        }
    }
}

/// Two-sided exponential density `c_up e^{-r_up z}` on `z > 0` and
/// `c_down e^{r_down z}` on `z < 0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DoubleExponential {
    pub up_intensity: f64,
    pub up_rate: f64,
    pub down_intensity: f64,
    pub down_rate: f64,
}

impl DoubleExponential {
    /// `intensity * e^{-|z|}`; total mass `2 * intensity`.
    pub fn symmetric(intensity: f64) -> Self {
        Self {
            up_intensity: intensity,
            up_rate: 1.0,
            down_intensity: intensity,
            down_rate: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let ok = self.up_intensity >= 0.0
            && self.down_intensity >= 0.0
            && self.up_rate > 0.0
            && self.down_rate > 0.0
            && self.up_intensity.is_finite()
            && self.down_intensity.is_finite();
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidArgument(format!("invalid double exponential law {self:?}")))
        }
    }
}

impl MarkDensity for DoubleExponential {
    fn density(&self, z: f64) -> f64 {
        if z > 0.0 {
            self.up_intensity * (-self.up_rate * z).exp()
        } else if z < 0.0 {
            self.down_intensity * (self.down_rate * z).exp()
        } else {
            0.0
        }
    }

    fn tail_upper(&self, y: f64) -> f64 {
        self.up_intensity / self.up_rate * (-self.up_rate * y).exp()
    }

    fn tail_lower(&self, y: f64) -> f64 {
        self.down_intensity / self.down_rate * (self.down_rate * y).exp()
    }

    fn positive_mass(&self) -> f64 {
        self.up_intensity / self.up_rate
    }

    fn negative_mass(&self) -> f64 {
        self.down_intensity / self.down_rate
    }

    fn inverse_cdf(&self, u: f64) -> Option<f64> {
        let down = self.negative_mass();
        let up = self.positive_mass();
        let total = down + up;
        if !(total > 0.0) {
            return None;
        }
        let split = down / total;
        if u < split {
            Some((u * total / down).ln() / self.down_rate)
        } else {
            Some(-((1.0 - u) * total / up).ln() / self.up_rate)
        }
    }
}

/// The zero measure.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct NoJumps;

impl MarkDensity for NoJumps {
    fn density(&self, _z: f64) -> f64 {
        0.0
    }
    fn tail_upper(&self, _y: f64) -> f64 {
        0.0
    }
    fn tail_lower(&self, _y: f64) -> f64 {
        0.0
    }
    fn positive_mass(&self) -> f64 {
        0.0
    }
    fn negative_mass(&self) -> f64 {
        0.0
    }
    fn inverse_cdf(&self, _u: f64) -> Option<f64> {
        None
    }
}

/// Window and node budget for the mark quadrature.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuadratureSpec {
    pub z_cut: f64,
    pub nodes: usize,
    /// Gauss-Legendre order per panel.
    pub order: usize,
    /// Relative tolerance of the mass invariant.
    pub mass_tolerance: f64,
}

impl QuadratureSpec {
    pub fn window(z_cut: f64, nodes: usize) -> Self {
        Self {
            z_cut,
            nodes,
            order: 8,
            mass_tolerance: 1e-6,
        }
    }

    /// Smallest window (on a 1/8 lattice) whose outside mass is below `tail_tolerance`.
    pub fn auto(law: &dyn MarkDensity, tail_tolerance: f64, nodes: usize) -> Self {
        let mut z = 0.125;
        while z < 1e4 && law.tail_upper(z) + law.tail_lower(-z) > tail_tolerance {
            z += 0.125;
        }
        Self::window(z, nodes)
    }
}

/// Composite Gauss-Legendre nodes on `[-Z, 0]` and `[0, Z]` with weights that
/// already include the density.
#[derive(Debug, Clone, PartialEq)]
pub struct Quadrature {
    nodes: Vec<f64>,
    weights: Vec<f64>,
    z_cut: f64,
    outside_mass: f64,
    window_mass: f64,
}

impl Quadrature {
    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn z_cut(&self) -> f64 {
        self.z_cut
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Quadrature of the constant one.
    pub fn mass(&self) -> f64 {
        self.weights.iter().sum()
    }

    /// Exact reference mass of the window, used by the mass invariant.
    pub fn window_mass(&self) -> f64 {
        self.window_mass
    }

    /// Reference mass outside `[-Z, Z]`, the source of truncation error.
    pub fn outside_mass(&self) -> f64 {
        self.outside_mass
    }

    pub fn integrate<F: FnMut(f64) -> f64>(&self, mut g: F) -> f64 {
        self.nodes.iter().zip(&self.weights).map(|(&z, &w)| w * g(z)).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = (f64, f64)> + '_ {
        self.nodes.iter().copied().zip(self.weights.iter().copied())
    }
}

/// The reference measure on marks with its fixed quadrature.
#[derive(Clone)]
pub struct JumpReferenceMeasure {
    law: Arc<dyn MarkDensity>,
    quadrature: Quadrature,
    spec: QuadratureSpec,
}

impl fmt::Debug for JumpReferenceMeasure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("JumpReferenceMeasure")
            .field("total_mass", &self.total_mass())
            .field("spec", &self.spec)
            .finish()
    }
}

impl JumpReferenceMeasure {
    pub fn new(law: Arc<dyn MarkDensity>, spec: QuadratureSpec) -> Result<Self> {
        let quadrature = build_quadrature(law.as_ref(), &spec)?;
        let measure = Self { law, quadrature, spec };
        measure.check_mass_invariant()?;
        Ok(measure)
    }

    pub fn none() -> Self {
        Self::new(Arc::new(NoJumps), QuadratureSpec::window(1.0, 0)).expect("zero measure")
    }

    pub fn double_exponential(law: DoubleExponential, spec: QuadratureSpec) -> Result<Self> {
        law.validate()?;
        Self::new(Arc::new(law), spec)
    }

    pub fn law(&self) -> &dyn MarkDensity {
        self.law.as_ref()
    }

    pub fn quadrature(&self) -> &Quadrature {
        &self.quadrature
    }

    pub fn spec(&self) -> &QuadratureSpec {
        &self.spec
    }

    pub fn density(&self, z: f64) -> f64 {
        self.law.density(z)
    }

    pub fn total_mass(&self) -> Mass {
        self.law.total_mass()
    }

    pub fn tail_upper(&self, y: f64) -> f64 {
        self.law.tail_upper(y)
    }

    pub fn tail_lower(&self, y: f64) -> f64 {
        self.law.tail_lower(y)
    }

    /// Quadrature mass must reproduce the exact window mass. Windows of
    /// infinite mass (singular densities) are not checked.
    pub fn check_mass_invariant(&self) -> Result<()> {
        let q = &self.quadrature;
        if q.weights.iter().any(|w| !(*w >= 0.0) || !w.is_finite()) {
            return Err(Error::Quadrature("negative or non-finite weight".into()));
        }
        let exact = q.window_mass;
        if exact.is_finite() {
            let err = (q.mass() - exact).abs();
            if err > self.spec.mass_tolerance * exact.max(1.0) {
                return Err(Error::Quadrature(format!(
                    "quadrature mass {} differs from window mass {exact} by {err}",
                    q.mass()
                )));
            }
        }
        Ok(())
    }

    /// Mass of `{z != 0 : g(z) >= y}` for `y > 0`, or of `{z != 0 : g(z) <= y}`
    /// for `y < 0`.
    ///
    /// The window is scanned on a fine lattice; every sign change of the
    /// predicate is located by bisection and cell masses come from the exact
    /// tails, so the result is exact up to bisection tolerance whenever `g` is
    /// monotone on each lattice cell. Beyond the window the predicate is taken
    /// to be constant.
    pub fn level_set_mass<G: Fn(f64) -> f64>(&self, g: G, y: f64) -> f64 {
        debug_assert!(y != 0.0);
        let pred = |z: f64| {
            let v = g(z);
            if y > 0.0 {
                v >= y
            } else {
                v <= y
            }
        };
        let z_cut = self.quadrature.z_cut;
        let cells = 4096usize.max(4 * self.quadrature.len());
        let eps = 1e-14 * z_cut.max(1.0);
        let mut total = 0.0;
        let span = |a: f64, b: f64| if a < b { self.law.mass_between(a, b) } else { self.law.mass_between(b, a) };
        for side in [-1.0_f64, 1.0] {
            let point = |k: usize| {
                if k == 0 {
                    side * eps
                } else {
                    side * z_cut * k as f64 / cells as f64
                }
            };
            // runs where the predicate holds are measured in one piece
            let mut a = point(0);
            let mut pa = pred(a);
            let mut run_start = if pa { Some(0.0) } else { None };
            for k in 1..=cells {
                let b = point(k);
                let pb = pred(b);
                if pa != pb {
                    let (mut inside, mut outside) = if pa { (a, b) } else { (b, a) };
                    for _ in 0..200 {
                        let mid = 0.5 * (inside + outside);
                        if mid == inside || mid == outside {
                            break;
                        }
                        if pred(mid) {
                            inside = mid;
                        } else {
                            outside = mid;
                        }
                    }
                    let cross = 0.5 * (inside + outside);
                    match run_start.take() {
                        Some(start) => total += span(start, cross),
                        None => run_start = Some(cross),
                    }
                }
                a = b;
                pa = pb;
            }
            if let Some(start) = run_start {
                total += span(start, side * z_cut);
                total += if side > 0.0 {
                    self.law.tail_upper(z_cut)
                } else {
                    self.law.tail_lower(-z_cut)
                };
            }
        }
        total
    }
}

fn build_quadrature(law: &dyn MarkDensity, spec: &QuadratureSpec) -> Result<Quadrature> {
    if !(spec.z_cut > 0.0) || !spec.z_cut.is_finite() {
        return Err(Error::Quadrature(format!("window half-width must be positive, got {}", spec.z_cut)));
    }
    let window_mass = law.mass_between(-spec.z_cut, spec.z_cut);
    let outside_mass = law.tail_upper(spec.z_cut) + law.tail_lower(-spec.z_cut);
    if spec.nodes == 0 || law.positive_mass() + law.negative_mass() == 0.0 {
        return Ok(Quadrature {
            nodes: Vec::new(),
            weights: Vec::new(),
            z_cut: spec.z_cut,
            outside_mass,
            window_mass,
        });
    }
    let order = spec.order.clamp(1, spec.nodes.div_ceil(2).max(1));
    let panels = spec.nodes.div_ceil(2 * order).max(1);
    let rule = GaussLegendre::new(NonZeroUsize::new(order).expect("order >= 1"));
    let width = spec.z_cut / panels as f64;
    let mut nodes = Vec::with_capacity(2 * panels * order);
    let mut weights = Vec::with_capacity(2 * panels * order);
    for p in 0..2 * panels {
        let left = -spec.z_cut + p as f64 * width;
        let mid = left + 0.5 * width;
        let mut pairs: Vec<(f64, f64)> = rule.as_node_weight_pairs().to_vec();
        pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
        for (t, w) in pairs {
            let z = mid + 0.5 * width * t;
            nodes.push(z);
            weights.push(0.5 * width * w * law.density(z));
        }
    }
    Ok(Quadrature {
        nodes,
        weights,
        z_cut: spec.z_cut,
        outside_mass,
        window_mass,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kou_measure(intensity: f64) -> JumpReferenceMeasure {
        JumpReferenceMeasure::double_exponential(
            DoubleExponential::symmetric(intensity),
            QuadratureSpec::window(10.0, 401),
        )
        .unwrap()
    }

    #[test]
    fn quadrature_reproduces_window_mass() {
        let m = kou_measure(2.0);
        let exact = 4.0 * (1.0 - (-10.0_f64).exp());
        assert!((m.quadrature().mass() - exact).abs() < 1e-12);
        assert!((m.quadrature().outside_mass() - 4.0 * (-10.0_f64).exp()).abs() < 1e-15);
        assert!(m.quadrature().weights().iter().all(|w| *w >= 0.0));
        assert_eq!(m.total_mass(), Mass::Finite(4.0));
    }

    #[test]
    fn quadrature_is_sorted_and_avoids_origin() {
        let m = kou_measure(1.0);
        let z = m.quadrature().nodes();
        assert!(z.windows(2).all(|w| w[0] < w[1]));
        assert!(z.iter().all(|v| *v != 0.0));
    }

    #[test]
    fn second_moment_matches_closed_form() {
        // int z^2 e^{-|z|} over [-Z, Z] = 2 (2 - e^{-Z}(Z^2 + 2Z + 2))
        let m = kou_measure(1.0);
        let z: f64 = 10.0;
        let exact = 2.0 * (2.0 - (-z).exp() * (z * z + 2.0 * z + 2.0));
        let q = m.quadrature().integrate(|v| v * v);
        assert!((q - exact).abs() < 1e-10, "{q} vs {exact}");
    }

    #[test]
    fn inverse_cdf_inverts_tails() {
        let law = DoubleExponential {
            up_intensity: 2.0,
            up_rate: 3.0,
            down_intensity: 1.0,
            down_rate: 0.5,
        };
        let total = law.positive_mass() + law.negative_mass();
        for u in [0.01, 0.2, 0.5, 0.7, 0.99] {
            let z = law.inverse_cdf(u).unwrap();
            let cdf = if z < 0.0 {
                law.tail_lower(z) / total
            } else {
                1.0 - law.tail_upper(z) / total
            };
            assert!((cdf - u).abs() < 1e-12, "u={u} z={z} cdf={cdf}");
        }
        assert!(NoJumps.inverse_cdf(0.5).is_none());
    }

    #[test]
    fn tails_are_monotone() {
        let m = kou_measure(1.5);
        let ys: Vec<f64> = (1..200).map(|k| k as f64 * 0.05).collect();
        assert!(ys.windows(2).all(|w| m.tail_upper(w[0]) >= m.tail_upper(w[1])));
        assert!(ys.windows(2).all(|w| m.tail_lower(-w[1]) <= m.tail_lower(-w[0])));
    }

    #[test]
    fn level_set_of_identity_is_the_tail() {
        let m = kou_measure(1.0);
        for y in [0.1, 1.0, 3.0, 9.5] {
            assert!((m.level_set_mass(|z| z, y) - m.tail_upper(y)).abs() < 1e-13);
            assert!((m.level_set_mass(|z| z, -y) - m.tail_lower(-y)).abs() < 1e-13);
        }
        assert_eq!(m.level_set_mass(|_| 0.0, 0.5), 0.0);
    }

    #[test]
    fn rejects_bad_window() {
        let r = JumpReferenceMeasure::double_exponential(
            DoubleExponential::symmetric(1.0),
            QuadratureSpec::window(0.0, 100),
        );
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn coarse_quadrature_fails_mass_invariant() {
        let mut spec = QuadratureSpec::window(40.0, 2);
        spec.order = 1;
        let r = JumpReferenceMeasure::double_exponential(DoubleExponential::symmetric(1.0), spec);
        assert!(matches!(r, Err(Error::Quadrature(_))));
    }

    #[test]
    fn auto_window_controls_tail_mass() {
        let law = DoubleExponential::symmetric(2.0);
        let spec = QuadratureSpec::auto(&law, 1e-8, 200);
        assert!(law.tail_upper(spec.z_cut) + law.tail_lower(-spec.z_cut) <= 1e-8);
        assert!(law.tail_upper(spec.z_cut - 0.125) + law.tail_lower(-spec.z_cut + 0.125) > 1e-8);
    }
}
