//! Robust double-exponential (Kou-type) model: drift, variance and jump
//! intensity range over intervals, parameterized by `f in [0,1]^3`.
//!
//! Jumps are represented as a push-forward of the reference measure
//! `nu(dz) = lambda_star e^{-|z|} dz` through the clamped map
//!
//! ```text
//! k(f, x, z) = max(z - log(lambda_star / lambda(f, x)), 0)   z > 0
//!            = min(z + log(lambda_star / lambda(f, x)), 0)   z < 0
//! ```
//!
//! whose push-forward is exactly `lambda(f, x) e^{-|y|} dy` away from the
//! origin. The unclamped shift would move mass across zero whenever
//! `lambda < lambda_star`.

use std::f64::consts::PI;
use std::num::NonZeroUsize;
use std::sync::Arc;

use gauss_quad::legendre::GaussLegendre;
use num_complex::Complex64;

use crate::audit::{AuditSpec, Majorant, StateBox};
use crate::control::ControlGrid;
use crate::error::{Error, Result};
use crate::field::{CoefficientField, Coefficients};
use crate::functions::GaussianBump;
use crate::measure::{DoubleExponential, JumpReferenceMeasure, QuadratureSpec};
use crate::truncation::TruncationFunction;

/// An interval endpoint as a function of the state.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Bound {
    Constant(f64),
    /// `level + amplitude * tanh(x / scale)`
    Tanh { level: f64, amplitude: f64, scale: f64 },
}

impl Bound {
    #[inline]
    pub fn eval(&self, x: f64) -> f64 {
        match *self {
            Bound::Constant(c) => c,
            Bound::Tanh { level, amplitude, scale } => level + amplitude * (x / scale).tanh(),
        }
    }

    pub fn lipschitz(&self) -> f64 {
        match *self {
            Bound::Constant(_) => 0.0,
            Bound::Tanh { amplitude, scale, .. } => amplitude.abs() / scale,
        }
    }

    /// Closed range of the map.
    pub fn range(&self) -> (f64, f64) {
        match *self {
            Bound::Constant(c) => (c, c),
            Bound::Tanh { level, amplitude, .. } => (level - amplitude.abs(), level + amplitude.abs()),
        }
    }

    fn is_valid(&self) -> bool {
        match *self {
            Bound::Constant(c) => c.is_finite(),
            Bound::Tanh { level, amplitude, scale } => level.is_finite() && amplitude.is_finite() && scale > 0.0,
        }
    }
}

impl From<f64> for Bound {
    fn from(c: f64) -> Self {
        Bound::Constant(c)
    }
}

/// Interval bounds for drift, variance and intensity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KouSpec {
    pub b_lo: Bound,
    pub b_hi: Bound,
    pub a_lo: Bound,
    pub a_hi: Bound,
    pub lambda_lo: Bound,
    pub lambda_hi: Bound,
    /// Reference intensity of `nu`.
    pub lambda_star: f64,
    /// Uniform positive lower bound of the intensity.
    pub lambda_floor: f64,
}

/// Sample states used to check state-dependent bound orderings.
const ORDER_SAMPLES: usize = 4001;
const ORDER_RADIUS: f64 = 100.0;

impl KouSpec {
    /// Constant intervals.
    pub fn intervals(b: (f64, f64), a: (f64, f64), lambda: (f64, f64), lambda_star: f64) -> Self {
        Self {
            b_lo: b.0.into(),
            b_hi: b.1.into(),
            a_lo: a.0.into(),
            a_hi: a.1.into(),
            lambda_lo: lambda.0.into(),
            lambda_hi: lambda.1.into(),
            lambda_star,
            lambda_floor: lambda.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let all = [self.b_lo, self.b_hi, self.a_lo, self.a_hi, self.lambda_lo, self.lambda_hi];
        if all.iter().any(|b| !b.is_valid()) || !self.lambda_star.is_finite() {
            return Err(Error::InvalidSpec("bounds must be finite".into()));
        }
        if !(self.lambda_floor > 0.0) {
            return Err(Error::InvalidSpec(format!("lambda_floor must be positive, got {}", self.lambda_floor)));
        }
        let check = |name: &str, ok: bool, x: f64| {
            if ok {
                Ok(())
            } else {
                Err(Error::InvalidSpec(format!("{name} violated at x = {x}")))
            }
        };
        let samples = (0..ORDER_SAMPLES)
            .map(|k| -ORDER_RADIUS + 2.0 * ORDER_RADIUS * k as f64 / (ORDER_SAMPLES - 1) as f64)
            .chain([f64::NEG_INFINITY, f64::INFINITY]);
        for x in samples {
            let ev = |b: &Bound| match *b {
                Bound::Tanh { level, amplitude, .. } if x.is_infinite() => level + amplitude * x.signum(),
                _ => b.eval(x),
            };
            check("b_lo <= b_hi", ev(&self.b_lo) <= ev(&self.b_hi), x)?;
            check("0 <= a_lo", ev(&self.a_lo) >= 0.0, x)?;
            check("a_lo <= a_hi", ev(&self.a_lo) <= ev(&self.a_hi), x)?;
            check("lambda_floor <= lambda_lo", self.lambda_floor <= ev(&self.lambda_lo), x)?;
            check("lambda_lo <= lambda_hi", ev(&self.lambda_lo) <= ev(&self.lambda_hi), x)?;
            check("lambda_hi <= lambda_star", ev(&self.lambda_hi) <= self.lambda_star, x)?;
        }
        Ok(())
    }

    /// True when every interval has collapsed to a point.
    pub fn is_degenerate(&self) -> bool {
        self.b_lo == self.b_hi && self.a_lo == self.a_hi && self.lambda_lo == self.lambda_hi
    }

    #[inline]
    pub fn drift(&self, f: &[f64], x: f64) -> f64 {
        let lo = self.b_lo.eval(x);
        lo + f[0] * (self.b_hi.eval(x) - lo)
    }

    #[inline]
    pub fn variance(&self, f: &[f64], x: f64) -> f64 {
        let lo = self.a_lo.eval(x);
        lo + f[1] * (self.a_hi.eval(x) - lo)
    }

    #[inline]
    pub fn intensity(&self, f: &[f64], x: f64) -> f64 {
        let lo = self.lambda_lo.eval(x);
        lo + f[2] * (self.lambda_hi.eval(x) - lo)
    }

    /// Declared constants for [`crate::audit::audit_conditions`]: Lipschitz
    /// constants from the bound maps, `gamma` from the 1-Lipschitz dependence
    /// of the clamped jump on `log lambda`, and `beta(z) = |z|`.
    pub fn audit_spec(&self, state_box: StateBox) -> AuditSpec {
        let lip_b = self.b_lo.lipschitz().max(self.b_hi.lipschitz());
        let lip_a = self.a_lo.lipschitz().max(self.a_hi.lipschitz());
        let a_min = self.a_lo.range().0;
        let lip_sigma = if lip_a == 0.0 {
            0.0
        } else if a_min > 0.0 {
            lip_a / (2.0 * a_min.sqrt())
        } else {
            f64::INFINITY
        };
        let lip_lambda = self.lambda_lo.lipschitz().max(self.lambda_hi.lipschitz());
        let b_sup = self.b_lo.range().0.abs().max(self.b_hi.range().1.abs());
        let sigma_sup = self.a_hi.range().1.max(0.0).sqrt();
        let moment = 2.0 * (2.0 - 4.0 / std::f64::consts::E) * self.lambda_star;
        // the audit integrates |k|^2 ^ 1, which has a kink at |k| = 1 that
        // the panels do not resolve; allow for that quadrature error
        AuditSpec::new(state_box)
            .lipschitz((lip_b + lip_sigma) * (1.0 + 1e-9))
            .coefficient_bound((b_sup + sigma_sup) * (1.0 + 1e-6) + moment * (1.0 + 1e-3))
            .gamma(Majorant::Constant(lip_lambda / self.lambda_floor))
            .beta(Majorant::Affine { intercept: 0.0, slope: 1.0 })
    }
}

/// The clamped push-forward map for intensity `lambda` against reference
/// intensity `lambda_star`.
#[inline]
pub fn clamped_jump(lambda: f64, lambda_star: f64, z: f64) -> f64 {
    let shift = (lambda_star / lambda).ln();
    if z > 0.0 {
        (z - shift).max(0.0)
    } else if z < 0.0 {
        (z + shift).min(0.0)
    } else {
        0.0
    }
}

/// [`Coefficients`] of the interval model; controls are `(f1, f2, f3)`.
#[derive(Debug, Clone)]
pub struct KouCoefficients {
    spec: KouSpec,
}

impl KouCoefficients {
    pub fn new(spec: KouSpec) -> Result<Self> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &KouSpec {
        &self.spec
    }
}

impl Coefficients for KouCoefficients {
    fn dimension(&self) -> usize {
        1
    }

    fn drift(&self, f: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = self.spec.drift(f, x[0]);
    }

    fn dispersion(&self, f: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = self.spec.variance(f, x[0]).max(0.0).sqrt();
    }

    fn jump(&self, f: &[f64], x: &[f64], z: f64, out: &mut [f64]) {
        out[0] = clamped_jump(self.spec.intensity(f, x[0]), self.spec.lambda_star, z);
    }
}

/// Default mark quadrature for the model: window with outside mass below
/// `1e-8 * lambda_star`, 401 nodes.
pub fn default_quadrature(spec: &KouSpec) -> QuadratureSpec {
    QuadratureSpec::auto(&DoubleExponential::symmetric(spec.lambda_star), 1e-8 * spec.lambda_star, 401)
}

/// Build the coefficient field on `F = [0,1]^3` gridded at `control_resolution`
/// points per axis.
///
/// The generator is affine in each of `f1`, `f2`, `f3` (the jump integral is
/// linear in the intensity), so resolution 2 already attains the supremum
/// over the whole box.
pub fn build_field(spec: &KouSpec, control_resolution: usize, quadrature: QuadratureSpec) -> Result<CoefficientField> {
    let coeffs = KouCoefficients::new(*spec)?;
    let controls = ControlGrid::uniform(&[0.0; 3], &[1.0; 3], control_resolution)?;
    let reference =
        JumpReferenceMeasure::double_exponential(DoubleExponential::symmetric(spec.lambda_star), quadrature)?;
    CoefficientField::new(Arc::new(coeffs), reference, TruncationFunction::default(), controls)
}

/// Largest deviation between the push-forward tails of the built field and
/// the closed form `lambda(f, x) e^{-|y|}` over `thresholds`.
pub fn verify_pushforward(spec: &KouSpec, f: &[f64], x: f64, thresholds: &[f64]) -> Result<f64> {
    if f.len() != 3 {
        return Err(Error::InvalidArgument("controls are (f1, f2, f3)".into()));
    }
    let field = build_field(spec, 1, default_quadrature(spec))?.with_controls(ControlGrid::singleton(f)?)?;
    let lambda = spec.intensity(f, x);
    let mut worst = 0.0_f64;
    for &y in thresholds {
        let tail = field.pushforward_tail(crate::ControlId(0), &[x], y)?;
        worst = worst.max((tail - lambda * (-y.abs()).exp()).abs());
    }
    Ok(worst)
}

/// Constant-coefficient member of the family: `(b, a, lambda)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinearKouTriplet {
    pub b: f64,
    pub a: f64,
    pub lambda: f64,
}

impl LinearKouTriplet {
    /// Degenerate interval spec with `lambda_star = lambda`.
    pub fn spec(&self) -> KouSpec {
        KouSpec::intervals((self.b, self.b), (self.a, self.a), (self.lambda, self.lambda), self.lambda)
    }

    fn validate(&self) -> Result<()> {
        if !(self.a >= 0.0 && self.lambda >= 0.0 && self.b.is_finite() && self.a.is_finite() && self.lambda.is_finite()) {
            return Err(Error::InvalidSpec(format!("invalid triplet {self:?}")));
        }
        Ok(())
    }
}

/// `int_0^inf (h(y) + h(-y)) e^{-y} dy` by composite Gauss-Legendre.
fn truncation_asymmetry(truncation: &TruncationFunction) -> f64 {
    if truncation.is_odd() {
        return 0.0;
    }
    // kinks of typical truncations sit at the identity radius and where |h| saturates
    let mut breaks = vec![0.0, truncation.identity_radius(), truncation.sup_bound(), 80.0];
    breaks.retain(|b| (0.0..=80.0).contains(b));
    breaks.sort_by(f64::total_cmp);
    breaks.dedup();
    let rule = GaussLegendre::new(NonZeroUsize::new(16).expect("nonzero"));
    let g = |y: f64| (truncation.apply1(y) + truncation.apply1(-y)) * (-y).exp();
    breaks
        .windows(2)
        .map(|w| {
            let panels = ((w[1] - w[0]) / 0.25).ceil().max(1.0) as usize;
            let width = (w[1] - w[0]) / panels as f64;
            (0..panels)
                .map(|p| {
                    let a = w[0] + p as f64 * width;
                    rule.integrate(a, a + width, g)
                })
                .sum::<f64>()
        })
        .sum()
}

/// `log E[e^{i xi X_1}]` for the Lévy process with drift `b` (relative to
/// `h`), variance `a` and Lévy measure `lambda e^{-|y|} dy`:
/// `i b xi - a xi^2 / 2 + lambda (2 / (1 + xi^2) - 2) - i xi lambda int h(y) e^{-|y|} dy`.
pub fn characteristic_exponent(triplet: &LinearKouTriplet, truncation: &TruncationFunction, xi: f64) -> Complex64 {
    let jumps = triplet.lambda * (2.0 / (1.0 + xi * xi) - 2.0);
    let compensator = triplet.lambda * truncation_asymmetry(truncation);
    Complex64::new(-0.5 * triplet.a * xi * xi + jumps, triplet.b * xi - xi * compensator)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierValue {
    pub value: f64,
    /// Frequency truncation bound plus the change under doubling the panel count.
    pub error_estimate: f64,
}

/// `E[psi(x0 + X_T)]` by Fourier inversion,
/// `(1 / 2 pi) int psi_hat(xi) e^{i xi x0} e^{T eta(xi)} dxi`.
pub fn fourier_reference(
    triplet: &LinearKouTriplet,
    truncation: &TruncationFunction,
    psi: &GaussianBump,
    horizon: f64,
    x0: f64,
) -> Result<FourierValue> {
    triplet.validate()?;
    if !(psi.width > 0.0) || !psi.height.is_finite() || !psi.center.is_finite() {
        return Err(Error::InvalidArgument("terminal data must be a Gaussian bump with positive width".into()));
    }
    if !(horizon >= 0.0) {
        return Err(Error::InvalidArgument(format!("horizon must be nonnegative, got {horizon}")));
    }
    let compensator = triplet.lambda * truncation_asymmetry(truncation);
    let exponent = |xi: f64| {
        let jumps = triplet.lambda * (2.0 / (1.0 + xi * xi) - 2.0);
        Complex64::new(-0.5 * triplet.a * xi * xi + jumps, triplet.b * xi - xi * compensator)
    };
    let integrand = |xi: f64| {
        let v = psi.fourier_transform(xi) * Complex64::from_polar(1.0, xi * x0) * (horizon * exponent(xi)).exp();
        v.re
    };
    let cutoff = 10.0 / psi.width;
    let rule = GaussLegendre::new(NonZeroUsize::new(16).expect("nonzero"));
    let integrate = |panels: usize| {
        let width = cutoff / panels as f64;
        (0..panels)
            .map(|p| {
                let a = p as f64 * width;
                rule.integrate(a, a + width, integrand)
            })
            .sum::<f64>()
            / PI
    };
    let coarse = integrate(100);
    let fine = integrate(200);
    // (1 / pi) int_cutoff^inf |psi_hat| <= |h| sqrt(2 pi) e^{-(w c)^2 / 2} / (pi w c)
    let wc = psi.width * cutoff;
    let truncation_bound = psi.height.abs() * (2.0 * PI).sqrt() * (-0.5 * wc * wc).exp() / (PI * wc);
    Ok(FourierValue {
        value: fine,
        error_estimate: (fine - coarse).abs() + truncation_bound,
    })
}
