//! Jump maps from kernels by monotone tail inversion.
//!
//! Given tails of a target kernel `K` and a reference measure `nu` on the
//! line, `k(y) = sup{z > 0 : K([z, inf)) >= nu([y, inf))}` for `y > 0` (and
//! the mirror image for `y < 0`, `sup of the empty set = 0`) pushes `nu`
//! forward to `K` whenever `nu` is non-atomic and carries at least as much
//! mass as `K` on each half-line.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// A tail `m -> mass beyond distance m` on one half-line, evaluated at the
/// magnitude `m = |y| > 0`.
#[derive(Clone)]
pub enum Tail {
    /// `mass * exp(-rate m)`.
    Exponential { mass: f64, rate: f64 },
    /// `scale * m^(-exponent)`; infinite mass near 0.
    PowerLaw { scale: f64, exponent: f64 },
    /// `base(m)` plus a point mass at distance `location`.
    WithAtom { base: Box<Tail>, location: f64, mass: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Tail {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Tail::Exponential { mass, rate } => write!(f, "Exponential({mass}, {rate})"),
            Tail::PowerLaw { scale, exponent } => write!(f, "PowerLaw({scale}, {exponent})"),
            Tail::WithAtom { base, location, mass } => write!(f, "WithAtom({base:?}, {location}, {mass})"),
            Tail::Custom(_) => f.write_str("Custom"),
        }
    }
}

impl Tail {
    pub fn exponential(mass: f64, rate: f64) -> Self {
        Tail::Exponential { mass, rate }
    }

    pub fn power_law(scale: f64, exponent: f64) -> Self {
        Tail::PowerLaw { scale, exponent }
    }

    pub fn with_atom(self, location: f64, mass: f64) -> Self {
        Tail::WithAtom { base: Box::new(self), location, mass }
    }

    pub fn custom<F: Fn(f64) -> f64 + Send + Sync + 'static>(f: F) -> Self {
        Tail::Custom(Arc::new(f))
    }

    pub fn eval(&self, m: f64) -> f64 {
        match self {
            Tail::Exponential { mass, rate } => mass * (-rate * m).exp(),
            Tail::PowerLaw { scale, exponent } => scale * m.powf(-exponent),
            Tail::WithAtom { base, location, mass } => base.eval(m) + if m <= *location { *mass } else { 0.0 },
            Tail::Custom(f) => f(m),
        }
    }

    fn check_parameters(&self) -> Result<()> {
        let ok = match self {
            Tail::Exponential { mass, rate } => *mass >= 0.0 && mass.is_finite() && *rate > 0.0 && rate.is_finite(),
            Tail::PowerLaw { scale, exponent } => *scale >= 0.0 && scale.is_finite() && *exponent > 0.0 && exponent.is_finite(),
            Tail::WithAtom { base, location, mass } => {
                base.check_parameters()?;
                *location > 0.0 && location.is_finite() && *mass >= 0.0 && mass.is_finite()
            }
            Tail::Custom(_) => true,
        };
        if ok {
            Ok(())
        } else {
            Err(Error::InvalidSpec(format!("invalid tail parameters {self:?}")))
        }
    }
}

/// Upper and lower tails of the target kernel and of the reference measure.
#[derive(Debug, Clone)]
pub struct TailPair {
    pub k_upper: Tail,
    pub k_lower: Tail,
    pub nu_upper: Tail,
    pub nu_lower: Tail,
}

impl TailPair {
    pub fn new(k_upper: Tail, k_lower: Tail, nu_upper: Tail, nu_lower: Tail) -> Self {
        Self { k_upper, k_lower, nu_upper, nu_lower }
    }

    /// Same tails on both half-lines.
    pub fn symmetric(kernel: Tail, reference: Tail) -> Self {
        Self::new(kernel.clone(), kernel, reference.clone(), reference)
    }

    /// Finite and nonincreasing in the magnitude on a log-spaced sample
    /// over `[1e-6, 1e3]`.
    pub fn validate(&self) -> Result<()> {
        for (tail, sign) in [(&self.k_upper, 1.0), (&self.k_lower, -1.0), (&self.nu_upper, 1.0), (&self.nu_lower, -1.0)] {
            tail.check_parameters()?;
            let mut prev = f64::INFINITY;
            for i in 0..=900 {
                let m = 10f64.powf(-6.0 + i as f64 / 100.0);
                let v = tail.eval(m);
                if !v.is_finite() || v < 0.0 || v > prev * (1.0 + 1e-12) {
                    return Err(Error::NonMonotoneTail { at: sign * m });
                }
                prev = v;
            }
        }
        Ok(())
    }

    fn sides(&self, y: f64) -> (&Tail, &Tail) {
        if y > 0.0 {
            (&self.k_upper, &self.nu_upper)
        } else {
            (&self.k_lower, &self.nu_lower)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantileOptions {
    /// Bisection tolerance on `k(y)`.
    pub tol: f64,
    /// Largest magnitude searched before giving up with a truncation flag.
    pub z_max: f64,
}

impl Default for QuantileOptions {
    fn default() -> Self {
        Self { tol: 1e-10, z_max: 1e6 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Quantile {
    pub z: f64,
    /// The search hit `z_max` before the predicate flipped.
    pub truncated: bool,
}

/// `k(y)` by geometric bracketing from `[0, 1]` and bisection.
pub fn quantile_k(tails: &TailPair, y: f64, options: &QuantileOptions) -> Result<Quantile> {
    if !y.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold must be finite, got {y}")));
    }
    if !(options.tol > 0.0) || !(options.z_max > 0.0) {
        return Err(Error::InvalidArgument("tolerance and z_max must be positive".into()));
    }
    if y == 0.0 {
        return Ok(Quantile { z: 0.0, truncated: false });
    }
    let (kernel, reference) = tails.sides(y);
    let sign = y.signum();
    let target = reference.eval(y.abs());
    let holds = |z: f64| kernel.eval(z) >= target;
    let non_monotone = |at: f64| Error::NonMonotoneTail { at: sign * at };

    let (mut lo, mut hi);
    if holds(1.0) {
        lo = 1.0;
        hi = 2.0;
        let mut prev = kernel.eval(lo);
        while holds(hi) {
            let v = kernel.eval(hi);
            if v > prev * (1.0 + 1e-12) {
                return Err(non_monotone(hi));
            }
            prev = v;
            if hi >= options.z_max {
                return Ok(Quantile { z: sign * options.z_max, truncated: true });
            }
            lo = hi;
            hi = (2.0 * hi).min(options.z_max);
        }
    } else {
        hi = 1.0;
        lo = 0.5;
        let mut prev = kernel.eval(hi);
        while !holds(lo) {
            let v = kernel.eval(lo);
            if v < prev * (1.0 - 1e-12) {
                return Err(non_monotone(lo));
            }
            prev = v;
            if lo < options.tol {
                // sup of the empty set
                return Ok(Quantile { z: 0.0, truncated: false });
            }
            hi = lo;
            lo *= 0.5;
        }
    }
    let (k_lo, k_hi) = (kernel.eval(lo), kernel.eval(hi));
    while hi - lo > options.tol {
        let mid = 0.5 * (lo + hi);
        let v = kernel.eval(mid);
        if v > k_lo * (1.0 + 1e-12) || v < k_hi * (1.0 - 1e-12) {
            return Err(non_monotone(mid));
        }
        if v >= target {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(Quantile { z: sign * 0.5 * (lo + hi), truncated: false })
}

/// `nu({z : k(z) >= y})` for `y > 0`, or `nu({z : k(z) <= y})` for `y < 0`.
///
/// `k` is monotone on each half-line, so the level set is a tail interval
/// whose endpoint is located by bisection and measured with the tail of `nu`.
pub fn transported_tail(tails: &TailPair, y: f64, options: &QuantileOptions) -> Result<f64> {
    if y == 0.0 || !y.is_finite() {
        return Err(Error::InvalidArgument(format!("threshold must be finite and nonzero, got {y}")));
    }
    let (_, reference) = tails.sides(y);
    let m = y.abs();
    let reaches = |z: f64| -> Result<bool> { Ok(quantile_k(tails, y.signum() * z, options)?.z.abs() >= m - options.tol) };
    let mut hi = 1.0;
    while !reaches(hi)? {
        if hi >= options.z_max {
            return Ok(0.0);
        }
        hi = (2.0 * hi).min(options.z_max);
    }
    let mut lo = 0.0;
    for _ in 0..200 {
        if hi - lo <= 1e-13 * hi.max(1.0) {
            break;
        }
        let mid = 0.5 * (lo + hi);
        if reaches(mid)? {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Ok(reference.eval(hi))
}

/// Largest gap between the transported tails and the kernel tails over
/// `thresholds`.
pub fn verify_transport(tails: &TailPair, thresholds: &[f64], options: &QuantileOptions) -> Result<f64> {
    let mut worst = 0.0_f64;
    for &y in thresholds {
        let (kernel, _) = tails.sides(y);
        let pushed = transported_tail(tails, y, options)?;
        worst = worst.max((pushed - kernel.eval(y.abs())).abs());
    }
    Ok(worst)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kou::clamped_jump;

    fn kou_pair(lambda: f64, lambda_star: f64) -> TailPair {
        TailPair::symmetric(Tail::exponential(lambda, 1.0), Tail::exponential(lambda_star, 1.0))
    }

    #[test]
    fn identity_transport() {
        let tails = TailPair::symmetric(Tail::power_law(1.0, 1.5), Tail::power_law(1.0, 1.5));
        let opts = QuantileOptions::default();
        for y in [-7.0, -0.3, 0.01, 1.0, 42.0] {
            let q = quantile_k(&tails, y, &opts).unwrap();
            assert!((q.z - y).abs() < 1e-9, "k({y}) = {}", q.z);
        }
        assert!(verify_transport(&tails, &[-2.0, -0.5, 0.5, 2.0], &opts).unwrap() < 1e-8);
    }

    #[test]
    fn exponential_pair_reproduces_the_clamp() {
        let opts = QuantileOptions::default();
        for (lambda, y) in [(1.0, 0.2), (1.0, 1.0), (1.5, -2.5), (2.0, 0.4), (1.2, -0.1)] {
            let q = quantile_k(&kou_pair(lambda, 2.0), y, &opts).unwrap();
            assert!((q.z - clamped_jump(lambda, 2.0, y)).abs() < 1e-9);
        }
    }

    #[test]
    fn empty_level_set_maps_to_zero() {
        // nu([0.1, inf)) = 2 e^{-0.1} > K's total mass 1
        let q = quantile_k(&kou_pair(1.0, 2.0), 0.1, &QuantileOptions::default()).unwrap();
        assert_eq!(q, Quantile { z: 0.0, truncated: false });
        assert_eq!(quantile_k(&kou_pair(1.0, 2.0), 0.0, &QuantileOptions::default()).unwrap().z, 0.0);
    }

    #[test]
    fn heavy_kernel_over_light_reference_is_truncated() {
        let tails = TailPair::symmetric(Tail::power_law(1.0, 0.5), Tail::exponential(1.0, 1.0));
        let q = quantile_k(&tails, 30.0, &QuantileOptions { tol: 1e-8, z_max: 1e4 }).unwrap();
        assert!(q.truncated);
        assert_eq!(q.z, 1e4);
    }

    #[test]
    fn exponential_transport_error_is_small() {
        let err = verify_transport(&kou_pair(1.3, 2.0), &[-2.0, -1.0, -0.5, 0.5, 1.0, 2.0], &QuantileOptions::default()).unwrap();
        assert!(err < 1e-6, "transport error {err}");
    }

    #[test]
    fn atom_within_reference_mass_is_transported() {
        let kernel = Tail::exponential(1.0, 1.0).with_atom(0.8, 0.3);
        let tails = TailPair::symmetric(kernel, Tail::exponential(2.0, 1.0));
        let err = verify_transport(&tails, &[-2.0, -0.8, -0.5, 0.5, 0.8, 2.0], &QuantileOptions::default()).unwrap();
        assert!(err < 1e-6, "transport error {err}");
    }

    #[test]
    fn kernel_heavier_than_reference_is_reported() {
        let kernel = Tail::exponential(1.0, 1.0).with_atom(0.2, 1.5);
        let tails = TailPair::symmetric(kernel, Tail::exponential(2.0, 1.0));
        let err = verify_transport(&tails, &[0.1, 0.5], &QuantileOptions::default()).unwrap();
        assert!(err > 0.1, "transport error {err}");
    }

    #[test]
    fn increasing_tail_is_diagnosed() {
        let tails = TailPair::symmetric(Tail::custom(|m| m), Tail::exponential(1.0, 1.0));
        assert!(matches!(tails.validate(), Err(Error::NonMonotoneTail { .. })));
        assert!(matches!(
            quantile_k(&tails, 0.5, &QuantileOptions::default()),
            Err(Error::NonMonotoneTail { .. })
        ));
        assert!(kou_pair(1.0, 2.0).validate().is_ok());
    }

    #[test]
    fn quantiles_are_monotone_on_each_half_line() {
        let tails = TailPair::new(
            Tail::power_law(0.5, 1.2),
            Tail::exponential(3.0, 2.0),
            Tail::power_law(1.0, 1.0),
            Tail::exponential(4.0, 1.0),
        );
        let opts = QuantileOptions::default();
        let ks: Vec<f64> = (1..400).map(|i| quantile_k(&tails, i as f64 * 0.05, &opts).unwrap().z).collect();
        assert!(ks.windows(2).all(|w| w[1] >= w[0] - 1e-9));
        let ks: Vec<f64> = (1..400).map(|i| quantile_k(&tails, -(i as f64) * 0.05, &opts).unwrap().z).collect();
        assert!(ks.windows(2).all(|w| w[1] <= w[0] + 1e-9));
    }
}
