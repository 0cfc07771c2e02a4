//! Truncation functions separating small (compensated) jumps from large ones.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum TruncationKind {
    Clip,
    Custom,
}

type ScalarMap = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

/// A bounded Lipschitz map `h` with `h(y) = y` on a ball around the origin.
///
/// The clip variant is the radial projection `h(y) = y * min(1, r / |y|)`,
/// which is 1-Lipschitz, the identity on the ball of radius `r` and bounded by
/// `r`. Custom truncations act componentwise and carry user-declared
/// constants which [`TruncationFunction::check`] spot-checks.
#[derive(Clone)]
pub struct TruncationFunction {
    kind: TruncationKind,
    identity_radius: f64,
    lipschitz_bound: f64,
    sup_bound: f64,
    custom: Option<ScalarMap>,
}

impl fmt::Debug for TruncationFunction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("TruncationFunction")
            .field("kind", &self.kind)
            .field("identity_radius", &self.identity_radius)
            .field("lipschitz_bound", &self.lipschitz_bound)
            .field("sup_bound", &self.sup_bound)
            .finish()
    }
}

impl Default for TruncationFunction {
    fn default() -> Self {
        Self::clip(1.0).expect("unit radius is valid")
    }
}

impl TruncationFunction {
    pub fn clip(radius: f64) -> Result<Self> {
        if !(radius > 0.0 && radius.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "clip radius must be positive and finite, got {radius}"
            )));
        }
        Ok(Self {
            kind: TruncationKind::Clip,
            identity_radius: radius,
            lipschitz_bound: 1.0,
            sup_bound: radius,
            custom: None,
        })
    }

    /// Componentwise custom truncation with declared constants.
    pub fn custom<F>(map: F, identity_radius: f64, lipschitz_bound: f64, sup_bound: f64) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        if !(identity_radius > 0.0) || !(lipschitz_bound >= 0.0) || !sup_bound.is_finite() {
            return Err(Error::InvalidArgument(
                "custom truncation needs a positive identity radius and finite bounds".into(),
            ));
        }
        Ok(Self {
            kind: TruncationKind::Custom,
            identity_radius,
            lipschitz_bound,
            sup_bound,
            custom: Some(Arc::new(map)),
        })
    }

    pub fn kind(&self) -> TruncationKind {
        self.kind
    }

    pub fn identity_radius(&self) -> f64 {
        self.identity_radius
    }

    pub fn lipschitz_bound(&self) -> f64 {
        self.lipschitz_bound
    }

    /// Declared `sup |h|`.
    pub fn sup_bound(&self) -> f64 {
        self.sup_bound
    }

    /// True when `h(-y) = -h(y)` is guaranteed by construction.
    pub fn is_odd(&self) -> bool {
        self.kind == TruncationKind::Clip
    }

    pub fn apply(&self, y: &[f64], out: &mut [f64]) {
        match &self.custom {
            None => {
                let norm = y.iter().map(|v| v * v).sum::<f64>().sqrt();
                let scale = if norm > self.identity_radius {
                    self.identity_radius / norm
                } else {
                    1.0
                };
                for (o, v) in out.iter_mut().zip(y) {
                    *o = v * scale;
                }
            }
            Some(map) => {
                for (o, v) in out.iter_mut().zip(y) {
                    *o = map(*v);
                }
            }
        }
    }

    /// One-dimensional evaluation.
    #[inline]
    pub fn apply1(&self, y: f64) -> f64 {
        match &self.custom {
            None => y.clamp(-self.identity_radius, self.identity_radius),
            Some(map) => map(y),
        }
    }

    /// Sampled check of the identity, boundedness and Lipschitz invariants.
    /// Returns the observed `sup |h|` over the samples.
    pub fn check(&self, samples: usize, seed: u64) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let span = 10.0 * self.identity_radius.max(1.0);
        let mut sup = 0.0_f64;
        for _ in 0..samples {
            let inner = rng.random_range(-self.identity_radius..=self.identity_radius);
            if (self.apply1(inner) - inner).abs() > 1e-12 * (1.0 + inner.abs()) {
                return Err(Error::InvalidArgument(format!(
                    "truncation is not the identity at {inner}"
                )));
            }
            let a = rng.random_range(-span..span);
            let b = rng.random_range(-span..span);
            let (ha, hb) = (self.apply1(a), self.apply1(b));
            sup = sup.max(ha.abs()).max(hb.abs());
            if (ha - hb).abs() > self.lipschitz_bound * (a - b).abs() + 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "truncation Lipschitz bound violated between {a} and {b}"
                )));
            }
        }
        if sup > self.sup_bound + 1e-12 {
            return Err(Error::InvalidArgument(format!(
                "truncation exceeds its declared bound: {sup} > {}",
                self.sup_bound
            )));
        }
        Ok(sup)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clip_is_identity_inside_and_bounded_outside() {
        let h = TruncationFunction::default();
        assert_eq!(h.apply1(0.3), 0.3);
        assert_eq!(h.apply1(-1.0), -1.0);
        assert_eq!(h.apply1(7.0), 1.0);
        assert_eq!(h.apply1(-7.0), -1.0);
        let sup = h.check(2000, 3).unwrap();
        assert!(sup <= 1.0);
    }

    #[test]
    fn radial_clip_in_two_dimensions() {
        let h = TruncationFunction::clip(1.0).unwrap();
        let mut out = [0.0; 2];
        h.apply(&[3.0, 4.0], &mut out);
        assert!((out[0] - 0.6).abs() < 1e-15 && (out[1] - 0.8).abs() < 1e-15);
        h.apply(&[0.3, 0.4], &mut out);
        assert_eq!(out, [0.3, 0.4]);
    }

    #[test]
    fn custom_declared_constants_are_checked() {
        let tanh_like = TruncationFunction::custom(|y: f64| y / (1.0 + y * y), 0.5, 1.0, 0.5).unwrap();
        assert!(tanh_like.check(500, 1).is_err(), "y/(1+y^2) is not the identity on the declared ball");
        let ok = TruncationFunction::custom(|y: f64| y.clamp(-2.0, 2.0), 2.0, 1.0, 2.0).unwrap();
        assert!(ok.check(500, 1).is_ok());
        assert!(!ok.is_odd());
    }

    #[test]
    fn rejects_bad_radius() {
        assert!(TruncationFunction::clip(0.0).is_err());
        assert!(TruncationFunction::clip(f64::NAN).is_err());
    }
}
