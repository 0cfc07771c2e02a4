//! Markovian coefficient fields `(b(f,x), sigma(f,x), k(f,x,z))` over a
//! control grid together with the jump reference measure.

use std::fmt;
use std::sync::Arc;

use crate::control::{ControlGrid, ControlId};
use crate::error::{Error, Result};
use crate::measure::JumpReferenceMeasure;
use crate::truncation::TruncationFunction;

/// Coefficients evaluated at a control `f` and a state `x`.
///
/// Implementations write into caller-provided buffers so hot loops stay
/// allocation-free. Evaluation must be deterministic.
pub trait Coefficients: Send + Sync {
    /// State dimension `d`.
    fn dimension(&self) -> usize;

    /// Brownian dimension `r`.
    fn noise_dimension(&self) -> usize {
        self.dimension()
    }

    /// `out` has length `d`.
    fn drift(&self, f: &[f64], x: &[f64], out: &mut [f64]);

    /// Row-major `d x r` matrix.
    fn dispersion(&self, f: &[f64], x: &[f64], out: &mut [f64]);

    /// Push-forward density `k(f, x, z)`; `out` has length `d`.
    fn jump(&self, f: &[f64], x: &[f64], z: f64, out: &mut [f64]);
}

type Scalar2 = Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>;
type Scalar3 = Arc<dyn Fn(&[f64], f64, f64) -> f64 + Send + Sync>;

/// One-dimensional coefficients from closures.
#[derive(Clone)]
pub struct ScalarCoefficients {
    drift: Scalar2,
    dispersion: Scalar2,
    jump: Scalar3,
}

impl ScalarCoefficients {
    pub fn new<B, S, K>(drift: B, dispersion: S, jump: K) -> Self
    where
        B: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        S: Fn(&[f64], f64) -> f64 + Send + Sync + 'static,
        K: Fn(&[f64], f64, f64) -> f64 + Send + Sync + 'static,
    {
        Self {
            drift: Arc::new(drift),
            dispersion: Arc::new(dispersion),
            jump: Arc::new(jump),
        }
    }

    /// State-independent coefficients with no jumps.
    pub fn constant(drift: f64, dispersion: f64) -> Self {
        Self::new(move |_, _| drift, move |_, _| dispersion, |_, _, _| 0.0)
    }
}

impl Coefficients for ScalarCoefficients {
    fn dimension(&self) -> usize {
        1
    }

    fn drift(&self, f: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = (self.drift)(f, x[0]);
    }

    fn dispersion(&self, f: &[f64], x: &[f64], out: &mut [f64]) {
        out[0] = (self.dispersion)(f, x[0]);
    }

    fn jump(&self, f: &[f64], x: &[f64], z: f64, out: &mut [f64]) {
        out[0] = (self.jump)(f, x[0], z);
    }
}

/// A coefficient field: the model behind one sublinear semigroup.
#[derive(Clone)]
pub struct CoefficientField {
    coefficients: Arc<dyn Coefficients>,
    reference: JumpReferenceMeasure,
    truncation: TruncationFunction,
    controls: ControlGrid,
}

impl fmt::Debug for CoefficientField {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("CoefficientField")
            .field("dimension", &self.dimension())
            .field("controls", &self.controls.len())
            .field("reference", &self.reference)
            .field("truncation", &self.truncation)
            .finish()
    }
}

impl CoefficientField {
    pub fn new(
        coefficients: Arc<dyn Coefficients>,
        reference: JumpReferenceMeasure,
        truncation: TruncationFunction,
        controls: ControlGrid,
    ) -> Result<Self> {
        if controls.is_empty() {
            return Err(Error::EmptyControlGrid);
        }
        if coefficients.dimension() == 0 {
            return Err(Error::InvalidArgument("state dimension must be positive".into()));
        }
        Ok(Self {
            coefficients,
            reference,
            truncation,
            controls,
        })
    }

    pub fn dimension(&self) -> usize {
        self.coefficients.dimension()
    }

    pub fn noise_dimension(&self) -> usize {
        self.coefficients.noise_dimension()
    }

    pub fn coefficients(&self) -> &dyn Coefficients {
        self.coefficients.as_ref()
    }

    pub fn reference(&self) -> &JumpReferenceMeasure {
        &self.reference
    }

    pub fn truncation(&self) -> &TruncationFunction {
        &self.truncation
    }

    pub fn controls(&self) -> &ControlGrid {
        &self.controls
    }

    /// Same coefficients on a different control grid.
    pub fn with_controls(&self, controls: ControlGrid) -> Result<Self> {
        Self::new(self.coefficients.clone(), self.reference.clone(), self.truncation.clone(), controls)
    }

    pub fn control(&self, id: ControlId) -> &[f64] {
        self.controls.point(id)
    }

    pub fn drift(&self, id: ControlId, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        self.coefficients.drift(self.control(id), x, &mut out);
        out
    }

    pub fn dispersion(&self, id: ControlId, x: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension() * self.noise_dimension()];
        self.coefficients.dispersion(self.control(id), x, &mut out);
        out
    }

    /// `sigma sigma^*` as a row-major `d x d` matrix.
    pub fn covariance(&self, id: ControlId, x: &[f64]) -> Vec<f64> {
        let d = self.dimension();
        let r = self.noise_dimension();
        let s = self.dispersion(id, x);
        let mut a = vec![0.0; d * d];
        for i in 0..d {
            for j in 0..d {
                a[i * d + j] = (0..r).map(|k| s[i * r + k] * s[j * r + k]).sum();
            }
        }
        a
    }

    pub fn jump(&self, id: ControlId, x: &[f64], z: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.dimension()];
        self.coefficients.jump(self.control(id), x, z, &mut out);
        out
    }

    #[inline]
    pub fn drift1(&self, id: ControlId, x: f64) -> f64 {
        let mut out = [0.0];
        self.coefficients.drift(self.control(id), &[x], &mut out);
        out[0]
    }

    /// `sigma sigma^*` in one dimension.
    #[inline]
    pub fn diffusion1(&self, id: ControlId, x: f64) -> f64 {
        let r = self.noise_dimension();
        if r == 1 {
            let mut out = [0.0];
            self.coefficients.dispersion(self.control(id), &[x], &mut out);
            return out[0] * out[0];
        }
        let mut out = vec![0.0; r];
        self.coefficients.dispersion(self.control(id), &[x], &mut out);
        out.iter().map(|s| s * s).sum()
    }

    #[inline]
    pub fn jump1(&self, id: ControlId, x: f64, z: f64) -> f64 {
        let mut out = [0.0];
        self.coefficients.jump(self.control(id), &[x], z, &mut out);
        out[0]
    }

    /// Compensator drift `int h(k(f,x,z)) nu(dz)` in one dimension, by quadrature.
    pub fn compensator1(&self, id: ControlId, x: f64) -> f64 {
        let h = &self.truncation;
        self.reference
            .quadrature()
            .integrate(|z| h.apply1(self.jump1(id, x, z)))
    }

    /// `nu o k(f,x,.)^{-1}` tail: mass of `{k >= y}` (`y > 0`) or `{k <= y}`
    /// (`y < 0`), marks sent to the origin excluded.
    pub fn pushforward_tail(&self, id: ControlId, x: &[f64], threshold: f64) -> Result<f64> {
        if threshold == 0.0 || !threshold.is_finite() {
            return Err(Error::InvalidArgument(format!("threshold must be finite and nonzero, got {threshold}")));
        }
        if self.dimension() != 1 {
            return Err(Error::UnsupportedDimension(self.dimension()));
        }
        self.reference.check_mass_invariant()?;
        let x0 = x[0];
        Ok(self.reference.level_set_mass(|z| self.jump1(id, x0, z), threshold))
    }

    /// Differential characteristics at a fixed control and state.
    pub fn triplet(&self, id: ControlId, x: &[f64]) -> LevyTriplet<'_> {
        LevyTriplet {
            drift: self.drift(id, x),
            covariance: self.covariance(id, x),
            field: self,
            control: id,
            state: x.to_vec(),
        }
    }
}

/// `(b, a, nu o k(f,x,.)^{-1})` at a fixed `(f, x)`.
#[derive(Debug, Clone)]
pub struct LevyTriplet<'a> {
    pub drift: Vec<f64>,
    pub covariance: Vec<f64>,
    field: &'a CoefficientField,
    control: ControlId,
    state: Vec<f64>,
}

impl LevyTriplet<'_> {
    /// Integral of `g(k(f,x,z))` against the reference quadrature, i.e. of `g`
    /// against the push-forward jump measure restricted to the window.
    pub fn integrate_jumps<G: FnMut(&[f64]) -> f64>(&self, mut g: G) -> f64 {
        let mut y = vec![0.0; self.field.dimension()];
        let coeffs = self.field.coefficients();
        let f = self.field.control(self.control);
        self.field.reference().quadrature().integrate(|z| {
            coeffs.jump(f, &self.state, z, &mut y);
            g(&y)
        })
    }

    /// Symmetry and positive semidefiniteness of the covariance.
    pub fn covariance_is_psd(&self, tol: f64) -> bool {
        is_symmetric_psd(&self.covariance, self.field.dimension(), tol)
    }
}

/// Symmetric PSD check via a Cholesky attempt with diagonal slack `tol`.
pub fn is_symmetric_psd(a: &[f64], d: usize, tol: f64) -> bool {
    for i in 0..d {
        for j in 0..i {
            if (a[i * d + j] - a[j * d + i]).abs() > tol * (1.0 + a[i * d + j].abs()) {
                return false;
            }
        }
    }
    let mut l = vec![0.0; d * d];
    for j in 0..d {
        let mut diag = a[j * d + j] + tol;
        for k in 0..j {
            diag -= l[j * d + k] * l[j * d + k];
        }
        if diag < 0.0 {
            return false;
        }
        let ljj = diag.sqrt();
        l[j * d + j] = ljj;
        for i in j + 1..d {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            l[i * d + j] = if ljj > 0.0 { s / ljj } else { 0.0 };
        }
    }
    true
}
