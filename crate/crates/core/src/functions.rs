//! Smooth test functions with analytic derivatives.

use std::f64::consts::PI;

use num_complex::Complex64;

/// Sup norms of a function and its first two derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FunctionBounds {
    pub value: f64,
    pub gradient: f64,
    pub hessian: f64,
}

/// A `C^2_b` function with caller-supplied derivatives.
pub trait TestFunction: Send + Sync {
    fn dimension(&self) -> usize {
        1
    }

    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64], out: &mut [f64]);

    /// Row-major `d x d`.
    fn hessian(&self, x: &[f64], out: &mut [f64]);

    fn bounds(&self) -> FunctionBounds;

    fn value1(&self, x: f64) -> f64 {
        self.value(&[x])
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Constant(pub f64);

impl TestFunction for Constant {
    fn value(&self, _x: &[f64]) -> f64 {
        self.0
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out.fill(0.0);
    }
    fn bounds(&self) -> FunctionBounds {
        FunctionBounds { value: self.0.abs(), gradient: 0.0, hessian: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Sine;

impl TestFunction for Sine {
    fn value(&self, x: &[f64]) -> f64 {
        x[0].sin()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = x[0].cos();
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = -x[0].sin();
    }
    fn bounds(&self) -> FunctionBounds {
        FunctionBounds { value: 1.0, gradient: 1.0, hessian: 1.0 }
    }
}

/// `slope * x + intercept`. Unbounded; only for local generator checks.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub slope: f64,
    pub intercept: f64,
}

impl TestFunction for Affine {
    fn value(&self, x: &[f64]) -> f64 {
        self.slope * x[0] + self.intercept
    }
    fn gradient(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = self.slope;
    }
    fn hessian(&self, _x: &[f64], out: &mut [f64]) {
        out[0] = 0.0;
    }
    fn bounds(&self) -> FunctionBounds {
        FunctionBounds { value: f64::INFINITY, gradient: self.slope.abs(), hessian: 0.0 }
    }
}

/// `height * exp(-(x - center)^2 / (2 width^2))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GaussianBump {
    pub center: f64,
    pub width: f64,
    pub height: f64,
}

impl GaussianBump {
    pub fn new(center: f64, width: f64, height: f64) -> Self {
        Self { center, width, height }
    }

    /// `int psi(x) e^{-i xi x} dx`.
    pub fn fourier_transform(&self, xi: f64) -> Complex64 {
        let w = self.width;
        let modulus = self.height * w * (2.0 * PI).sqrt() * (-0.5 * w * w * xi * xi).exp();
        Complex64::from_polar(modulus, -xi * self.center)
    }

    /// Gaussian convolution with variance `var`, evaluated at `x`.
    pub fn smoothed(&self, x: f64, var: f64) -> f64 {
        let s2 = self.width * self.width + var;
        self.height * self.width / s2.sqrt() * (-(x - self.center).powi(2) / (2.0 * s2)).exp()
    }
}

impl TestFunction for GaussianBump {
    fn value(&self, x: &[f64]) -> f64 {
        let u = (x[0] - self.center) / self.width;
        self.height * (-0.5 * u * u).exp()
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let u = (x[0] - self.center) / self.width;
        out[0] = -u / self.width * self.value(x);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let u = (x[0] - self.center) / self.width;
        out[0] = (u * u - 1.0) / (self.width * self.width) * self.value(x);
    }
    fn bounds(&self) -> FunctionBounds {
        let h = self.height.abs();
        let w = self.width;
        FunctionBounds {
            value: h,
            gradient: h / w * (-0.5_f64).exp(),
            hessian: h / (w * w),
        }
    }
}

/// Compactly supported `height * exp(1 - 1 / (1 - r^2))`, `r = (x - center) / radius`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SmoothBump {
    pub center: f64,
    pub radius: f64,
    pub height: f64,
}

impl SmoothBump {
    pub fn new(center: f64, radius: f64, height: f64) -> Self {
        Self { center, radius, height }
    }

    fn parts(&self, x: f64) -> Option<(f64, f64, f64)> {
        let r = (x - self.center) / self.radius;
        let s = 1.0 - r * r;
        if s <= 0.0 {
            return None;
        }
        Some((r, s, self.height * (1.0 - 1.0 / s).exp()))
    }
}

impl TestFunction for SmoothBump {
    fn value(&self, x: &[f64]) -> f64 {
        self.parts(x[0]).map_or(0.0, |(_, _, v)| v)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self
            .parts(x[0])
            .map_or(0.0, |(r, s, v)| v * (-2.0 * r / (s * s)) / self.radius);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        out[0] = self.parts(x[0]).map_or(0.0, |(r, s, v)| {
            let d1 = -2.0 * r / (s * s);
            let d2 = -2.0 / (s * s) - 8.0 * r * r / (s * s * s);
            v * (d1 * d1 + d2) / (self.radius * self.radius)
        });
    }
    fn bounds(&self) -> FunctionBounds {
        // sampled sups; the profile is fixed up to scaling
        let h = self.height.abs();
        let (mut g, mut hh) = (0.0_f64, 0.0_f64);
        let mut buf = [0.0];
        for k in 0..=2000 {
            let x = self.center - self.radius + 2.0 * self.radius * k as f64 / 2000.0;
            self.gradient(&[x], &mut buf);
            g = g.max(buf[0].abs());
            self.hessian(&[x], &mut buf);
            hh = hh.max(buf[0].abs());
        }
        FunctionBounds { value: h, gradient: g, hessian: hh }
    }
}

/// Nondecreasing `low + (high - low) / (1 + exp(-(x - center) / scale))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Logistic {
    pub center: f64,
    pub scale: f64,
    pub low: f64,
    pub high: f64,
}

impl Logistic {
    fn sigma(&self, x: f64) -> f64 {
        1.0 / (1.0 + (-(x - self.center) / self.scale).exp())
    }
}

impl TestFunction for Logistic {
    fn value(&self, x: &[f64]) -> f64 {
        self.low + (self.high - self.low) * self.sigma(x[0])
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let s = self.sigma(x[0]);
        out[0] = (self.high - self.low) * s * (1.0 - s) / self.scale;
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let s = self.sigma(x[0]);
        out[0] = (self.high - self.low) * s * (1.0 - s) * (1.0 - 2.0 * s) / (self.scale * self.scale);
    }
    fn bounds(&self) -> FunctionBounds {
        let span = (self.high - self.low).abs();
        FunctionBounds {
            value: self.low.abs().max(self.high.abs()),
            gradient: span / (4.0 * self.scale),
            hessian: span / (6.0 * 3f64.sqrt() * self.scale * self.scale),
        }
    }
}

/// Pointwise sum of two test functions.
pub struct Sum<'a>(pub &'a dyn TestFunction, pub &'a dyn TestFunction);

impl TestFunction for Sum<'_> {
    fn dimension(&self) -> usize {
        self.0.dimension()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0.value(x) + self.1.value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        self.0.gradient(x, out);
        self.1.gradient(x, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let mut tmp = vec![0.0; out.len()];
        self.0.hessian(x, out);
        self.1.hessian(x, &mut tmp);
        out.iter_mut().zip(&tmp).for_each(|(o, t)| *o += t);
    }
    fn bounds(&self) -> FunctionBounds {
        let (a, b) = (self.0.bounds(), self.1.bounds());
        FunctionBounds {
            value: a.value + b.value,
            gradient: a.gradient + b.gradient,
            hessian: a.hessian + b.hessian,
        }
    }
}

/// `factor * phi`.
pub struct Scaled<'a>(pub f64, pub &'a dyn TestFunction);

impl TestFunction for Scaled<'_> {
    fn dimension(&self) -> usize {
        self.1.dimension()
    }
    fn value(&self, x: &[f64]) -> f64 {
        self.0 * self.1.value(x)
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        self.1.gradient(x, out);
        out.iter_mut().for_each(|o| *o *= self.0);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        self.1.hessian(x, out);
        out.iter_mut().for_each(|o| *o *= self.0);
    }
    fn bounds(&self) -> FunctionBounds {
        let b = self.1.bounds();
        let c = self.0.abs();
        FunctionBounds { value: c * b.value, gradient: c * b.gradient, hessian: c * b.hessian }
    }
}

/// A one-dimensional function whose derivatives come from centered
/// differences of declared step.
pub struct FiniteDifference<F> {
    pub map: F,
    pub step: f64,
    pub declared: FunctionBounds,
}

impl<F: Fn(f64) -> f64 + Send + Sync> TestFunction for FiniteDifference<F> {
    fn value(&self, x: &[f64]) -> f64 {
        (self.map)(x[0])
    }
    fn gradient(&self, x: &[f64], out: &mut [f64]) {
        let h = self.step;
        out[0] = ((self.map)(x[0] + h) - (self.map)(x[0] - h)) / (2.0 * h);
    }
    fn hessian(&self, x: &[f64], out: &mut [f64]) {
        let h = self.step;
        out[0] = ((self.map)(x[0] + h) - 2.0 * (self.map)(x[0]) + (self.map)(x[0] - h)) / (h * h);
    }
    fn bounds(&self) -> FunctionBounds {
        self.declared
    }
}
