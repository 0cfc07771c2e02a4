//! The Lévy-type generator, the nonlinearity `G`, the symbol `q` and the
//! drift correction `K^f`.

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::audit::{Majorant, StateBox};
use crate::control::ControlId;
use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::functions::TestFunction;

/// Generator value together with a bound on the error from cutting the mark
/// integral to the quadrature window.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GeneratorValue {
    pub value: f64,
    pub tail_bound: f64,
}

fn non_finite(quantity: &'static str, field: &CoefficientField, id: ControlId, x: &[f64], z: Option<f64>) -> Error {
    Error::NonFinite {
        quantity,
        control: field.control(id).to_vec(),
        state: x.to_vec(),
        mark: z,
    }
}

/// `<grad phi, b> + 1/2 tr[hess phi sigma sigma^*] + int [phi(x + k) - phi(x) - <grad phi, h(k)>] dnu`
/// at a fixed control.
pub fn apply_generator(
    field: &CoefficientField,
    id: ControlId,
    phi: &dyn TestFunction,
    x: &[f64],
) -> Result<GeneratorValue> {
    let d = field.dimension();
    if phi.dimension() != d || x.len() != d {
        return Err(Error::InvalidArgument("dimension mismatch between field, test function and state".into()));
    }
    let b = field.drift(id, x);
    if b.iter().any(|v| !v.is_finite()) {
        return Err(non_finite("drift", field, id, x, None));
    }
    let a = field.covariance(id, x);
    if a.iter().any(|v| !v.is_finite()) {
        return Err(non_finite("dispersion", field, id, x, None));
    }
    let mut grad = vec![0.0; d];
    let mut hess = vec![0.0; d * d];
    phi.gradient(x, &mut grad);
    phi.hessian(x, &mut hess);

    let mut value: f64 = grad.iter().zip(&b).map(|(g, b)| g * b).sum();
    value += 0.5 * hess.iter().zip(&a).map(|(h, a)| h * a).sum::<f64>();

    let phi_x = phi.value(x);
    let coeffs = field.coefficients();
    let f = field.control(id);
    let h = field.truncation();
    let mut k = vec![0.0; d];
    let mut hk = vec![0.0; d];
    let mut shifted = vec![0.0; d];
    let mut jump_part = 0.0;
    for (z, w) in field.reference().quadrature().iter() {
        coeffs.jump(f, x, z, &mut k);
        if k.iter().any(|v| !v.is_finite()) {
            return Err(non_finite("jump", field, id, x, Some(z)));
        }
        h.apply(&k, &mut hk);
        for i in 0..d {
            shifted[i] = x[i] + k[i];
        }
        let compensator: f64 = grad.iter().zip(&hk).map(|(g, v)| g * v).sum();
        jump_part += w * (phi.value(&shifted) - phi_x - compensator);
    }
    value += jump_part;

    let bounds = phi.bounds();
    let tail_bound = field.reference().quadrature().outside_mass()
        * (2.0 * bounds.value + bounds.gradient * h.sup_bound());
    Ok(GeneratorValue { value, tail_bound })
}

/// `G(x, phi)`: maximum of the generator over the control grid, with the first
/// maximizing control in grid order.
pub fn hamiltonian_g(field: &CoefficientField, phi: &dyn TestFunction, x: &[f64]) -> Result<(f64, ControlId)> {
    let mut best: Option<(f64, ControlId)> = None;
    for id in field.controls().ids() {
        let v = apply_generator(field, id, phi, x)?.value;
        match best {
            Some((bv, _)) if v <= bv => {}
            _ => best = Some((v, id)),
        }
    }
    best.ok_or(Error::EmptyControlGrid)
}

/// The symbol `q(f, x, xi)`, with the push-forward integral evaluated by
/// substituting `y = k(f, x, z)` under the reference quadrature.
pub fn symbol(field: &CoefficientField, id: ControlId, x: &[f64], xi: &[f64]) -> Complex64 {
    let d = field.dimension();
    let b = field.drift(id, x);
    let a = field.covariance(id, x);
    let dot = |u: &[f64], v: &[f64]| u.iter().zip(v).map(|(p, q)| p * q).sum::<f64>();
    let mut quad_form = 0.0;
    for i in 0..d {
        for j in 0..d {
            quad_form += xi[i] * a[i * d + j] * xi[j];
        }
    }
    let mut q = Complex64::new(0.5 * quad_form, -dot(&b, xi));

    let coeffs = field.coefficients();
    let f = field.control(id);
    let h = field.truncation();
    let mut y = vec![0.0; d];
    let mut hy = vec![0.0; d];
    for (z, w) in field.reference().quadrature().iter() {
        coeffs.jump(f, x, z, &mut y);
        if y.iter().all(|v| *v == 0.0) {
            continue;
        }
        h.apply(&y, &mut hy);
        let phase = dot(&y, xi);
        q += w * Complex64::new(1.0 - phase.cos(), -phase.sin() + dot(xi, &hy));
    }
    q
}

/// Sampled `sup |q(f, x, xi)|` over the control grid, states in `state_box`
/// and `|xi| <= radius`. Half of the frequency samples sit on the sphere.
pub fn small_symbol_sup(
    field: &CoefficientField,
    radius: f64,
    state_box: &StateBox,
    sample_budget: usize,
    seed: u64,
) -> Result<f64> {
    if !(radius > 0.0) {
        return Err(Error::InvalidArgument(format!("radius must be positive, got {radius}")));
    }
    let d = field.dimension();
    if state_box.dimension() != d {
        return Err(Error::InvalidArgument("state box dimension mismatch".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_controls = field.controls().len();
    let mut sup = 0.0_f64;
    for s in 0..sample_budget.max(1) {
        let id = ControlId(rng.random_range(0..n_controls));
        let x = state_box.sample(&mut rng);
        let mut dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let n = dir.iter().map(|v| v * v).sum::<f64>().sqrt().max(1e-300);
        let scale = if s % 2 == 0 {
            radius
        } else {
            radius * rng.random::<f64>().powf(1.0 / d as f64)
        };
        dir.iter_mut().for_each(|v| *v *= scale / n);
        sup = sup.max(symbol(field, id, &x, &dir).norm());
    }
    Ok(sup)
}

/// `K^f(x) = int_{gamma <= 1} (k - h(k)) dnu - int_{gamma > 1} h(k) dnu`.
pub fn drift_correction(field: &CoefficientField, id: ControlId, x: &[f64], gamma: &Majorant) -> Vec<f64> {
    let d = field.dimension();
    let coeffs = field.coefficients();
    let f = field.control(id);
    let h = field.truncation();
    let mut out = vec![0.0; d];
    let mut k = vec![0.0; d];
    let mut hk = vec![0.0; d];
    for (z, w) in field.reference().quadrature().iter() {
        coeffs.jump(f, x, z, &mut k);
        h.apply(&k, &mut hk);
        if gamma.eval(z) <= 1.0 {
            for i in 0..d {
                out[i] += w * (k[i] - hk[i]);
            }
        } else {
            for i in 0..d {
                out[i] -= w * hk[i];
            }
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use std::f64::consts::PI;
    use std::sync::Arc;

    use super::*;
    use crate::control::ControlGrid;
    use crate::field::ScalarCoefficients;
    use crate::functions::{Affine, Constant, GaussianBump, Sine};
    use crate::measure::{DoubleExponential, JumpReferenceMeasure, QuadratureSpec};
    use crate::truncation::TruncationFunction;

    fn field(coeffs: ScalarCoefficients, controls: ControlGrid, jumps: bool) -> CoefficientField {
        let reference = if jumps {
            JumpReferenceMeasure::double_exponential(DoubleExponential::symmetric(1.0), QuadratureSpec::window(30.0, 600))
                .unwrap()
        } else {
            JumpReferenceMeasure::none()
        };
        CoefficientField::new(Arc::new(coeffs), reference, TruncationFunction::default(), controls).unwrap()
    }

    fn single() -> ControlGrid {
        ControlGrid::singleton(&[0.0]).unwrap()
    }

    #[test]
    fn constants_are_annihilated() {
        let f = field(ScalarCoefficients::new(|_, _| 0.7, |_, _| 0.3, |_, _, z| 0.5 * z), single(), true);
        let v = apply_generator(&f, ControlId(0), &Constant(3.0), &[0.4]).unwrap();
        assert!(v.value.abs() < 1e-14);
        let (g, arg) = hamiltonian_g(&f, &Constant(-2.0), &[1.0]).unwrap();
        assert!(g.abs() < 1e-14);
        assert_eq!(arg, ControlId(0));
    }

    #[test]
    fn pure_drift_and_pure_diffusion() {
        let drift = field(ScalarCoefficients::constant(2.0, 0.0), single(), false);
        let v = apply_generator(&drift, ControlId(0), &Sine, &[0.0]).unwrap();
        assert!((v.value - 2.0).abs() < 1e-15);
        let diff = field(ScalarCoefficients::constant(0.0, 2f64.sqrt()), single(), false);
        let v = apply_generator(&diff, ControlId(0), &Sine, &[PI / 2.0]).unwrap();
        assert!((v.value + 1.0).abs() < 1e-14);
    }

    #[test]
    fn hamiltonian_picks_largest_drift() {
        let controls = ControlGrid::from_points(&[vec![-1.0], vec![0.0], vec![1.0]], &[-1.0], &[1.0]).unwrap();
        let f = field(ScalarCoefficients::new(|f, _| f[0], |_, _| 0.0, |_, _, _| 0.0), controls, false);
        let (g, arg) = hamiltonian_g(&f, &Affine { slope: 1.0, intercept: 0.0 }, &[0.3]).unwrap();
        assert_eq!(g, 1.0);
        assert_eq!(arg, ControlId(2));
    }

    #[test]
    fn jump_term_matches_closed_form_for_sine() {
        // int [sin(x+z) - sin x - cos x h(z)] e^{-|z|} dz = sin x (2/(1+1) - 2) = -sin x
        let f = field(ScalarCoefficients::new(|_, _| 0.0, |_, _| 0.0, |_, _, z| z), single(), true);
        for x in [0.3, 1.1, -2.0] {
            let v = apply_generator(&f, ControlId(0), &Sine, &[x]).unwrap();
            assert!((v.value + x.sin()).abs() < 1e-9, "{} vs {}", v.value, -x.sin());
            assert!(v.tail_bound < 1e-11);
        }
    }

    #[test]
    fn symbol_special_values() {
        let drift = field(ScalarCoefficients::constant(1.0, 0.0), single(), false);
        assert_eq!(symbol(&drift, ControlId(0), &[0.0], &[2.0]), Complex64::new(0.0, -2.0));
        let diff = field(ScalarCoefficients::constant(0.0, 1.0), single(), false);
        assert_eq!(symbol(&diff, ControlId(0), &[0.0], &[2.0]), Complex64::new(2.0, 0.0));
        let jumps = field(ScalarCoefficients::new(|_, _| 0.4, |_, _| 0.2, |_, _, z| z), single(), true);
        assert_eq!(symbol(&jumps, ControlId(0), &[0.0], &[0.0]), Complex64::new(0.0, 0.0));
    }

    #[test]
    fn symbol_is_conjugate_symmetric() {
        let f = field(ScalarCoefficients::new(|_, x| 0.3 + 0.1 * x, |_, _| 0.4, |_, _, z| 0.7 * z + 0.1), single(), true);
        for xi in [0.1, 0.9, 3.0] {
            let plus = symbol(&f, ControlId(0), &[0.5], &[xi]);
            let minus = symbol(&f, ControlId(0), &[0.5], &[-xi]);
            assert!((plus.conj() - minus).norm() < 1e-12);
        }
    }

    #[test]
    fn small_symbol_of_pure_drift_is_radius() {
        let f = field(ScalarCoefficients::constant(1.0, 0.0), single(), false);
        let boxed = StateBox::interval(-1.0, 1.0);
        for r in [0.1, 0.01] {
            let s = small_symbol_sup(&f, r, &boxed, 50, 3).unwrap();
            assert!((s - r).abs() < 1e-15);
        }
        let zero = field(ScalarCoefficients::constant(0.0, 0.0), single(), false);
        assert_eq!(small_symbol_sup(&zero, 0.5, &boxed, 20, 1).unwrap(), 0.0);
        assert!(small_symbol_sup(&zero, 0.0, &boxed, 20, 1).is_err());
    }

    #[test]
    fn drift_correction_special_cases() {
        let none = field(ScalarCoefficients::constant(0.0, 0.0), single(), true);
        assert_eq!(drift_correction(&none, ControlId(0), &[0.0], &Majorant::Constant(2.0)), vec![0.0]);
        let ident = field(ScalarCoefficients::new(|_, _| 0.0, |_, _| 0.0, |_, _, z| z), single(), true);
        let g = Majorant::Affine { intercept: 0.0, slope: 1.0 };
        assert!(drift_correction(&ident, ControlId(0), &[0.0], &g)[0].abs() < 1e-13);
    }

    #[test]
    fn non_finite_jump_is_reported_with_mark() {
        let f = field(ScalarCoefficients::new(|_, _| 0.0, |_, _| 0.0, |_, _, z| if z > 5.0 { f64::NAN } else { z }), single(), true);
        match apply_generator(&f, ControlId(0), &GaussianBump::new(0.0, 1.0, 1.0), &[0.0]) {
            Err(Error::NonFinite { quantity: "jump", mark: Some(z), .. }) => assert!(z > 5.0),
            other => panic!("unexpected {other:?}"),
        }
    }
}
