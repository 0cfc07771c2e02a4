//! Sampling-based audits of the standing assumptions on a coefficient field:
//! boundedness, Lipschitz continuity in the state, and the jump majorants
//! `|k(f,x,z) - k(f,y,z)| <= gamma(z) |x - y|` and `|k(f,x,z)| <= beta(z)`.
//!
//! These are spot checks, not proofs: a clean audit only says that no
//! witness was found among the sampled points.

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::control::ControlId;
use crate::error::{Error, Result};
use crate::field::{is_symmetric_psd, CoefficientField};

/// Axis-aligned box of states to sample from.
#[derive(Debug, Clone, PartialEq)]
pub struct StateBox {
    pub lower: Vec<f64>,
    pub upper: Vec<f64>,
}

impl StateBox {
    pub fn interval(lo: f64, hi: f64) -> Self {
        Self {
            lower: vec![lo],
            upper: vec![hi],
        }
    }

    pub fn dimension(&self) -> usize {
        self.lower.len()
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> Vec<f64> {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(&l, &u)| if u > l { rng.random_range(l..u) } else { l })
            .collect()
    }
}

/// A nonnegative function of the mark.
#[derive(Clone)]
pub enum Majorant {
    Constant(f64),
    /// `intercept + slope * |z|`
    Affine { intercept: f64, slope: f64 },
    Custom(Arc<dyn Fn(f64) -> f64 + Send + Sync>),
}

impl fmt::Debug for Majorant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Majorant::Constant(c) => write!(f, "Constant({c})"),
            Majorant::Affine { intercept, slope } => write!(f, "Affine({intercept} + {slope}|z|)"),
            Majorant::Custom(_) => write!(f, "Custom"),
        }
    }
}

impl Majorant {
    pub fn eval(&self, z: f64) -> f64 {
        match self {
            Majorant::Constant(c) => *c,
            Majorant::Affine { intercept, slope } => intercept + slope * z.abs(),
            Majorant::Custom(g) => g(z),
        }
    }
}

/// User-declared constants the audit checks against.
#[derive(Debug, Clone)]
pub struct AuditSpec {
    pub state_box: StateBox,
    /// Declared Lipschitz constant `C` of `b` and `sigma` in the state.
    pub lipschitz_bound: f64,
    /// Declared bound on `|b| + |sigma| + int (|k|^2 ^ 1) dnu`.
    pub coefficient_bound: f64,
    pub gamma: Option<Majorant>,
    pub beta: Option<Majorant>,
    /// Largest separation of sampled Lipschitz pairs.
    pub pair_scale: f64,
}

impl AuditSpec {
    pub fn new(state_box: StateBox) -> Self {
        Self {
            state_box,
            lipschitz_bound: f64::INFINITY,
            coefficient_bound: f64::INFINITY,
            gamma: None,
            beta: None,
            pair_scale: 0.5,
        }
    }

    pub fn lipschitz(mut self, c: f64) -> Self {
        self.lipschitz_bound = c;
        self
    }

    pub fn coefficient_bound(mut self, c: f64) -> Self {
        self.coefficient_bound = c;
        self
    }

    pub fn gamma(mut self, g: Majorant) -> Self {
        self.gamma = Some(g);
        self
    }

    pub fn beta(mut self, b: Majorant) -> Self {
        self.beta = Some(b);
        self
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ConditionId {
    /// `|b| + |sigma| + int (|k|^2 ^ 1) dnu <= C`
    CoefficientBound,
    /// `sigma sigma^*` symmetric positive semidefinite
    Covariance,
    /// Lipschitz continuity of `b` and `sigma` in the state
    Lipschitz,
    /// `|k(f,x,z) - k(f,y,z)| <= gamma(z) |x - y|`
    JumpLipschitz,
    /// `|k(f,x,z)| <= beta(z)`
    JumpMajorant,
    /// `int (g ^ g^2) dnu < inf` for a declared majorant
    MajorantIntegrability,
    NonFinite,
}

impl fmt::Display for ConditionId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ConditionId::CoefficientBound => "coefficient-bound",
            ConditionId::Covariance => "covariance-psd",
            ConditionId::Lipschitz => "lipschitz",
            ConditionId::JumpLipschitz => "jump-lipschitz",
            ConditionId::JumpMajorant => "jump-majorant",
            ConditionId::MajorantIntegrability => "majorant-integrability",
            ConditionId::NonFinite => "non-finite",
        };
        f.write_str(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Witness {
    pub control: Vec<f64>,
    pub x: Vec<f64>,
    pub y: Option<Vec<f64>>,
    pub z: Option<f64>,
    /// The offending quantity (ratio, bound or value).
    pub value: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Violation {
    pub condition: ConditionId,
    pub witness: Witness,
}

#[derive(Debug, Clone)]
pub struct ConditionAudit {
    /// Largest sampled ratio `(|b(x)-b(y)| + |sigma(x)-sigma(y)|) / |x-y|`.
    pub lipschitz_constant_estimate: f64,
    /// Largest sampled ratio `|k(x,z)-k(y,z)| / |x-y|`.
    pub jump_lipschitz_estimate: f64,
    /// Sampled sup of `|b| + |sigma|`.
    pub drift_dispersion_sup: f64,
    /// Sampled sup of the quadrature of `|k|^2 ^ 1`.
    pub jump_moment_sup: f64,
    pub gamma: Option<Majorant>,
    pub beta: Option<Majorant>,
    pub violations: Vec<Violation>,
    pub samples: usize,
}

impl ConditionAudit {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }

    /// Sampled sup of `|b| + |sigma| + int (|k|^2 ^ 1) dnu` (upper bound from
    /// the two separate sups).
    pub fn coefficient_sup(&self) -> f64 {
        self.drift_dispersion_sup + self.jump_moment_sup
    }

    pub fn count(&self, condition: ConditionId) -> usize {
        self.violations.iter().filter(|v| v.condition == condition).count()
    }
}

const MAX_WITNESSES: usize = 16;
const MARKS_PER_SAMPLE: usize = 8;

struct Recorder {
    violations: Vec<Violation>,
}

impl Recorder {
    fn push(&mut self, condition: ConditionId, witness: Witness) {
        if self.violations.iter().filter(|v| v.condition == condition).count() < MAX_WITNESSES {
            self.violations.push(Violation { condition, witness });
        }
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt()
}

/// Audit `field` with `sample_budget` random samples (plus a deterministic
/// scan of the first state axis). Pure: identical inputs give identical
/// audits.
pub fn audit_conditions(
    field: &CoefficientField,
    spec: &AuditSpec,
    sample_budget: usize,
    rng_seed: u64,
) -> Result<ConditionAudit> {
    if sample_budget == 0 {
        return Err(Error::InvalidArgument("sample budget must be at least 1".into()));
    }
    if field.controls().is_empty() {
        return Err(Error::EmptyControlGrid);
    }
    field.reference().check_mass_invariant()?;
    let d = field.dimension();
    if spec.state_box.dimension() != d {
        return Err(Error::InvalidArgument(format!(
            "state box has dimension {} but the field has dimension {d}",
            spec.state_box.dimension()
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let mut rec = Recorder { violations: Vec::new() };
    let quad = field.reference().quadrature();
    let n_controls = field.controls().len();

    let mut lip_est = 0.0_f64;
    let mut jump_lip_est = 0.0_f64;
    let mut bs_sup = 0.0_f64;
    let mut moment_sup = 0.0_f64;

    let moment = |id: ControlId, x: &[f64]| {
        field
            .triplet(id, x)
            .integrate_jumps(|y| (y.iter().map(|v| v * v).sum::<f64>()).min(1.0))
    };

    for _ in 0..sample_budget {
        let id = ControlId(rng.random_range(0..n_controls));
        let f = field.control(id).to_vec();
        let x = spec.state_box.sample(&mut rng);

        let b = field.drift(id, &x);
        let s = field.dispersion(id, &x);
        let m = moment(id, &x);
        if b.iter().chain(&s).any(|v| !v.is_finite()) || !m.is_finite() {
            rec.push(
                ConditionId::NonFinite,
                Witness { control: f.clone(), x: x.clone(), y: None, z: None, value: f64::NAN },
            );
            continue;
        }
        let bs = norm(&b) + norm(&s);
        bs_sup = bs_sup.max(bs);
        moment_sup = moment_sup.max(m);
        if bs + m > spec.coefficient_bound {
            rec.push(
                ConditionId::CoefficientBound,
                Witness { control: f.clone(), x: x.clone(), y: None, z: None, value: bs + m },
            );
        }
        if !is_symmetric_psd(&field.covariance(id, &x), d, 1e-12) {
            rec.push(
                ConditionId::Covariance,
                Witness { control: f.clone(), x: x.clone(), y: None, z: None, value: 0.0 },
            );
        }

        // paired state at a log-uniform separation
        let sep = spec.pair_scale * 10f64.powf(-6.0 * rng.random::<f64>());
        let dir: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        let dn = norm(&dir).max(1e-300);
        let y: Vec<f64> = x.iter().zip(&dir).map(|(xi, di)| xi + sep * di / dn).collect();
        let dxy = dist(&x, &y);
        if dxy > 0.0 {
            let ratio = (dist(&b, &field.drift(id, &y)) + dist(&s, &field.dispersion(id, &y))) / dxy;
            lip_est = lip_est.max(ratio);
            if ratio > spec.lipschitz_bound {
                rec.push(
                    ConditionId::Lipschitz,
                    Witness { control: f.clone(), x: x.clone(), y: Some(y.clone()), z: None, value: ratio },
                );
            }
        }

        if !quad.is_empty() {
            for _ in 0..MARKS_PER_SAMPLE {
                let z = quad.nodes()[rng.random_range(0..quad.len())];
                let kx = field.jump(id, &x, z);
                let ky = field.jump(id, &y, z);
                if dxy > 0.0 {
                    let inc = dist(&kx, &ky);
                    jump_lip_est = jump_lip_est.max(inc / dxy);
                    if let Some(g) = &spec.gamma {
                        if inc > g.eval(z) * dxy * (1.0 + 1e-9) + 1e-14 {
                            rec.push(
                                ConditionId::JumpLipschitz,
                                Witness {
                                    control: f.clone(),
                                    x: x.clone(),
                                    y: Some(y.clone()),
                                    z: Some(z),
                                    value: inc / dxy,
                                },
                            );
                        }
                    }
                }
                if let Some(beta) = &spec.beta {
                    let size = norm(&kx);
                    if size > beta.eval(z) * (1.0 + 1e-12) + 1e-14 {
                        rec.push(
                            ConditionId::JumpMajorant,
                            Witness { control: f.clone(), x: x.clone(), y: None, z: Some(z), value: size },
                        );
                    }
                }
            }
        }
    }

    // Deterministic scan along the first axis: adjacent differences catch
    // discontinuities that random pairs miss.
    let (lo, hi) = (spec.state_box.lower[0], spec.state_box.upper[0]);
    if hi > lo && sample_budget >= 2 {
        let n = sample_budget;
        let base: Vec<f64> = spec.state_box.lower.clone();
        let at = |k: usize| {
            let mut p = base.clone();
            p[0] = lo + (hi - lo) * k as f64 / (n - 1) as f64;
            p
        };
        for id in field.controls().ids() {
            let f = field.control(id).to_vec();
            let mut prev_x = at(0);
            let mut prev_b = field.drift(id, &prev_x);
            let mut prev_s = field.dispersion(id, &prev_x);
            for k in 1..n {
                let x = at(k);
                let b = field.drift(id, &x);
                let s = field.dispersion(id, &x);
                let ratio = (dist(&b, &prev_b) + dist(&s, &prev_s)) / dist(&x, &prev_x);
                lip_est = lip_est.max(ratio);
                if ratio > spec.lipschitz_bound {
                    rec.push(
                        ConditionId::Lipschitz,
                        Witness { control: f.clone(), x: prev_x.clone(), y: Some(x.clone()), z: None, value: ratio },
                    );
                }
                prev_x = x;
                prev_b = b;
                prev_s = s;
            }
        }
    }

    for g in [&spec.gamma, &spec.beta].into_iter().flatten() {
        let integral = quad.integrate(|z| {
            let v = g.eval(z);
            v.max(v * v)
        });
        if !integral.is_finite() {
            rec.push(
                ConditionId::MajorantIntegrability,
                Witness { control: Vec::new(), x: Vec::new(), y: None, z: None, value: integral },
            );
        }
    }

    Ok(ConditionAudit {
        lipschitz_constant_estimate: lip_est,
        jump_lipschitz_estimate: jump_lip_est,
        drift_dispersion_sup: bs_sup,
        jump_moment_sup: moment_sup,
        gamma: spec.gamma.clone(),
        beta: spec.beta.clone(),
        violations: rec.violations,
        samples: sample_budget,
    })
}
