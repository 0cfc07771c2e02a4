//! Weak-control Monte Carlo: Euler steps for drift and diffusion, exact
//! compound-Poisson jump times, feedback controls read from a policy.
//!
//! Jumps are added raw at Poisson times while `int h(k) dnu` is subtracted
//! from the drift continuously, which is the compensated form when `nu` has
//! finite mass. Paths are seeded independently, so estimates do not depend
//! on the thread count.

use std::io::{self, Write};

use rand::distr::Open01;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Exp1, StandardNormal};
use rayon::prelude::*;

use crate::control::{ControlGrid, ControlId};
use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::functions::TestFunction;
use crate::measure::Mass;
use crate::pide::{DiscreteOperator, SpatialGrid, ValueField};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Provenance {
    ArgmaxFromPide,
    Constant,
    User,
}

/// Piecewise-constant feedback control `(t, x) -> f`.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySchedule {
    knots: Vec<f64>,
    grid: Option<SpatialGrid>,
    lookup: Vec<Vec<ControlId>>,
    provenance: Provenance,
}

impl PolicySchedule {
    pub fn constant(id: ControlId) -> Self {
        Self {
            knots: vec![0.0],
            grid: None,
            lookup: vec![vec![id]],
            provenance: Provenance::Constant,
        }
    }

    /// `lookup[k][i]` is the control on grid cell `i` from knot `k` on.
    pub fn user(knots: Vec<f64>, grid: SpatialGrid, lookup: Vec<Vec<ControlId>>, controls: &ControlGrid) -> Result<Self> {
        Self::checked(knots, grid, lookup, controls, Provenance::User)
    }

    fn checked(
        knots: Vec<f64>,
        grid: SpatialGrid,
        lookup: Vec<Vec<ControlId>>,
        controls: &ControlGrid,
        provenance: Provenance,
    ) -> Result<Self> {
        if knots.first() != Some(&0.0) || knots.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::InvalidArgument("policy knots must start at 0 and increase strictly".into()));
        }
        if lookup.len() != knots.len() || lookup.iter().any(|row| row.len() != grid.len()) {
            return Err(Error::GridMismatch("policy lookup does not match knots and grid".into()));
        }
        if lookup.iter().flatten().any(|&id| !controls.contains(id)) {
            return Err(Error::InvalidArgument("policy refers to a control outside the grid".into()));
        }
        Ok(Self { knots, grid: Some(grid), lookup, provenance })
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn grid(&self) -> Option<&SpatialGrid> {
        self.grid.as_ref()
    }

    pub fn provenance(&self) -> Provenance {
        self.provenance
    }

    /// Whether every knot and cell uses the same control.
    pub fn is_constant(&self) -> bool {
        let first = self.lookup[0][0];
        self.lookup.iter().flatten().all(|&id| id == first)
    }

    /// Control in force at elapsed time `t` and state `x` (nearest cell).
    pub fn control(&self, t: f64, x: f64) -> ControlId {
        let k = self.knots.partition_point(|&s| s <= t).saturating_sub(1);
        match &self.grid {
            Some(grid) => self.lookup[k][grid.nearest(x)],
            None => self.lookup[k][0],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct JumpRecord {
    pub time: f64,
    pub mark: f64,
    /// Applied displacement `k(f, x-, z)`.
    pub size: f64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct SamplePath {
    pub times: Vec<f64>,
    pub states: Vec<f64>,
    /// True for rows recorded right after a jump.
    pub jump_flags: Vec<bool>,
    pub jumps: Vec<JumpRecord>,
}

impl SamplePath {
    pub fn terminal(&self) -> f64 {
        *self.states.last().expect("paths start with x0")
    }

    fn push(&mut self, t: f64, x: f64, jump: bool) {
        self.times.push(t);
        self.states.push(x);
        self.jump_flags.push(jump);
    }

    /// Rows `path_id,t,x,jump_flag`; pass `header = false` to append paths.
    pub fn write_csv<W: Write>(&self, path_id: u64, header: bool, mut out: W) -> io::Result<()> {
        if header {
            writeln!(out, "path_id,t,x,jump_flag")?;
        }
        for ((t, x), j) in self.times.iter().zip(&self.states).zip(&self.jump_flags) {
            writeln!(out, "{path_id},{t},{x},{}", u8::from(*j))?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Estimate {
    pub mean: f64,
    pub stderr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct McComparison {
    pub mean: f64,
    pub stderr: f64,
    pub pide_value: f64,
}

impl McComparison {
    /// `mean <= pide_value + 3 stderr + tolerance`.
    pub fn is_lower_bound(&self, tolerance: f64) -> bool {
        self.mean <= self.pide_value + 3.0 * self.stderr + tolerance
    }

    /// `|mean - pide_value| <= 3 stderr + tolerance`.
    pub fn agrees(&self, tolerance: f64) -> bool {
        (self.mean - self.pide_value).abs() <= 3.0 * self.stderr + tolerance
    }
}

/// Seed of path `i`: SplitMix64 finaliser applied to `seed` and `i`.
pub fn path_seed(seed: u64, i: u64) -> u64 {
    let mut z = seed ^ i.wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Compensator `int h(k(f, x, z)) nu(dz)` tabulated per control on a grid.
struct Engine<'a> {
    field: &'a CoefficientField,
    policy: &'a PolicySchedule,
    table_grid: SpatialGrid,
    compensator: Vec<Vec<f64>>,
    rate: f64,
}

impl<'a> Engine<'a> {
    fn new(field: &'a CoefficientField, policy: &'a PolicySchedule, x0: f64) -> Result<Self> {
        if field.dimension() != 1 {
            return Err(Error::UnsupportedDimension(field.dimension()));
        }
        let rate = match field.reference().total_mass() {
            Mass::Finite(m) => m,
            Mass::Infinite => return Err(Error::InfiniteMass),
        };
        if policy.lookup.iter().flatten().any(|&id| !field.controls().contains(id)) {
            return Err(Error::InvalidArgument("policy refers to a control outside the field's grid".into()));
        }
        let table_grid = match &policy.grid {
            Some(g) => g.clone(),
            None => SpatialGrid::new(x0 - 25.0, x0 + 25.0, 1001)?,
        };
        let quad = field.reference().quadrature();
        let h = field.truncation();
        let xs = table_grid.nodes();
        let compensator = field
            .controls()
            .ids()
            .map(|id| xs.iter().map(|&x| quad.integrate(|z| h.apply1(field.jump1(id, x, z)))).collect())
            .collect();
        Ok(Self { field, policy, table_grid, compensator, rate })
    }

    fn drift(&self, id: ControlId, x: f64) -> f64 {
        self.field.drift1(id, x) - self.table_grid.interpolate(&self.compensator[id.0], x)
    }

    fn run(&self, x0: f64, horizon: f64, dt: f64, seed: u64, path: u64, mut record: Option<&mut SamplePath>) -> Result<f64> {
        let mut rng = ChaCha8Rng::seed_from_u64(path_seed(seed, path));
        let law = self.field.reference().law();
        let mut next_jump = if self.rate > 0.0 {
            rng.sample::<f64, _>(Exp1) / self.rate
        } else {
            f64::INFINITY
        };
        let steps = ((horizon / dt) - 1e-9).ceil().max(1.0) as usize;
        let mut t = 0.0;
        let mut x = x0;
        if let Some(rec) = record.as_deref_mut() {
            rec.push(0.0, x0, false);
        }
        for n in 0..steps {
            let t_end = if n + 1 == steps { horizon } else { (n + 1) as f64 * dt };
            while t < t_end {
                let stop = next_jump.min(t_end);
                let h = stop - t;
                if h > 0.0 {
                    let id = self.policy.control(t, x);
                    let var = self.field.diffusion1(id, x);
                    x += self.drift(id, x) * h;
                    if var > 0.0 {
                        let w: f64 = rng.sample(StandardNormal);
                        x += (var * h).sqrt() * w;
                    }
                }
                t = stop;
                if next_jump <= t_end {
                    let u: f64 = rng.sample(Open01);
                    let z = law.inverse_cdf(u).ok_or(Error::InfiniteMass)?;
                    // control and jump both read the pre-jump state
                    let id = self.policy.control(t, x);
                    let k = self.field.jump1(id, x, z);
                    x += k;
                    next_jump += rng.sample::<f64, _>(Exp1) / self.rate;
                    if let Some(rec) = record.as_deref_mut() {
                        rec.jumps.push(JumpRecord { time: t, mark: z, size: k });
                        rec.push(t, x, true);
                    }
                }
                if !x.is_finite() {
                    return Err(Error::NonFiniteState { path, step: n });
                }
            }
            if let Some(rec) = record.as_deref_mut() {
                rec.push(t, x, false);
            }
        }
        Ok(x)
    }
}

fn check_run(x0: f64, horizon: f64, dt: f64) -> Result<()> {
    if !x0.is_finite() {
        return Err(Error::InvalidArgument(format!("initial state must be finite, got {x0}")));
    }
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive, got {horizon}")));
    }
    if !(dt > 0.0 && dt.is_finite()) {
        return Err(Error::InvalidArgument(format!("time step must be positive, got {dt}")));
    }
    Ok(())
}

/// One controlled path on `[0, horizon]`, recorded at every step and jump.
pub fn sample_path(
    field: &CoefficientField,
    policy: &PolicySchedule,
    x0: f64,
    horizon: f64,
    dt: f64,
    seed: u64,
) -> Result<SamplePath> {
    check_run(x0, horizon, dt)?;
    let engine = Engine::new(field, policy, x0)?;
    let mut path = SamplePath::default();
    engine.run(x0, horizon, dt, seed, 0, Some(&mut path))?;
    Ok(path)
}

/// Several recorded paths; path `i` matches `estimate_value`'s path `i`.
pub fn sample_paths(
    field: &CoefficientField,
    policy: &PolicySchedule,
    x0: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Vec<SamplePath>> {
    check_run(x0, horizon, dt)?;
    let engine = Engine::new(field, policy, x0)?;
    (0..n_paths as u64)
        .into_par_iter()
        .map(|i| {
            let mut path = SamplePath::default();
            engine.run(x0, horizon, dt, seed, i, Some(&mut path))?;
            Ok(path)
        })
        .collect()
}

/// Mean and standard error of `psi(X_T)` over `n_paths` paths.
#[allow(clippy::too_many_arguments)]
pub fn estimate_value(
    field: &CoefficientField,
    policy: &PolicySchedule,
    psi: &dyn TestFunction,
    x0: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<Estimate> {
    check_run(x0, horizon, dt)?;
    if n_paths < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 paths, got {n_paths}")));
    }
    let engine = Engine::new(field, policy, x0)?;
    let values: Vec<f64> = (0..n_paths as u64)
        .into_par_iter()
        .map(|i| engine.run(x0, horizon, dt, seed, i, None).map(|x| psi.value1(x)))
        .collect::<Result<_>>()?;
    let n = values.len() as f64;
    let mean = pairwise_sum(&values) / n;
    let squares: Vec<f64> = values.iter().map(|v| (v - mean) * (v - mean)).collect();
    let var = pairwise_sum(&squares) / (n - 1.0);
    Ok(Estimate { mean, stderr: (var / n).sqrt() })
}

/// Fixed-order pairwise summation.
pub fn pairwise_sum(v: &[f64]) -> f64 {
    if v.len() <= 32 {
        v.iter().sum()
    } else {
        let mid = v.len() / 2;
        pairwise_sum(&v[..mid]) + pairwise_sum(&v[mid..])
    }
}

/// Argmax of `G_h` on the solved field; elapsed time `s` reads `u(T - s)`.
pub fn policy_from_pide(u: &ValueField, field: &CoefficientField) -> Result<PolicySchedule> {
    if u.meta().controls != field.controls().len() {
        return Err(Error::GridMismatch(format!(
            "value field was solved with {} controls, field has {}",
            u.meta().controls,
            field.controls().len()
        )));
    }
    let op = DiscreteOperator::new(field, u.grid())?;
    let horizon = u.horizon();
    let times = u.times();
    let mut knots = Vec::with_capacity(times.len());
    let mut lookup = Vec::with_capacity(times.len());
    for k in (1..times.len()).rev() {
        knots.push(if k + 1 == times.len() { 0.0 } else { horizon - times[k] });
        lookup.push(op.apply_with_argmax(u.at(k)).1);
    }
    if knots.is_empty() {
        knots.push(0.0);
        lookup.push(op.apply_with_argmax(u.at(0)).1);
    }
    PolicySchedule::checked(knots, u.grid().clone(), lookup, field.controls(), Provenance::ArgmaxFromPide)
}

/// Monte Carlo value under the PIDE argmax policy next to the PIDE value at `x0`.
#[allow(clippy::too_many_arguments)]
pub fn mc_lower_bound(
    field: &CoefficientField,
    u: &ValueField,
    psi: &dyn TestFunction,
    x0: f64,
    horizon: f64,
    dt: f64,
    n_paths: usize,
    seed: u64,
) -> Result<McComparison> {
    if (u.horizon() - horizon).abs() > 1e-9 * horizon.max(1.0) {
        return Err(Error::NotOnTimeline(horizon));
    }
    let policy = policy_from_pide(u, field)?;
    let est = estimate_value(field, &policy, psi, x0, horizon, dt, n_paths, seed)?;
    Ok(McComparison { mean: est.mean, stderr: est.stderr, pide_value: u.value_at(x0) })
}

/// `n` draws of `k(f, x, z)` with `z` from the normalized reference measure.
pub fn sample_jumps(field: &CoefficientField, id: ControlId, x: f64, n: usize, seed: u64) -> Result<Vec<f64>> {
    if !matches!(field.reference().total_mass(), Mass::Finite(m) if m > 0.0) {
        return Err(Error::InfiniteMass);
    }
    let law = field.reference().law();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| {
            let z = law.inverse_cdf(rng.sample(Open01)).ok_or(Error::InfiniteMass)?;
            Ok(field.jump1(id, x, z))
        })
        .collect()
}

/// Two-sample Kolmogorov-Smirnov statistic `sup |F_a - F_b|`.
pub fn ks_statistic(a: &[f64], b: &[f64]) -> f64 {
    let mut a = a.to_vec();
    let mut b = b.to_vec();
    a.sort_by(f64::total_cmp);
    b.sort_by(f64::total_cmp);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j, mut d) = (0, 0, 0.0_f64);
    while i < a.len() && j < b.len() {
        let v = a[i].min(b[j]);
        while i < a.len() && a[i] <= v {
            i += 1;
        }
        while j < b.len() && b[j] <= v {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}
