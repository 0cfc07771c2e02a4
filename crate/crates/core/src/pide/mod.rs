//! Monotone explicit scheme for `u_t = G(x, u)`, `u(0) = psi`, on a truncated
//! one-dimensional domain.
//!
//! Outside `[x_min, x_max]` the solution is extended by its boundary values,
//! so errors concentrate in a boundary layer; compare on an inner window.

mod operator;

use std::fmt;
use std::io::{self, Write};

use crate::error::{Error, Result};
use crate::field::CoefficientField;
use crate::functions::TestFunction;

pub use operator::DiscreteOperator;

#[derive(Debug, Clone, PartialEq)]
pub struct SpatialGrid {
    x_min: f64,
    x_max: f64,
    nx: usize,
}

impl SpatialGrid {
    pub fn new(x_min: f64, x_max: f64, nx: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite() && x_min < x_max) {
            return Err(Error::InvalidArgument(format!("grid needs finite x_min < x_max, got [{x_min}, {x_max}]")));
        }
        if nx < 3 {
            return Err(Error::InvalidArgument(format!("grid needs at least 3 nodes, got {nx}")));
        }
        Ok(Self { x_min, x_max, nx })
    }

    pub fn x_min(&self) -> f64 {
        self.x_min
    }

    pub fn x_max(&self) -> f64 {
        self.x_max
    }

    pub fn len(&self) -> usize {
        self.nx
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn spacing(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn node(&self, i: usize) -> f64 {
        if i + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + i as f64 * self.spacing()
        }
    }

    pub fn nodes(&self) -> Vec<f64> {
        (0..self.nx).map(|i| self.node(i)).collect()
    }

    pub fn sample(&self, psi: &dyn TestFunction) -> Vec<f64> {
        (0..self.nx).map(|i| psi.value1(self.node(i))).collect()
    }

    /// Indices of nodes inside the central `fraction` of the domain.
    pub fn inner(&self, fraction: f64) -> std::ops::Range<usize> {
        let mid = 0.5 * (self.x_min + self.x_max);
        let half = 0.5 * fraction * (self.x_max - self.x_min);
        let lo = (0..self.nx).find(|&i| self.node(i) >= mid - half - 1e-12).unwrap_or(0);
        let hi = (0..self.nx).rev().find(|&i| self.node(i) <= mid + half + 1e-12).unwrap_or(self.nx - 1);
        lo..hi + 1
    }

    /// Linear interpolation with constant extension.
    pub fn interpolate(&self, u: &[f64], x: f64) -> f64 {
        let p = (x - self.x_min) / self.spacing();
        if p <= 0.0 {
            return u[0];
        }
        if p >= (self.nx - 1) as f64 {
            return u[self.nx - 1];
        }
        let lo = (p.floor() as usize).min(self.nx - 2);
        let theta = p - lo as f64;
        u[lo] + theta * (u[lo + 1] - u[lo])
    }

    /// Index of the node nearest to `x`, clamped to the grid.
    pub fn nearest(&self, x: f64) -> usize {
        let p = ((x - self.x_min) / self.spacing()).round();
        p.clamp(0.0, (self.nx - 1) as f64) as usize
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveOptions {
    /// CFL safety factor in `(0, 1]`.
    pub safety: f64,
    pub dt_max: f64,
    /// Extra times that must appear on the stored timeline.
    pub checkpoints: Vec<f64>,
}

impl Default for SolveOptions {
    fn default() -> Self {
        Self { safety: 0.9, dt_max: 1e-2, checkpoints: Vec::new() }
    }
}

impl SolveOptions {
    pub fn safety(mut self, safety: f64) -> Self {
        self.safety = safety;
        self
    }

    pub fn dt_max(mut self, dt_max: f64) -> Self {
        self.dt_max = dt_max;
        self
    }

    pub fn checkpoint(mut self, t: f64) -> Self {
        self.checkpoints.push(t);
        self
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SolveMeta {
    pub horizon: f64,
    pub dt: f64,
    pub steps: usize,
    pub safety: f64,
    pub dt_max: f64,
    /// `max dt * stencil_sup` over the steps taken; at most 1.
    pub cfl_ratio: f64,
    /// Bound on the error from dropping `nu` outside the quadrature window.
    pub tail_error_bound: f64,
    pub controls: usize,
    pub jump_groups: usize,
    pub quadrature_nodes: usize,
    pub z_cut: f64,
}

impl fmt::Display for SolveMeta {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "horizon = {}", self.horizon)?;
        writeln!(f, "dt = {:e}", self.dt)?;
        writeln!(f, "steps = {}", self.steps)?;
        writeln!(f, "cfl_safety = {}", self.safety)?;
        writeln!(f, "dt_max = {}", self.dt_max)?;
        writeln!(f, "cfl_ratio = {}", self.cfl_ratio)?;
        writeln!(f, "tail_error_bound = {:e}", self.tail_error_bound)?;
        writeln!(f, "controls = {}", self.controls)?;
        writeln!(f, "jump_groups = {}", self.jump_groups)?;
        writeln!(f, "quadrature_nodes = {}", self.quadrature_nodes)?;
        writeln!(f, "z_cut = {}", self.z_cut)
    }
}

/// `u(t, x)` on a grid and a timeline starting at 0.
#[derive(Debug, Clone)]
pub struct ValueField {
    grid: SpatialGrid,
    times: Vec<f64>,
    values: Vec<Vec<f64>>,
    meta: SolveMeta,
}

impl ValueField {
    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn meta(&self) -> &SolveMeta {
        &self.meta
    }

    pub fn horizon(&self) -> f64 {
        *self.times.last().expect("timeline is nonempty")
    }

    pub fn at(&self, t_index: usize) -> &[f64] {
        &self.values[t_index]
    }

    pub fn initial(&self) -> &[f64] {
        &self.values[0]
    }

    pub fn terminal(&self) -> &[f64] {
        self.values.last().expect("timeline is nonempty")
    }

    /// Terminal value at `x` by linear interpolation.
    pub fn value_at(&self, x: f64) -> f64 {
        self.grid.interpolate(self.terminal(), x)
    }

    /// Position of `t` on the timeline, up to a relative `1e-9`.
    pub fn time_index(&self, t: f64) -> Result<usize> {
        let tol = 1e-9 * self.horizon().max(1.0);
        self.times
            .iter()
            .position(|s| (s - t).abs() <= tol)
            .ok_or(Error::NotOnTimeline(t))
    }

    /// Last stored index with time `<= t`.
    pub fn index_before(&self, t: f64) -> usize {
        let tol = 1e-12 * self.horizon().max(1.0);
        self.times.partition_point(|&s| s <= t + tol).saturating_sub(1)
    }

    pub fn write_csv<W: Write>(&self, mut out: W) -> io::Result<()> {
        writeln!(out, "t,x,u")?;
        let xs = self.grid.nodes();
        for (t, row) in self.times.iter().zip(&self.values) {
            for (x, u) in xs.iter().zip(row) {
                writeln!(out, "{t},{x},{u}")?;
            }
        }
        Ok(())
    }
}

/// Stable step for the scheme on `grid`; see [`DiscreteOperator::cfl_timestep`].
pub fn cfl_timestep(field: &CoefficientField, grid: &SpatialGrid, safety: f64, dt_max: f64) -> Result<f64> {
    DiscreteOperator::new(field, grid)?.cfl_timestep(safety, dt_max)
}

/// Explicit monotone stepping `u <- u + dt G_h(u)` up to `horizon`.
pub fn solve(
    field: &CoefficientField,
    psi: &[f64],
    horizon: f64,
    grid: &SpatialGrid,
    options: &SolveOptions,
) -> Result<ValueField> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be positive and finite, got {horizon}")));
    }
    let op = DiscreteOperator::new(field, grid)?;
    solve_with(&op, psi, horizon, options)
}

/// As [`solve`], reusing a prebuilt operator.
pub fn solve_with(op: &DiscreteOperator, psi: &[f64], horizon: f64, options: &SolveOptions) -> Result<ValueField> {
    let grid = op.grid();
    if psi.len() != grid.len() {
        return Err(Error::GridMismatch(format!("initial data has {} values for {} nodes", psi.len(), grid.len())));
    }
    if let Some(i) = psi.iter().position(|v| !v.is_finite()) {
        return Err(Error::Blowup { step: 0, node: i });
    }
    if !(horizon >= 0.0 && horizon.is_finite()) {
        return Err(Error::InvalidArgument(format!("horizon must be finite and nonnegative, got {horizon}")));
    }
    let dt = op.cfl_timestep(options.safety, options.dt_max)?;

    let mut targets: Vec<f64> = options.checkpoints.iter().copied().filter(|&t| t > 0.0 && t < horizon).collect();
    targets.push(horizon);
    targets.sort_by(f64::total_cmp);
    targets.dedup();

    let sup_psi = psi.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
    let mut times = vec![0.0];
    let mut values = vec![psi.to_vec()];
    let mut u = psi.to_vec();
    let mut g = vec![0.0; u.len()];
    let mut t = 0.0;
    let mut step = 0;
    let mut cfl_ratio: f64 = 0.0;
    let snap = 1e-12 * horizon.max(1.0);

    for &target in &targets {
        while target - t > snap {
            let h = if target - t - dt <= snap { target - t } else { dt };
            step += 1;
            let ratio = h * op.stencil_sup();
            if ratio > 1.0 + 1e-12 {
                return Err(Error::Cfl { step, ratio });
            }
            cfl_ratio = cfl_ratio.max(ratio);
            op.apply(&u, &mut g);
            for (i, (ui, gi)) in u.iter_mut().zip(&g).enumerate() {
                *ui += h * gi;
                if !ui.is_finite() {
                    return Err(Error::Blowup { step, node: i });
                }
            }
            t = if h == target - t { target } else { t + h };
            times.push(t);
            values.push(u.clone());
        }
    }

    let meta = SolveMeta {
        horizon,
        dt,
        steps: step,
        safety: options.safety,
        dt_max: options.dt_max,
        cfl_ratio,
        tail_error_bound: 2.0 * sup_psi * horizon * op.outside_mass(),
        controls: op.control_count(),
        jump_groups: op.jump_groups(),
        quadrature_nodes: op.quadrature_nodes(),
        z_cut: op.z_cut(),
    };
    Ok(ValueField { grid: grid.clone(), times, values, meta })
}

/// `solve` started from `u(s, .)` for a further `additional` time units; the
/// returned timeline restarts at 0.
pub fn restart(u: &ValueField, field: &CoefficientField, s: f64, additional: f64) -> Result<ValueField> {
    let idx = u.time_index(s)?;
    let options = SolveOptions { safety: u.meta.safety, dt_max: u.meta.dt_max, checkpoints: Vec::new() };
    let op = DiscreteOperator::new(field, &u.grid)?;
    solve_with(&op, u.at(idx), additional, &options)
}

/// `(u(t+) - u(t-)) / (t+ - t-) - G_h(u(t))` at every node.
pub fn viscosity_residual(u: &ValueField, field: &CoefficientField, t_index: usize) -> Result<Vec<f64>> {
    if t_index == 0 || t_index + 1 >= u.times.len() {
        return Err(Error::InvalidArgument(format!(
            "residual needs an interior time index, got {t_index} of {}",
            u.times.len()
        )));
    }
    let op = DiscreteOperator::new(field, &u.grid)?;
    let mut g = vec![0.0; u.grid.len()];
    op.apply(u.at(t_index), &mut g);
    let span = u.times[t_index + 1] - u.times[t_index - 1];
    Ok(u.values[t_index + 1]
        .iter()
        .zip(&u.values[t_index - 1])
        .zip(&g)
        .map(|((up, down), g)| (up - down) / span - g)
        .collect())
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use super::*;
    use crate::control::ControlGrid;
    use crate::field::ScalarCoefficients;
    use crate::functions::{Constant, GaussianBump};
    use crate::measure::JumpReferenceMeasure;
    use crate::truncation::TruncationFunction;

    fn drift_field(lo: f64, hi: f64, n: usize, sigma: f64) -> CoefficientField {
        let coeffs = ScalarCoefficients::new(|f, _| f[0], move |_, _| sigma, |_, _, _| 0.0);
        let controls = if n == 1 {
            ControlGrid::singleton(&[lo]).unwrap()
        } else {
            ControlGrid::uniform(&[lo], &[hi], n).unwrap()
        };
        CoefficientField::new(Arc::new(coeffs), JumpReferenceMeasure::none(), TruncationFunction::clip(1.0).unwrap(), controls)
            .unwrap()
    }

    #[test]
    fn cfl_formula_matches_hand_arithmetic() {
        let grid = SpatialGrid::new(0.0, 1.0, 11).unwrap();
        let field = drift_field(0.0, 0.0, 1, 1.0);
        let dt = cfl_timestep(&field, &grid, 0.5, 1.0).unwrap();
        assert!((dt - 0.005).abs() < 1e-15);
    }

    #[test]
    fn zero_coefficients_hit_the_cap() {
        let grid = SpatialGrid::new(0.0, 1.0, 11).unwrap();
        let field = drift_field(0.0, 0.0, 1, 0.0);
        assert_eq!(cfl_timestep(&field, &grid, 0.5, 0.125).unwrap(), 0.125);
        assert!(cfl_timestep(&field, &grid, 0.0, 0.125).is_err());
        assert!(cfl_timestep(&field, &grid, 1.5, 0.125).is_err());
    }

    #[test]
    fn degenerate_grids_are_rejected() {
        assert!(SpatialGrid::new(1.0, 1.0, 11).is_err());
        assert!(SpatialGrid::new(0.0, 1.0, 2).is_err());
        assert!(SpatialGrid::new(0.0, f64::NAN, 5).is_err());
    }

    #[test]
    fn constants_are_preserved_exactly() {
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        let field = drift_field(-1.0, 1.0, 5, 0.4);
        let psi = grid.sample(&Constant(2.5));
        let u = solve(&field, &psi, 0.5, &grid, &SolveOptions::default()).unwrap();
        for k in 0..u.times().len() {
            assert!(u.at(k).iter().all(|&v| v == 2.5));
        }
    }

    #[test]
    fn sine_is_transported_along_characteristics() {
        let grid = SpatialGrid::new(-10.0, 10.0, 801).unwrap();
        let field = drift_field(1.0, 1.0, 1, 0.0);
        let psi: Vec<f64> = grid.nodes().iter().map(|x| x.sin()).collect();
        let u = solve(&field, &psi, 1.0, &grid, &SolveOptions::default().dt_max(1.0)).unwrap();
        assert!((u.horizon() - 1.0).abs() < 1e-15);
        let err = grid
            .inner(0.6)
            .map(|i| (u.terminal()[i] - (grid.node(i) + 1.0).sin()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-2, "transport error {err}");
    }

    #[test]
    fn drift_control_picks_the_largest_drift_for_increasing_data() {
        let grid = SpatialGrid::new(-10.0, 10.0, 801).unwrap();
        let field = drift_field(-1.0, 1.0, 5, 0.0);
        let psi: Vec<f64> = grid.nodes().iter().map(|x| x.tanh()).collect();
        let u = solve(&field, &psi, 1.0, &grid, &SolveOptions::default().dt_max(1.0)).unwrap();
        let err = grid
            .inner(0.6)
            .map(|i| (u.terminal()[i] - (grid.node(i) + 1.0).tanh()).abs())
            .fold(0.0, f64::max);
        assert!(err < 1e-2, "HJB error {err}");
    }

    #[test]
    fn scheme_is_monotone_in_initial_data() {
        let grid = SpatialGrid::new(-5.0, 5.0, 101).unwrap();
        let field = drift_field(-0.5, 0.5, 3, 0.7);
        let low = grid.sample(&GaussianBump::new(0.0, 0.7, 1.0));
        let high: Vec<f64> = low.iter().zip(grid.nodes()).map(|(v, x)| v + 0.1 * (x * 3.0).cos().abs()).collect();
        let opts = SolveOptions::default();
        let a = solve(&field, &low, 0.5, &grid, &opts).unwrap();
        let b = solve(&field, &high, 0.5, &grid, &opts).unwrap();
        for k in 0..a.times().len() {
            for (x, y) in a.at(k).iter().zip(b.at(k)) {
                assert!(x <= &(y + 1e-12));
            }
        }
        let sup = high.iter().fold(0.0_f64, |m, v| m.max(v.abs()));
        assert!(b.terminal().iter().all(|v| v.abs() <= sup + 1e-12));
    }

    #[test]
    fn checkpoints_land_on_the_timeline_and_restart_is_identity_at_zero() {
        let grid = SpatialGrid::new(-5.0, 5.0, 101).unwrap();
        let field = drift_field(-0.5, 0.5, 3, 0.7);
        let psi = grid.sample(&GaussianBump::new(0.0, 0.7, 1.0));
        let opts = SolveOptions::default().checkpoint(0.3333);
        let u = solve(&field, &psi, 1.0, &grid, &opts).unwrap();
        let k = u.time_index(0.3333).unwrap();
        assert_eq!(u.times()[k], 0.3333);
        let same = restart(&u, &field, 0.3333, 0.0).unwrap();
        assert_eq!(same.times(), &[0.0]);
        assert_eq!(same.terminal(), u.at(k));
        assert!(matches!(restart(&u, &field, 0.123456, 0.1), Err(Error::NotOnTimeline(_))));
    }

    #[test]
    fn residual_vanishes_on_constants_and_rejects_endpoints() {
        let grid = SpatialGrid::new(-3.0, 3.0, 61).unwrap();
        let field = drift_field(-1.0, 1.0, 3, 0.3);
        let u = solve(&field, &grid.sample(&Constant(-1.0)), 0.1, &grid, &SolveOptions::default()).unwrap();
        let r = viscosity_residual(&u, &field, 1).unwrap();
        assert!(r.iter().all(|&v| v == 0.0));
        assert!(viscosity_residual(&u, &field, 0).is_err());
        assert!(viscosity_residual(&u, &field, u.times().len() - 1).is_err());
    }

    #[test]
    fn residual_of_the_solution_is_small_in_the_interior() {
        let grid = SpatialGrid::new(-5.0, 5.0, 201).unwrap();
        let field = drift_field(-0.5, 0.5, 3, 0.5);
        let psi = grid.sample(&GaussianBump::new(0.0, 1.0, 1.0));
        let u = solve(&field, &psi, 0.2, &grid, &SolveOptions::default()).unwrap();
        let mid = u.times().len() / 2;
        let r = viscosity_residual(&u, &field, mid).unwrap();
        let worst = grid.inner(0.6).map(|i| r[i].abs()).fold(0.0, f64::max);
        assert!(worst < 5e-2, "residual {worst}");
    }

    #[test]
    fn csv_has_one_row_per_node_and_time() {
        let grid = SpatialGrid::new(0.0, 1.0, 5).unwrap();
        let field = drift_field(0.0, 0.0, 1, 0.0);
        let u = solve(&field, &grid.sample(&Constant(1.0)), 0.02, &grid, &SolveOptions::default()).unwrap();
        let mut buf = Vec::new();
        u.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        assert_eq!(text.lines().count(), 1 + 5 * u.times().len());
        assert!(text.starts_with("t,x,u\n0,0,1\n"));
    }
}
