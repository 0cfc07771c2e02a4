//! Precomputed monotone stencil for the discrete nonlinearity `G_h`.

use rayon::prelude::*;

use crate::control::ControlId;
use crate::error::{Error, Result};
use crate::field::CoefficientField;

use super::SpatialGrid;

/// One jump target: `w * (u[lo] + theta * (u[lo + 1] - u[lo]) - u[i])`.
#[derive(Debug, Clone, Copy)]
struct JumpEntry {
    lo: u32,
    theta: f64,
    weight: f64,
}

/// Jump stencils shared by every control whose offsets `k(f, x_i, z_j)` coincide.
#[derive(Debug, Clone)]
struct JumpGroup {
    offsets: Vec<usize>,
    entries: Vec<JumpEntry>,
}

impl JumpGroup {
    #[inline]
    fn apply(&self, u: &[f64], i: usize) -> f64 {
        let ui = u[i];
        self.entries[self.offsets[i]..self.offsets[i + 1]]
            .iter()
            .map(|e| {
                let lo = e.lo as usize;
                let a = u[lo];
                let b = if e.theta == 0.0 { a } else { u[lo + 1] };
                e.weight * (a + e.theta * (b - a) - ui)
            })
            .sum()
    }
}

#[derive(Debug, Clone)]
struct ControlStencil {
    /// `b - int h(k) dnu` per node; the sign picks the upwind direction.
    drift: Vec<f64>,
    /// `sigma sigma^*` per node.
    diffusion: Vec<f64>,
    group: usize,
}

/// `G_h` on a fixed grid: the max over controls of upwinded drift, centred
/// diffusion and the quadrature jump term with linear interpolation.
#[derive(Debug, Clone)]
pub struct DiscreteOperator {
    grid: SpatialGrid,
    controls: Vec<ControlStencil>,
    groups: Vec<JumpGroup>,
    drift_sup: f64,
    diffusion_sup: f64,
    jump_mass: f64,
    stencil_sup: f64,
    outside_mass: f64,
    quadrature_nodes: usize,
    z_cut: f64,
}

impl DiscreteOperator {
    pub fn new(field: &CoefficientField, grid: &SpatialGrid) -> Result<Self> {
        if field.dimension() != 1 {
            return Err(Error::UnsupportedDimension(field.dimension()));
        }
        let xs = grid.nodes();
        let nx = xs.len();
        let quad = field.reference().quadrature();
        let h = field.truncation();
        let mut group_keys: Vec<Vec<f64>> = Vec::new();
        let mut groups: Vec<JumpGroup> = Vec::new();
        let mut controls = Vec::with_capacity(field.controls().len());

        for id in field.controls().ids() {
            let mut offsets = Vec::with_capacity(nx * quad.len());
            let mut drift = Vec::with_capacity(nx);
            let mut diffusion = Vec::with_capacity(nx);
            for &x in &xs {
                let b = field.drift1(id, x);
                let a = field.diffusion1(id, x);
                if !b.is_finite() {
                    return Err(non_finite("drift", field, id, x, None));
                }
                if !a.is_finite() {
                    return Err(non_finite("dispersion", field, id, x, None));
                }
                let mut comp = 0.0;
                for (z, w) in quad.iter() {
                    let k = field.jump1(id, x, z);
                    if !k.is_finite() {
                        return Err(non_finite("jump", field, id, x, Some(z)));
                    }
                    comp += w * h.apply1(k);
                    offsets.push(k);
                }
                drift.push(b - comp);
                diffusion.push(a);
            }
            let group = match group_keys.iter().position(|g| same_bits(g, &offsets)) {
                Some(g) => g,
                None => {
                    groups.push(build_group(grid, &offsets, quad.weights()));
                    group_keys.push(offsets);
                    groups.len() - 1
                }
            };
            controls.push(ControlStencil { drift, diffusion, group });
        }

        let dx = grid.spacing();
        let drift_sup = controls.iter().flat_map(|c| c.drift.iter()).fold(0.0_f64, |m, b| m.max(b.abs()));
        let diffusion_sup = controls.iter().flat_map(|c| c.diffusion.iter()).fold(0.0_f64, |m, a| m.max(*a));
        let jump_mass = if quad.is_empty() { 0.0 } else { quad.mass() };
        let stencil_sup = controls
            .iter()
            .flat_map(|c| c.drift.iter().zip(&c.diffusion))
            .map(|(b, a)| a / (dx * dx) + b.abs() / dx)
            .fold(0.0_f64, f64::max)
            + jump_mass;
        let outside_mass = if quad.is_empty() { 0.0 } else { quad.outside_mass() };
        Ok(Self {
            grid: grid.clone(),
            controls,
            groups,
            drift_sup,
            diffusion_sup,
            jump_mass,
            stencil_sup,
            outside_mass,
            quadrature_nodes: quad.len(),
            z_cut: quad.z_cut(),
        })
    }

    pub fn grid(&self) -> &SpatialGrid {
        &self.grid
    }

    pub fn control_count(&self) -> usize {
        self.controls.len()
    }

    /// Number of distinct jump stencils after deduplication across controls.
    pub fn jump_groups(&self) -> usize {
        self.groups.len()
    }

    /// `sup |b - int h(k) dnu|` over controls and nodes.
    pub fn drift_sup(&self) -> f64 {
        self.drift_sup
    }

    pub fn diffusion_sup(&self) -> f64 {
        self.diffusion_sup
    }

    pub fn jump_mass(&self) -> f64 {
        self.jump_mass
    }

    /// Mass of the reference measure outside the quadrature window.
    pub fn outside_mass(&self) -> f64 {
        self.outside_mass
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.quadrature_nodes
    }

    pub fn z_cut(&self) -> f64 {
        self.z_cut
    }

    /// Largest diagonal rate of the stencil; a step `dt` is monotone iff
    /// `dt * stencil_sup <= 1`.
    pub fn stencil_sup(&self) -> f64 {
        self.stencil_sup
    }

    /// `safety / (a_max/dx^2 + b_max/dx + jump_mass)`, capped at `dt_max`.
    pub fn cfl_timestep(&self, safety: f64, dt_max: f64) -> Result<f64> {
        if !(safety > 0.0 && safety <= 1.0) {
            return Err(Error::InvalidArgument(format!("CFL safety must lie in (0, 1], got {safety}")));
        }
        if !(dt_max > 0.0) {
            return Err(Error::InvalidArgument(format!("dt_max must be positive, got {dt_max}")));
        }
        let dx = self.grid.spacing();
        let rate = self.diffusion_sup / (dx * dx) + self.drift_sup / dx + self.jump_mass;
        if rate <= 0.0 {
            return Ok(dt_max);
        }
        Ok((safety / rate).min(dt_max))
    }

    #[inline]
    fn control_value(&self, c: &ControlStencil, u: &[f64], i: usize, jump: f64) -> f64 {
        let n = u.len();
        let dx = self.grid.spacing();
        let left = if i == 0 { u[0] } else { u[i - 1] };
        let right = if i + 1 == n { u[n - 1] } else { u[i + 1] };
        let b = c.drift[i];
        let transport = if b > 0.0 { b * (right - u[i]) / dx } else { b * (u[i] - left) / dx };
        let diffusion = 0.5 * c.diffusion[i] * ((right - u[i]) - (u[i] - left)) / (dx * dx);
        transport + diffusion + jump
    }

    fn node_value(&self, u: &[f64], i: usize, jumps: &mut [f64]) -> (f64, usize) {
        for (g, j) in self.groups.iter().zip(jumps.iter_mut()) {
            *j = g.apply(u, i);
        }
        let mut best = f64::NEG_INFINITY;
        let mut arg = 0;
        for (k, c) in self.controls.iter().enumerate() {
            let v = self.control_value(c, u, i, jumps[c.group]);
            if v.is_nan() {
                return (v, k);
            }
            // first maximiser wins ties
            if v > best {
                best = v;
                arg = k;
            }
        }
        (best, arg)
    }

    /// `out[i] = G_h(x_i, u)`.
    pub fn apply(&self, u: &[f64], out: &mut [f64]) {
        assert_eq!(u.len(), self.grid.len());
        assert_eq!(out.len(), u.len());
        let ng = self.groups.len();
        out.par_iter_mut().enumerate().for_each_init(
            || vec![0.0; ng],
            |jumps, (i, o)| *o = self.node_value(u, i, jumps).0,
        );
    }

    /// `G_h` together with the first maximising control at every node.
    pub fn apply_with_argmax(&self, u: &[f64]) -> (Vec<f64>, Vec<ControlId>) {
        assert_eq!(u.len(), self.grid.len());
        let ng = self.groups.len();
        let pairs: Vec<(f64, usize)> = (0..u.len())
            .into_par_iter()
            .map_init(|| vec![0.0; ng], |jumps, i| self.node_value(u, i, jumps))
            .collect();
        pairs.into_iter().map(|(v, k)| (v, ControlId(k))).unzip()
    }

    /// `G_h` under one fixed control.
    pub fn apply_control(&self, id: ControlId, u: &[f64], out: &mut [f64]) {
        let c = &self.controls[id.0];
        let g = &self.groups[c.group];
        for (i, o) in out.iter_mut().enumerate() {
            *o = self.control_value(c, u, i, g.apply(u, i));
        }
    }
}

fn same_bits(a: &[f64], b: &[f64]) -> bool {
    a.len() == b.len() && a.iter().zip(b).all(|(x, y)| x.to_bits() == y.to_bits())
}

fn build_group(grid: &SpatialGrid, offsets: &[f64], weights: &[f64]) -> JumpGroup {
    let nx = grid.len();
    let nq = weights.len();
    let dx = grid.spacing();
    let x_min = grid.x_min();
    let mut row_offsets = Vec::with_capacity(nx + 1);
    let mut entries = Vec::with_capacity(offsets.len());
    row_offsets.push(0);
    for i in 0..nx {
        let xi = grid.node(i);
        for j in 0..nq {
            let k = offsets[i * nq + j];
            if k == 0.0 || weights[j] == 0.0 {
                continue;
            }
            let p = (xi + k - x_min) / dx;
            // constant extension outside the domain
            let (lo, theta) = if p <= 0.0 {
                (0, 0.0)
            } else if p >= (nx - 1) as f64 {
                (nx - 1, 0.0)
            } else {
                let lo = (p.floor() as usize).min(nx - 2);
                (lo, p - lo as f64)
            };
            if lo == i && theta == 0.0 {
                continue;
            }
            entries.push(JumpEntry { lo: lo as u32, theta, weight: weights[j] });
        }
        row_offsets.push(entries.len());
    }
    JumpGroup { offsets: row_offsets, entries }
}

fn non_finite(quantity: &'static str, field: &CoefficientField, id: ControlId, x: f64, z: Option<f64>) -> Error {
    Error::NonFinite {
        quantity,
        control: field.control(id).to_vec(),
        state: vec![x],
        mark: z,
    }
}
