//! Uniform Cartesian grids in one and two dimensions, boundary policies and
//! nodal fields.
//!
//! The PDE lives on all of `R^N`; a grid truncates it to a box. What happens
//! at the cut is the boundary policy's business: periodic wrap, continuation
//! by the initial cone plus a constant offset, exact Dirichlet data from a
//! closed form, or linear extrapolation. Stencils see the boundary only
//! through a single layer of ghost values.

use std::fmt;
use std::sync::Arc;

use crate::cone::ConeSpec;
use crate::error::{Error, Result};

/// Closed-form reference solution `u(x, t)` used for exact Dirichlet data.
#[derive(Clone)]
pub struct ExactSolution(Arc<dyn Fn(&[f64], f64) -> f64 + Send + Sync>);

impl ExactSolution {
    pub fn new(f: impl Fn(&[f64], f64) -> f64 + Send + Sync + 'static) -> Self {
        ExactSolution(Arc::new(f))
    }

    /// The translating profile `t - log cos x` of the isotropic 1-D flow.
    pub fn grim_reaper() -> Self {
        ExactSolution::new(|x, t| t - x[0].cos().ln())
    }

    pub fn evaluate(&self, x: &[f64], t: f64) -> f64 {
        (self.0)(x, t)
    }
}

impl fmt::Debug for ExactSolution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ExactSolution")
    }
}

#[derive(Clone, Debug)]
pub enum BoundaryPolicy {
    /// Wrap around; the period per axis is `count * h`.
    Periodic,
    /// Ghost value = cone(x_ghost) + (u(edge) - cone(edge)): the far field is
    /// the initial cone up to a constant offset, which tolerates transient
    /// boundary layers.
    ConeExtension(ConeSpec),
    /// Ghost value = reference solution evaluated at the ghost node.
    DirichletExact(ExactSolution),
    /// Linear continuation of the last two nodes along each outward axis.
    LinearExtrapolation,
}

/// Uniform grid: `dim` axes, spacing `h` on all of them, `counts[a]` nodes on
/// axis `a`, node `i` at `origin[a] + i * h`. For `dim == 1` the second axis
/// is inert (`counts[1] == 1`).
#[derive(Clone, Debug)]
pub struct GraphGrid {
    pub dim: usize,
    pub h: f64,
    pub counts: [usize; 2],
    pub origin: [f64; 2],
    pub policy: BoundaryPolicy,
}

impl GraphGrid {
    pub fn new(
        dim: usize,
        h: f64,
        counts: [usize; 2],
        origin: [f64; 2],
        policy: BoundaryPolicy,
    ) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Config(format!("grid dimension must be 1 or 2, got {dim}")));
        }
        if !(h > 0.0) || !h.is_finite() {
            return Err(Error::Config(format!("grid spacing must be positive, got {h}")));
        }
        for a in 0..dim {
            if counts[a] < 8 {
                return Err(Error::Config(format!(
                    "axis {a} has {} nodes, need at least 8",
                    counts[a]
                )));
            }
        }
        if dim == 1 && counts[1] != 1 {
            return Err(Error::Config("1-D grid must have counts[1] == 1".into()));
        }
        Ok(GraphGrid { dim, h, counts, origin, policy })
    }

    /// Symmetric box `[-half_width, half_width]^dim` with a node at the
    /// origin. The realized half width is `h * round(half_width / h)`.
    pub fn symmetric(dim: usize, h: f64, half_width: f64, policy: BoundaryPolicy) -> Result<Self> {
        let m = (half_width / h).round() as usize;
        let count = 2 * m + 1;
        let orig = -(m as f64) * h;
        let counts = if dim == 1 { [count, 1] } else { [count, count] };
        let origin = if dim == 1 { [orig, 0.0] } else { [orig, orig] };
        GraphGrid::new(dim, h, counts, origin, policy)
    }

    /// 1-D periodic grid of `n` nodes covering `[-period/2, period/2)`;
    /// the spacing is `period / n` so that `period == n * h` exactly.
    pub fn periodic_1d(period: f64, n: usize) -> Result<Self> {
        if !(period > 0.0) {
            return Err(Error::Config(format!("period must be positive, got {period}")));
        }
        let h = period / n as f64;
        GraphGrid::new(1, h, [n, 1], [-period / 2.0, 0.0], BoundaryPolicy::Periodic)
    }

    pub fn len(&self) -> usize {
        self.counts[0] * self.counts[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Period along axis `a` (meaningful for the periodic policy).
    pub fn period(&self, a: usize) -> f64 {
        self.counts[a] as f64 * self.h
    }

    pub fn axis_coord(&self, a: usize, i: usize) -> f64 {
        self.origin[a] + i as f64 * self.h
    }

    pub fn node_coord(&self, idx: usize) -> [f64; 2] {
        let nx = self.counts[0];
        let ix = idx % nx;
        let iy = idx / nx;
        [self.axis_coord(0, ix), if self.dim == 2 { self.axis_coord(1, iy) } else { 0.0 }]
    }

    pub fn index(&self, ix: usize, iy: usize) -> usize {
        iy * self.counts[0] + ix
    }

    /// True if the two grids describe the same node set (policy ignored).
    pub fn same_geometry(&self, other: &GraphGrid) -> bool {
        self.dim == other.dim
            && self.h == other.h
            && self.counts == other.counts
            && self.origin[..self.dim] == other.origin[..self.dim]
    }
}

/// Nodal values of the graph height `u` at a fixed time, row major with the
/// x index fastest.
#[derive(Clone, Debug)]
pub struct GraphField {
    pub grid: GraphGrid,
    pub values: Vec<f64>,
    pub time: f64,
}

impl GraphField {
    pub fn from_fn(grid: GraphGrid, time: f64, f: impl Fn(&[f64]) -> f64) -> Self {
        let values = (0..grid.len())
            .map(|idx| {
                let q = grid.node_coord(idx);
                f(&q[..grid.dim])
            })
            .collect();
        GraphField { grid, values, time }
    }

    pub fn zeros(grid: GraphGrid) -> Self {
        let n = grid.len();
        GraphField { grid, values: vec![0.0; n], time: 0.0 }
    }

    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Value at the node closest to the physical origin of the grid box.
    pub fn center_value(&self) -> f64 {
        let nx = self.counts_x();
        let ix = nx / 2;
        let iy = if self.grid.dim == 2 { self.grid.counts[1] / 2 } else { 0 };
        self.values[self.grid.index(ix, iy)]
    }

    fn counts_x(&self) -> usize {
        self.grid.counts[0]
    }

    /// Discrete Lipschitz constant: maximum forward-difference quotient over
    /// the real-node faces of every axis (the wrap face included on periodic
    /// grids).
    pub fn lipschitz(&self) -> f64 {
        let g = &self.grid;
        let (nx, ny) = (g.counts[0], g.counts[1]);
        let periodic = matches!(g.policy, BoundaryPolicy::Periodic);
        let mut lip = 0.0f64;
        for iy in 0..ny {
            for ix in 0..nx {
                let v = self.values[g.index(ix, iy)];
                let ix1 = if ix + 1 < nx {
                    Some(ix + 1)
                } else if periodic {
                    Some(0)
                } else {
                    None
                };
                if let Some(ix1) = ix1 {
                    lip = lip.max((self.values[g.index(ix1, iy)] - v).abs() / g.h);
                }
                if g.dim == 2 {
                    let iy1 = if iy + 1 < ny {
                        Some(iy + 1)
                    } else if periodic {
                        Some(0)
                    } else {
                        None
                    };
                    if let Some(iy1) = iy1 {
                        lip = lip.max((self.values[g.index(ix, iy1)] - v).abs() / g.h);
                    }
                }
            }
        }
        lip
    }

    /// Multilinear interpolation at `x`. Errors if `x` leaves the node hull
    /// (beyond a relative 1e-12 snap).
    pub fn sample(&self, x: &[f64]) -> Result<f64> {
        let g = &self.grid;
        let mut local = [0.0f64; 2];
        for a in 0..g.dim {
            let lo = g.origin[a];
            let hi = g.axis_coord(a, g.counts[a] - 1);
            let eps = 1e-12 * (hi - lo).abs().max(1.0);
            if x[a] < lo - eps || x[a] > hi + eps {
                return Err(Error::Domain(format!(
                    "sample point {:?} outside grid hull on axis {a} ([{lo}, {hi}])",
                    &x[..g.dim]
                )));
            }
            local[a] = (x[a].clamp(lo, hi) - lo) / g.h;
        }
        Ok(self.interp_local(local))
    }

    /// Interpolation that continues beyond the box according to the boundary
    /// policy: periodic wrap, cone plus constant offset, the exact Dirichlet
    /// closed form, or linear extrapolation of the hull cell.
    pub fn sample_extended(&self, x: &[f64]) -> f64 {
        let g = &self.grid;
        let mut inside = true;
        for a in 0..g.dim {
            let lo = g.origin[a];
            let hi = g.axis_coord(a, g.counts[a] - 1);
            if x[a] < lo || x[a] > hi {
                inside = false;
            }
        }
        if inside {
            let mut local = [0.0f64; 2];
            for a in 0..g.dim {
                local[a] = (x[a] - g.origin[a]) / g.h;
            }
            return self.interp_local(local);
        }
        match &g.policy {
            BoundaryPolicy::Periodic => {
                let mut local = [0.0f64; 2];
                for a in 0..g.dim {
                    let p = g.period(a);
                    let mut c = (x[a] - g.origin[a]) % p;
                    if c < 0.0 {
                        c += p;
                    }
                    local[a] = c / g.h;
                }
                self.interp_local_wrapped(local)
            }
            BoundaryPolicy::ConeExtension(cone) => {
                let mut clamped = [0.0f64; 2];
                for a in 0..g.dim {
                    let lo = g.origin[a];
                    let hi = g.axis_coord(a, g.counts[a] - 1);
                    clamped[a] = x[a].clamp(lo, hi);
                }
                let edge = self
                    .sample(&clamped[..g.dim])
                    .expect("clamped point is inside the hull");
                cone.evaluate(&x[..g.dim]) + (edge - cone.evaluate(&clamped[..g.dim]))
            }
            BoundaryPolicy::DirichletExact(f) => f.evaluate(&x[..g.dim], self.time),
            BoundaryPolicy::LinearExtrapolation => {
                let mut local = [0.0f64; 2];
                for a in 0..g.dim {
                    local[a] = (x[a] - g.origin[a]) / g.h;
                }
                self.interp_local(local)
            }
        }
    }

    /// Multilinear form on the cell containing `local` (cell index clamped,
    /// local coordinates not, so out-of-hull points extrapolate linearly).
    fn interp_local(&self, local: [f64; 2]) -> f64 {
        let g = &self.grid;
        let mut i0 = [0usize; 2];
        let mut w = [0.0f64; 2];
        for a in 0..g.dim {
            let cells = g.counts[a] - 1;
            let cell = (local[a].floor() as isize).clamp(0, cells.max(1) as isize - 1) as usize;
            i0[a] = cell;
            w[a] = local[a] - cell as f64;
        }
        if g.dim == 1 {
            let v0 = self.values[i0[0]];
            let v1 = self.values[i0[0] + 1];
            v0 + w[0] * (v1 - v0)
        } else {
            let v00 = self.values[g.index(i0[0], i0[1])];
            let v10 = self.values[g.index(i0[0] + 1, i0[1])];
            let v01 = self.values[g.index(i0[0], i0[1] + 1)];
            let v11 = self.values[g.index(i0[0] + 1, i0[1] + 1)];
            let a0 = v00 + w[0] * (v10 - v00);
            let a1 = v01 + w[0] * (v11 - v01);
            a0 + w[1] * (a1 - a0)
        }
    }

    fn interp_local_wrapped(&self, local: [f64; 2]) -> f64 {
        let g = &self.grid;
        let mut i0 = [0usize; 2];
        let mut i1 = [0usize; 2];
        let mut w = [0.0f64; 2];
        for a in 0..g.dim {
            let n = g.counts[a];
            let cell = local[a].floor() as usize % n;
            i0[a] = cell;
            i1[a] = (cell + 1) % n;
            w[a] = local[a] - local[a].floor();
        }
        if g.dim == 1 {
            let v0 = self.values[i0[0]];
            let v1 = self.values[i1[0]];
            v0 + w[0] * (v1 - v0)
        } else {
            let v00 = self.values[g.index(i0[0], i0[1])];
            let v10 = self.values[g.index(i1[0], i0[1])];
            let v01 = self.values[g.index(i0[0], i1[1])];
            let v11 = self.values[g.index(i1[0], i1[1])];
            let a0 = v00 + w[0] * (v10 - v00);
            let a1 = v01 + w[0] * (v11 - v01);
            a0 + w[1] * (a1 - a0)
        }
    }
}

/// Field values extended by one ghost layer per active axis.
pub struct Ghosted {
    data: Vec<f64>,
    nx_pad: usize,
    off_y: usize,
}

impl Ghosted {
    #[inline]
    pub fn get(&self, ix: isize, iy: isize) -> f64 {
        let col = (ix + 1) as usize;
        let row = (iy + self.off_y as isize) as usize;
        self.data[row * self.nx_pad + col]
    }
}

/// Builds the ghost-augmented value array for `u` under its grid's boundary
/// policy.
pub fn apply_boundary(u: &GraphField) -> Ghosted {
    let g = &u.grid;
    let (nx, ny) = (g.counts[0], g.counts[1]);
    let nx_pad = nx + 2;
    let (ny_pad, off_y) = if g.dim == 2 { (ny + 2, 1usize) } else { (1, 0) };
    let mut data = vec![0.0f64; nx_pad * ny_pad];

    for iy in 0..ny {
        let src = iy * nx;
        let dst = (iy + off_y) * nx_pad + 1;
        data[dst..dst + nx].copy_from_slice(&u.values[src..src + nx]);
    }

    let y_range = if g.dim == 2 { -1..=(ny as isize) } else { 0..=0 };
    for iy in y_range {
        for ix in -1..=(nx as isize) {
            let interior_x = ix >= 0 && ix < nx as isize;
            let interior_y = g.dim == 1 || (iy >= 0 && iy < ny as isize);
            if interior_x && interior_y {
                continue;
            }
            let v = ghost_value(u, ix, iy);
            let col = (ix + 1) as usize;
            let row = (iy + off_y as isize) as usize;
            data[row * nx_pad + col] = v;
        }
    }

    Ghosted { data, nx_pad, off_y }
}

fn ghost_value(u: &GraphField, ix: isize, iy: isize) -> f64 {
    let g = &u.grid;
    let (nx, ny) = (g.counts[0] as isize, g.counts[1] as isize);
    match &g.policy {
        BoundaryPolicy::Periodic => {
            let wx = ix.rem_euclid(nx) as usize;
            let wy = if g.dim == 2 { iy.rem_euclid(ny) as usize } else { 0 };
            u.values[g.index(wx, wy)]
        }
        BoundaryPolicy::ConeExtension(cone) => {
            let cx = ix.clamp(0, nx - 1) as usize;
            let cy = iy.clamp(0, ny - 1) as usize;
            let q = ghost_coord(g, ix, iy);
            let e = ghost_coord(g, cx as isize, cy as isize);
            cone.evaluate(&q[..g.dim]) + u.values[g.index(cx, cy)]
                - cone.evaluate(&e[..g.dim])
        }
        BoundaryPolicy::DirichletExact(f) => {
            let q = ghost_coord(g, ix, iy);
            f.evaluate(&q[..g.dim], u.time)
        }
        BoundaryPolicy::LinearExtrapolation => {
            // continue the last two nodes along each outward axis
            let cx = ix.clamp(0, nx - 1);
            let cy = iy.clamp(0, ny - 1);
            let mut v = u.values[g.index(cx as usize, cy as usize)];
            if ix != cx {
                let step = if ix < 0 { 1 } else { -1 };
                let inner = u.values[g.index((cx + step) as usize, cy as usize)];
                v += (v - inner) * (ix - cx).abs() as f64;
            }
            if g.dim == 2 && iy != cy {
                let step = if iy < 0 { 1 } else { -1 };
                let inner = u.values[g.index(cx as usize, (cy + step) as usize)];
                v += (u.values[g.index(cx as usize, cy as usize)] - inner)
                    * (iy - cy).abs() as f64;
            }
            v
        }
    }
}

fn ghost_coord(g: &GraphGrid, ix: isize, iy: isize) -> [f64; 2] {
    [
        g.origin[0] + ix as f64 * g.h,
        if g.dim == 2 { g.origin[1] + iy as f64 * g.h } else { 0.0 },
    ]
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn periodic_ghost_wraps() {
        let grid = GraphGrid::periodic_1d(8.0, 8).unwrap();
        let u = GraphField::from_fn(grid, 0.0, |x| x[0]);
        let gh = apply_boundary(&u);
        // ghost left of node 0 is node 7
        assert_eq!(gh.get(-1, 0), u.values[7]);
        assert_eq!(gh.get(8, 0), u.values[0]);
    }

    #[test]
    fn cone_extension_offsets() {
        // edge x = 1.0 carrying u = 1.3 over the cone |x|: ghost at 1.1 is
        // 1.1 + 0.3
        let cone = ConeSpec::abs_cone(1, 1.0);
        let grid = GraphGrid::new(
            1,
            0.1,
            [11, 1],
            [0.0, 0.0],
            BoundaryPolicy::ConeExtension(cone.clone()),
        )
        .unwrap();
        let mut u = GraphField::from_fn(grid, 0.0, |x| cone.evaluate(x));
        *u.values.last_mut().unwrap() = 1.3;
        let gh = apply_boundary(&u);
        assert!((gh.get(11, 0) - 1.4).abs() < 1e-14);
    }

    #[test]
    fn dirichlet_ghost_is_closed_form() {
        let grid = GraphGrid::new(
            1,
            0.05,
            [49, 1],
            [-1.2, 0.0],
            BoundaryPolicy::DirichletExact(ExactSolution::grim_reaper()),
        )
        .unwrap();
        let u = GraphField::from_fn(grid, 0.5, |x| 0.5 - x[0].cos().ln());
        let gh = apply_boundary(&u);
        let expect = 0.5 - (1.25f64).cos().ln();
        assert!((gh.get(49, 0) - expect).abs() < 1e-14);
    }

    #[test]
    fn linear_extrapolation_continues() {
        let grid =
            GraphGrid::new(1, 0.1, [9, 1], [0.0, 0.0], BoundaryPolicy::LinearExtrapolation)
                .unwrap();
        let u = GraphField::from_fn(grid, 0.0, |x| 3.0 * x[0] + 1.0);
        let gh = apply_boundary(&u);
        assert!((gh.get(-1, 0) - (3.0 * -0.1 + 1.0)).abs() < 1e-12);
        assert!((gh.get(9, 0) - (3.0 * 0.9 + 1.0)).abs() < 1e-12);
    }

    #[test]
    fn sample_interpolates_and_errors_outside() {
        let grid = GraphGrid::symmetric(2, 0.25, 1.0, BoundaryPolicy::LinearExtrapolation)
            .unwrap();
        let u = GraphField::from_fn(grid, 0.0, |x| 2.0 * x[0] - x[1] + 0.5);
        // multilinear is exact on affine data
        assert!((u.sample(&[0.13, -0.41]).unwrap() - (2.0 * 0.13 + 0.41 + 0.5)).abs() < 1e-13);
        assert!(u.sample(&[1.5, 0.0]).is_err());
    }

    #[test]
    fn extended_sampling_follows_cone() {
        let cone = ConeSpec::abs_cone(1, 2.0);
        let grid = GraphGrid::symmetric(
            1,
            0.1,
            1.0,
            BoundaryPolicy::ConeExtension(cone.clone()),
        )
        .unwrap();
        let u = GraphField::from_fn(grid.clone(), 0.0, |x| cone.evaluate(x) + 0.25);
        let far = u.sample_extended(&[37.0]);
        assert!((far - (74.0 + 0.25)).abs() < 1e-10);
    }
}
