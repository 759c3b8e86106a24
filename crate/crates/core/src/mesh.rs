//! Uniform square grids, nodal fields, difference stencils and radial cutoffs.
//!
//! Nodes are stored row by row: node `(i, j)` has index `j * n + i` and
//! coordinates `(-L + i h, -L + j h)`.

use alloc::vec;
use alloc::vec::Vec;

use serde::Serialize;

use crate::error::{invalid, Result};
use crate::math::hypot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    n: usize,
    half_width: f64,
    h: f64,
}

impl Grid {
    /// `n` nodes per side (odd, at least 9) on `[-L, L]²`.
    pub fn new(n: usize, half_width: f64) -> Result<Self> {
        if n < 9 || n % 2 == 0 {
            return Err(invalid(alloc::format!(
                "nodes per side must be odd and at least 9, got {n}"
            )));
        }
        if !(half_width > 0.0 && half_width.is_finite()) {
            return Err(invalid(alloc::format!(
                "half-width must be positive, got {half_width}"
            )));
        }
        Ok(Grid {
            n,
            half_width,
            h: 2.0 * half_width / (n - 1) as f64,
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn half_width(&self) -> f64 {
        self.half_width
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn dim(&self) -> usize {
        2
    }

    pub fn node_count(&self) -> usize {
        self.n * self.n
    }

    pub fn area(&self) -> f64 {
        4.0 * self.half_width * self.half_width
    }

    #[inline]
    pub fn index(&self, i: usize, j: usize) -> usize {
        j * self.n + i
    }

    #[inline]
    pub fn ij(&self, k: usize) -> (usize, usize) {
        (k % self.n, k / self.n)
    }

    #[inline]
    pub fn coord(&self, i: usize, j: usize) -> [f64; 2] {
        [
            -self.half_width + i as f64 * self.h,
            -self.half_width + j as f64 * self.h,
        ]
    }

    #[inline]
    pub fn coord_of(&self, k: usize) -> [f64; 2] {
        let (i, j) = self.ij(k);
        self.coord(i, j)
    }

    #[inline]
    pub fn is_boundary(&self, i: usize, j: usize) -> bool {
        i == 0 || j == 0 || i == self.n - 1 || j == self.n - 1
    }

    /// Distance in nodes to the nearest boundary node.
    #[inline]
    pub fn depth(&self, i: usize, j: usize) -> usize {
        i.min(j).min(self.n - 1 - i).min(self.n - 1 - j)
    }

    /// Boundary node indices in increasing order.
    pub fn boundary_indices(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&k| {
                let (i, j) = self.ij(k);
                self.is_boundary(i, j)
            })
            .collect()
    }

    pub fn interior_indices(&self) -> Vec<usize> {
        (0..self.node_count())
            .filter(|&k| {
                let (i, j) = self.ij(k);
                !self.is_boundary(i, j)
            })
            .collect()
    }
}

/// Nodal values on a grid. The boundary nodes carry the Dirichlet trace.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscreteField {
    grid: Grid,
    values: Vec<f64>,
}

impl DiscreteField {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.node_count() {
            return Err(invalid(alloc::format!(
                "expected {} nodal values, got {}",
                grid.node_count(),
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite()) {
            return Err(invalid("field has non-finite nodal values"));
        }
        Ok(DiscreteField { grid, values })
    }

    pub fn zeros(grid: Grid) -> Self {
        DiscreteField {
            grid,
            values: vec![0.0; grid.node_count()],
        }
    }

    pub fn from_fn(grid: Grid, mut f: impl FnMut([f64; 2]) -> f64) -> Result<Self> {
        let values = (0..grid.node_count()).map(|k| f(grid.coord_of(k))).collect();
        Self::new(grid, values)
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn values_mut(&mut self) -> &mut [f64] {
        &mut self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    #[inline]
    pub fn at(&self, i: usize, j: usize) -> f64 {
        self.values[self.grid.index(i, j)]
    }

    /// Values at [`Grid::boundary_indices`], in that order.
    pub fn boundary_trace(&self) -> Vec<f64> {
        self.grid
            .boundary_indices()
            .into_iter()
            .map(|k| self.values[k])
            .collect()
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn max_abs_boundary(&self) -> f64 {
        self.grid
            .boundary_indices()
            .into_iter()
            .fold(0.0, |m, k| m.max(self.values[k].abs()))
    }

    pub fn max_abs_interior(&self) -> f64 {
        self.grid
            .interior_indices()
            .into_iter()
            .fold(0.0, |m, k| m.max(self.values[k].abs()))
    }

    pub fn max_difference(&self, other: &DiscreteField) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .fold(0.0, |m, (a, b)| m.max((a - b).abs()))
    }
}

/// Symmetric 2×2 matrix.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct Sym2 {
    pub xx: f64,
    pub xy: f64,
    pub yy: f64,
}

impl Sym2 {
    pub const ZERO: Sym2 = Sym2 {
        xx: 0.0,
        xy: 0.0,
        yy: 0.0,
    };

    /// Squared Frobenius norm.
    pub fn norm_sq(&self) -> f64 {
        self.xx * self.xx + 2.0 * self.xy * self.xy + self.yy * self.yy
    }
}

/// Per-node gradient: central differences inside, second-order one-sided
/// differences on the boundary.
pub fn discrete_gradient(field: &DiscreteField) -> Vec<[f64; 2]> {
    let g = field.grid();
    let n = g.n();
    let inv2h = 0.5 / g.h();
    // derivative along a line of nodes, `v(t)` giving the value at position t
    let diff = |idx: usize, v: &dyn Fn(usize) -> f64| -> f64 {
        if idx == 0 {
            (-3.0 * v(0) + 4.0 * v(1) - v(2)) * inv2h
        } else if idx == n - 1 {
            (3.0 * v(n - 1) - 4.0 * v(n - 2) + v(n - 3)) * inv2h
        } else {
            (v(idx + 1) - v(idx - 1)) * inv2h
        }
    };
    (0..g.node_count())
        .map(|k| {
            let (i, j) = g.ij(k);
            [
                diff(i, &|t| field.at(t, j)),
                diff(j, &|t| field.at(i, t)),
            ]
        })
        .collect()
}

/// Flush threshold for second differences, relative to the field's scale.
const ROUNDOFF_FLOOR: f64 = 64.0 * f64::EPSILON;

/// Per-node Hessian from centred second differences and cross differences.
/// Boundary nodes have no value. Second differences below the roundoff floor
/// `64 ε max|u|` are flushed to zero, so fields that are affine up to
/// rounding have exactly zero Hessian.
pub fn discrete_hessian(field: &DiscreteField) -> Vec<Option<Sym2>> {
    let g = field.grid();
    let n = g.n();
    let h2 = g.h() * g.h();
    let floor = ROUNDOFF_FLOOR * field.max_abs();
    let flush = |d: f64| if d.abs() <= floor { 0.0 } else { d };
    (0..g.node_count())
        .map(|k| {
            let (i, j) = g.ij(k);
            if i == 0 || j == 0 || i == n - 1 || j == n - 1 {
                return None;
            }
            let u = |a: usize, b: usize| field.at(a, b);
            let c = u(i, j);
            let xx = flush(u(i + 1, j) - 2.0 * c + u(i - 1, j)) / h2;
            let yy = flush(u(i, j + 1) - 2.0 * c + u(i, j - 1)) / h2;
            let xy = flush(u(i + 1, j + 1) - u(i + 1, j - 1) - u(i - 1, j + 1) + u(i - 1, j - 1))
                / (4.0 * h2);
            Some(Sym2 { xx, xy, yy })
        })
        .collect()
}

/// Forward differences `(D⁺ₓu, D⁺ᵧu)`; the component is zero where the
/// forward neighbour does not exist.
pub fn forward_differences(field: &DiscreteField) -> Vec<[f64; 2]> {
    let g = field.grid();
    let n = g.n();
    let inv = 1.0 / g.h();
    (0..g.node_count())
        .map(|k| {
            let (i, j) = g.ij(k);
            let dx = if i + 1 < n {
                (field.at(i + 1, j) - field.at(i, j)) * inv
            } else {
                0.0
            };
            let dy = if j + 1 < n {
                (field.at(i, j + 1) - field.at(i, j)) * inv
            } else {
                0.0
            };
            [dx, dy]
        })
        .collect()
}

/// Backward-difference divergence `D⁻ₓvₓ + D⁻ᵧvᵧ`, the negative adjoint of
/// [`forward_differences`] for fields vanishing near the boundary.
pub fn backward_divergence(grid: &Grid, v: &[[f64; 2]]) -> Vec<f64> {
    let inv = 1.0 / grid.h();
    (0..grid.node_count())
        .map(|k| {
            let (i, j) = grid.ij(k);
            let left = if i > 0 { v[grid.index(i - 1, j)][0] } else { 0.0 };
            let down = if j > 0 { v[grid.index(i, j - 1)][1] } else { 0.0 };
            (v[k][0] - left) * inv + (v[k][1] - down) * inv
        })
        .collect()
}

/// Nodal Riemann sum `h² Σ values`.
pub fn nodal_integral(grid: &Grid, values: impl IntoIterator<Item = f64>) -> f64 {
    grid.h() * grid.h() * values.into_iter().sum::<f64>()
}

/// Quintic smoothstep `6t⁵ - 15t⁴ + 10t³` clamped to `[0, 1]`.
pub fn smoothstep(t: f64) -> f64 {
    let t = t.clamp(0.0, 1.0);
    t * t * t * (t * (6.0 * t - 15.0) + 10.0)
}

/// Derivative of [`smoothstep`]; its maximum is `15/8` at `t = 1/2`.
pub fn smoothstep_slope(t: f64) -> f64 {
    if t <= 0.0 || t >= 1.0 {
        return 0.0;
    }
    30.0 * t * t * (t - 1.0) * (t - 1.0)
}

/// Maximum of `|∇η| (R - r)` for the smoothstep profile.
pub const CUTOFF_SLOPE_CONSTANT: f64 = 15.0 / 8.0;

/// Radial cutoff `η(x) = ζ((R - |x|)/(R - r))`: one on the disc of radius
/// `r`, zero outside radius `R`.
#[derive(Debug, Clone, PartialEq)]
pub struct CutoffField {
    grid: Grid,
    inner: f64,
    outer: f64,
    values: Vec<f64>,
    gradients: Vec<[f64; 2]>,
}

impl CutoffField {
    pub fn new(grid: &Grid, inner: f64, outer: f64) -> Result<Self> {
        if !(inner > 0.0 && inner < outer) {
            return Err(invalid(alloc::format!(
                "cutoff radii need 0 < r < R, got r = {inner}, R = {outer}"
            )));
        }
        if outer > grid.half_width() {
            return Err(invalid(alloc::format!(
                "cutoff outer radius {outer} exceeds the half-width {}",
                grid.half_width()
            )));
        }
        let width = outer - inner;
        let mut values = Vec::with_capacity(grid.node_count());
        let mut gradients = Vec::with_capacity(grid.node_count());
        for k in 0..grid.node_count() {
            let x = grid.coord_of(k);
            let rho = hypot(x[0], x[1]);
            let t = (outer - rho) / width;
            values.push(smoothstep(t));
            let slope = smoothstep_slope(t);
            if slope == 0.0 || rho == 0.0 {
                gradients.push([0.0, 0.0]);
            } else {
                let s = -slope / (width * rho);
                gradients.push([s * x[0], s * x[1]]);
            }
        }
        Ok(CutoffField {
            grid: *grid,
            inner,
            outer,
            values,
            gradients,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn inner(&self) -> f64 {
        self.inner
    }

    pub fn outer(&self) -> f64 {
        self.outer
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn gradients(&self) -> &[[f64; 2]] {
        &self.gradients
    }

    /// Smallest node depth (in grid steps) at which `η` is nonzero.
    pub fn min_support_depth(&self) -> usize {
        (0..self.grid.node_count())
            .filter(|&k| self.values[k] != 0.0 || self.gradients[k] != [0.0, 0.0])
            .map(|k| {
                let (i, j) = self.grid.ij(k);
                self.grid.depth(i, j)
            })
            .min()
            .unwrap_or(usize::MAX)
    }
}
