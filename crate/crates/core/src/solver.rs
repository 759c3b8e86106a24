//! Damped Newton descent for the discrete regularized energy
//!
//! ```text
//! E_h(v) = Σ_cells Σ_gauss (h²/4) f_σ(∇v(x_g))
//! ```
//!
//! where `v` is the bilinear interpolant of the nodal values and the gradient
//! is sampled at the 2×2 Gauss points of each cell. The map from nodal values
//! to Gauss-point gradients is linear, so `E_h` is convex whenever `f_σ` is,
//! and strictly convex in the interior unknowns when `σ > 0`.

use alloc::boxed::Box;
use alloc::vec;
use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::Serialize;

use crate::banded::{BandCholesky, BandMatrix};
use crate::error::{invalid, Error, Result};
use crate::integrand::Integrand;
use crate::math::sqrt;
use crate::mesh::{DiscreteField, Grid};

const GAUSS_LO: f64 = 0.5 - 0.288_675_134_594_812_9;
const GAUSS_HI: f64 = 0.5 + 0.288_675_134_594_812_9;
const GAUSS: [[f64; 2]; 4] = [
    [GAUSS_LO, GAUSS_LO],
    [GAUSS_HI, GAUSS_LO],
    [GAUSS_LO, GAUSS_HI],
    [GAUSS_HI, GAUSS_HI],
];

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum InitialGuess {
    /// Least-squares affine fit of the boundary trace.
    AffineFit,
    ZeroInterior,
    /// Interior values of a previous solution on the same grid.
    Warm(Vec<f64>),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SolveConfig {
    /// Residual tolerance per grid node; the stopping tolerance on the
    /// Euclidean norm of `∇E_h` is this times the node count.
    pub tol_per_node: f64,
    pub max_iterations: usize,
    /// Armijo sufficient-decrease fraction.
    pub armijo_fraction: f64,
    pub backtrack: f64,
    pub min_step: f64,
    pub initial: InitialGuess,
}

impl Default for SolveConfig {
    fn default() -> Self {
        SolveConfig {
            tol_per_node: 1e-10,
            max_iterations: 100,
            armijo_fraction: 1e-4,
            backtrack: 0.5,
            min_step: 1e-12,
            initial: InitialGuess::AffineFit,
        }
    }
}

impl SolveConfig {
    pub fn tolerance(&self, grid: &Grid) -> f64 {
        self.tol_per_node * grid.node_count() as f64
    }

    fn validate(&self) -> Result<()> {
        let positive = [
            self.tol_per_node,
            self.armijo_fraction,
            self.backtrack,
            self.min_step,
        ];
        if positive.iter().any(|v| !(*v > 0.0)) || self.max_iterations == 0 {
            return Err(invalid("solver parameters must be positive"));
        }
        if self.backtrack >= 1.0 || self.armijo_fraction >= 1.0 {
            return Err(invalid("backtrack factor and Armijo fraction must be below 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct Solution {
    pub field: DiscreteField,
    pub energy: f64,
    /// Euclidean norm of the energy gradient in the interior unknowns.
    pub residual: f64,
    pub tolerance: f64,
    pub iterations: usize,
    /// Energy after each accepted step, starting with the initial iterate.
    pub energy_trace: Vec<f64>,
    pub integrand: Integrand,
}

impl Solution {
    pub fn grid(&self) -> &Grid {
        self.field.grid()
    }

    /// Every accepted step kept or lowered the energy.
    pub fn descent_is_monotone(&self) -> bool {
        self.energy_trace.windows(2).all(|w| w[1] <= w[0])
    }
}

/// Gradient of the bilinear interpolant at local coordinates `(s, t)` from the
/// corner values `[v00, v10, v01, v11]`.
#[inline]
fn cell_gradient(v: &[f64; 4], s: f64, t: f64, inv_h: f64) -> [f64; 2] {
    [
        ((v[1] - v[0]) * (1.0 - t) + (v[3] - v[2]) * t) * inv_h,
        ((v[2] - v[0]) * (1.0 - s) + (v[3] - v[1]) * s) * inv_h,
    ]
}

/// Coefficients of the gradient at `(s, t)` with respect to the corner values.
#[inline]
fn cell_gradient_map(s: f64, t: f64, inv_h: f64) -> [[f64; 4]; 2] {
    [
        [-(1.0 - t) * inv_h, (1.0 - t) * inv_h, -t * inv_h, t * inv_h],
        [-(1.0 - s) * inv_h, -s * inv_h, (1.0 - s) * inv_h, s * inv_h],
    ]
}

#[inline]
fn cell_corners(grid: &Grid, ci: usize, cj: usize) -> [usize; 4] {
    [
        grid.index(ci, cj),
        grid.index(ci + 1, cj),
        grid.index(ci, cj + 1),
        grid.index(ci + 1, cj + 1),
    ]
}

/// Neumaier-compensated running sum.
#[derive(Default)]
struct Accumulator {
    sum: f64,
    carry: f64,
}

impl Accumulator {
    #[inline]
    fn add(&mut self, x: f64) {
        let t = self.sum + x;
        if self.sum.abs() >= x.abs() {
            self.carry += (self.sum - t) + x;
        } else {
            self.carry += (x - t) + self.sum;
        }
        self.sum = t;
    }

    fn total(&self) -> f64 {
        self.sum + self.carry
    }
}

/// `Σ_cells Σ_gauss (h²/4) density(∇v(x_g))` for an arbitrary gradient density.
pub fn gradient_functional(values: &[f64], grid: &Grid, density: impl Fn([f64; 2]) -> f64) -> f64 {
    let n = grid.n();
    let inv_h = 1.0 / grid.h();
    let w = 0.25 * grid.h() * grid.h();
    let mut acc = Accumulator::default();
    for cj in 0..n - 1 {
        for ci in 0..n - 1 {
            let c = cell_corners(grid, ci, cj);
            let v = [values[c[0]], values[c[1]], values[c[2]], values[c[3]]];
            for [s, t] in GAUSS {
                acc.add(w * density(cell_gradient(&v, s, t, inv_h)));
            }
        }
    }
    acc.total()
}

/// Discrete energy `E_h` of a field under an integrand.
pub fn energy(field: &DiscreteField, integrand: &Integrand) -> f64 {
    gradient_functional(field.values(), field.grid(), |z| integrand.value2(z))
}

/// Numbering of interior nodes as unknowns: `(i, j) ↦ (j-1) m + (i-1)`.
struct Dofs {
    m: usize,
    map: Vec<Option<usize>>,
}

impl Dofs {
    fn new(grid: &Grid) -> Self {
        let n = grid.n();
        let m = n - 2;
        let map = (0..grid.node_count())
            .map(|k| {
                let (i, j) = grid.ij(k);
                if grid.is_boundary(i, j) {
                    None
                } else {
                    Some((j - 1) * m + (i - 1))
                }
            })
            .collect();
        Dofs { m, map }
    }

    fn count(&self) -> usize {
        self.m * self.m
    }

    fn bandwidth(&self) -> usize {
        self.m + 1
    }
}

/// Energy gradient and Hessian with respect to the interior unknowns.
fn assemble(
    values: &[f64],
    grid: &Grid,
    integrand: &Integrand,
    dofs: &Dofs,
) -> (Vec<f64>, BandMatrix) {
    let n = grid.n();
    let inv_h = 1.0 / grid.h();
    let w = 0.25 * grid.h() * grid.h();
    let mut grad = vec![0.0; dofs.count()];
    let mut hess = BandMatrix::zeros(dofs.count(), dofs.bandwidth());
    let maps = GAUSS.map(|[s, t]| cell_gradient_map(s, t, inv_h));
    for cj in 0..n - 1 {
        for ci in 0..n - 1 {
            let c = cell_corners(grid, ci, cj);
            let v = [values[c[0]], values[c[1]], values[c[2]], values[c[3]]];
            let mut lg = [0.0; 4];
            let mut lh = [[0.0; 4]; 4];
            for (g, b) in GAUSS.iter().zip(&maps) {
                let z = cell_gradient(&v, g[0], g[1], inv_h);
                let (_, df, d2f) = integrand.eval2(z);
                for a in 0..4 {
                    lg[a] += w * (df[0] * b[0][a] + df[1] * b[1][a]);
                    // (D²f B)[:, a]
                    let hb0 = d2f[0][0] * b[0][a] + d2f[0][1] * b[1][a];
                    let hb1 = d2f[1][0] * b[0][a] + d2f[1][1] * b[1][a];
                    for (e, row) in lh.iter_mut().enumerate() {
                        row[a] += w * (b[0][e] * hb0 + b[1][e] * hb1);
                    }
                }
            }
            for a in 0..4 {
                let Some(ra) = dofs.map[c[a]] else { continue };
                grad[ra] += lg[a];
                for e in 0..4 {
                    if let Some(re) = dofs.map[c[e]] {
                        hess.add(ra, re, lh[a][e]);
                    }
                }
            }
        }
    }
    (grad, hess)
}

fn norm2(v: &[f64]) -> f64 {
    sqrt(v.iter().map(|x| x * x).sum())
}

/// Least-squares `(a₀, a₁, a₂)` with `U ≈ a₀ + a₁x₁ + a₂x₂` on the boundary.
pub fn affine_fit(grid: &Grid, trace: &[f64]) -> [f64; 3] {
    let mut ata = [[0.0; 3]; 3];
    let mut atb = [0.0; 3];
    for (k, &u) in grid.boundary_indices().into_iter().zip(trace) {
        let x = grid.coord_of(k);
        let row = [1.0, x[0], x[1]];
        for a in 0..3 {
            atb[a] += row[a] * u;
            for b in 0..3 {
                ata[a][b] += row[a] * row[b];
            }
        }
    }
    solve3(ata, atb)
}

fn solve3(mut a: [[f64; 3]; 3], mut b: [f64; 3]) -> [f64; 3] {
    for col in 0..3 {
        let piv = (col..3)
            .max_by(|&r, &s| a[r][col].abs().total_cmp(&a[s][col].abs()))
            .unwrap_or(col);
        a.swap(col, piv);
        b.swap(col, piv);
        for r in col + 1..3 {
            let f = a[r][col] / a[col][col];
            for c in col..3 {
                a[r][c] -= f * a[col][c];
            }
            b[r] -= f * b[col];
        }
    }
    let mut x = [0.0; 3];
    for r in (0..3).rev() {
        let mut s = b[r];
        for c in r + 1..3 {
            s -= a[r][c] * x[c];
        }
        x[r] = s / a[r][r];
    }
    x
}

/// Builds the starting field: boundary nodes carry `trace`, interior nodes
/// follow `initial`.
pub fn initial_field(grid: &Grid, trace: &[f64], initial: &InitialGuess) -> Result<DiscreteField> {
    let boundary = grid.boundary_indices();
    if trace.len() != boundary.len() {
        return Err(invalid(alloc::format!(
            "boundary trace has {} values, grid has {} boundary nodes",
            trace.len(),
            boundary.len()
        )));
    }
    let mut values = match initial {
        InitialGuess::AffineFit => {
            let [a0, a1, a2] = affine_fit(grid, trace);
            (0..grid.node_count())
                .map(|k| {
                    let x = grid.coord_of(k);
                    a0 + a1 * x[0] + a2 * x[1]
                })
                .collect()
        }
        InitialGuess::ZeroInterior => vec![0.0; grid.node_count()],
        InitialGuess::Warm(v) => {
            if v.len() != grid.node_count() {
                return Err(invalid("warm start has the wrong number of nodes"));
            }
            v.clone()
        }
    };
    for (k, &u) in boundary.into_iter().zip(trace) {
        values[k] = u;
    }
    DiscreteField::new(*grid, values)
}

/// Minimizes `E_h` over fields with the given boundary trace.
///
/// `σ = 0` is accepted only for `p = q = 2`.
pub fn minimize(
    integrand: &Integrand,
    grid: &Grid,
    trace: &[f64],
    cfg: &SolveConfig,
) -> Result<Solution> {
    cfg.validate()?;
    if !(integrand.sigma() > 0.0 || integrand.is_quadratic_growth()) {
        return Err(invalid(
            "unregularized solves are only supported for p = q = 2; regularize first",
        ));
    }
    let mut field = initial_field(grid, trace, &cfg.initial)?;
    let dofs = Dofs::new(grid);
    let interior = grid.interior_indices();
    let tol = cfg.tolerance(grid);

    let mut e = energy(&field, integrand);
    if !e.is_finite() {
        return Err(Error::NumericalBlowup { iteration: 0 });
    }
    let mut trace_e = vec![e];
    let mut candidate = field.values().to_vec();

    for iteration in 0..=cfg.max_iterations {
        let (grad, hess) = assemble(field.values(), grid, integrand, &dofs);
        let residual = norm2(&grad);
        if !residual.is_finite() {
            return Err(Error::NumericalBlowup { iteration });
        }
        if residual <= tol {
            return Ok(Solution {
                field,
                energy: e,
                residual,
                tolerance: tol,
                iterations: iteration,
                energy_trace: trace_e,
                integrand: integrand.clone(),
            });
        }
        if iteration == cfg.max_iterations {
            return Err(Error::NonConvergence {
                iterations: iteration,
                residual,
                best: Box::new(field),
            });
        }
        let chol = match hess.cholesky() {
            Ok(c) => c,
            Err(_) => {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    residual,
                    best: Box::new(field),
                })
            }
        };
        let mut dir: Vec<f64> = grad.iter().map(|g| -g).collect();
        chol.solve(&mut dir);
        let slope: f64 = grad.iter().zip(&dir).map(|(g, d)| g * d).sum();

        let mut step = 1.0;
        let mut accepted = None;
        while step >= cfg.min_step {
            set_interior(&mut candidate, field.values(), &interior, &dofs, &dir, step);
            let et = gradient_functional(&candidate, grid, |z| integrand.value2(z));
            if et.is_finite() && et <= e + cfg.armijo_fraction * step * slope {
                accepted = Some(et);
                break;
            }
            step *= cfg.backtrack;
        }
        if accepted.is_none() {
            // Near the minimizer the predicted decrease falls below the
            // energy's rounding; take the full step if it lowers the residual
            // without raising the energy.
            set_interior(&mut candidate, field.values(), &interior, &dofs, &dir, 1.0);
            let et = gradient_functional(&candidate, grid, |z| integrand.value2(z));
            let (g_new, _) = assemble(&candidate, grid, integrand, &dofs);
            if et.is_finite() && et <= e && norm2(&g_new) < residual {
                accepted = Some(et);
            }
        }
        match accepted {
            Some(et) => {
                field.values_mut().copy_from_slice(&candidate);
                e = et;
                trace_e.push(e);
            }
            None => {
                return Err(Error::NonConvergence {
                    iterations: iteration,
                    residual,
                    best: Box::new(field),
                })
            }
        }
    }
    unreachable!("the loop returns on its last iteration")
}

fn set_interior(
    out: &mut [f64],
    base: &[f64],
    interior: &[usize],
    dofs: &Dofs,
    dir: &[f64],
    step: f64,
) {
    out.copy_from_slice(base);
    for &k in interior {
        let r = dofs.map[k].expect("interior node has an unknown");
        out[k] = base[k] + step * dir[r];
    }
}

/// Outcome of random local perturbations of a solution.
#[derive(Debug, Clone, Serialize)]
pub struct ProbeReport {
    pub trials: usize,
    pub amplitude: f64,
    /// Smallest `E_h(u ± φ) - E_h(u)` seen.
    pub min_difference: f64,
    pub slack: f64,
    pub pass: bool,
}

/// Tests `E_h(u ± φ) ≥ E_h(u) - slack` for `trials` random perturbations `φ`
/// supported on random sub-squares of the interior, with nodal values
/// uniform in `[-amplitude, amplitude]`. `slack = 1e-12 · node count`.
pub fn minimality_probe(
    solution: &Solution,
    trials: usize,
    amplitude: f64,
    seed: u64,
) -> ProbeReport {
    let grid = solution.grid();
    let n = grid.n();
    let base = solution.field.values();
    let e0 = energy(&solution.field, &solution.integrand);
    let slack = 1e-12 * grid.node_count() as f64;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let max_half = ((n - 2) / 8).max(1);
    let mut plus = base.to_vec();
    let mut minus = base.to_vec();
    let mut worst = f64::INFINITY;
    for _ in 0..trials {
        let ci = rng.random_range(1..n - 1);
        let cj = rng.random_range(1..n - 1);
        let w = rng.random_range(1..=max_half);
        plus.copy_from_slice(base);
        minus.copy_from_slice(base);
        for j in cj.saturating_sub(w).max(1)..=(cj + w).min(n - 2) {
            for i in ci.saturating_sub(w).max(1)..=(ci + w).min(n - 2) {
                let k = grid.index(i, j);
                let phi = amplitude * rng.random_range(-1.0..=1.0);
                plus[k] += phi;
                minus[k] -= phi;
            }
        }
        for v in [&plus, &minus] {
            let e = gradient_functional(v, grid, |z| solution.integrand.value2(z));
            worst = worst.min(e - e0);
        }
    }
    ProbeReport {
        trials,
        amplitude,
        min_difference: worst,
        slack,
        pass: worst >= -slack,
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct MaxPrincipleReport {
    pub interior_max: f64,
    pub boundary_max: f64,
    pub pass: bool,
}

/// `max_interior |u| ≤ max_boundary |U_ε| + 1e-12 (1 + max_boundary |U_ε|)`.
pub fn max_principle_check(solution: &Solution) -> MaxPrincipleReport {
    let interior_max = solution.field.max_abs_interior();
    let boundary_max = solution.field.max_abs_boundary();
    MaxPrincipleReport {
        interior_max,
        boundary_max,
        pass: interior_max <= boundary_max + 1e-12 * (1.0 + boundary_max),
    }
}

/// Lowest eigenvalue of the assembled Hessian at `field`, by inverse power
/// iteration with a Rayleigh quotient. Diagnostic only.
pub fn hessian_min_eigenvalue(field: &DiscreteField, integrand: &Integrand) -> Option<f64> {
    let grid = field.grid();
    let dofs = Dofs::new(grid);
    let (_, hess) = assemble(field.values(), grid, integrand, &dofs);
    let a = hess.clone();
    let chol: BandCholesky = hess.cholesky().ok()?;
    let size = a.size();
    let mut x: Vec<f64> = (0..size).map(|i| 1.0 + 0.01 * (i % 7) as f64).collect();
    let mut lambda = 0.0;
    for _ in 0..200 {
        let nx = norm2(&x);
        x.iter_mut().for_each(|v| *v /= nx);
        let mut y = x.clone();
        chol.solve(&mut y);
        let ax = a.mul_vec(&y);
        let ny2: f64 = y.iter().map(|v| v * v).sum();
        let next = y.iter().zip(&ax).map(|(u, v)| u * v).sum::<f64>() / ny2;
        x = y;
        if (next - lambda).abs() <= 1e-12 * next.abs() {
            lambda = next;
            break;
        }
        lambda = next;
    }
    Some(lambda)
}
