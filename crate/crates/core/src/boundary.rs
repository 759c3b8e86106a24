//! Dirichlet data and its mollification `U_ε = U * ρ_ε`.
//!
//! `ρ_ε` is the normalized bump `exp(-1/(1 - |y|²/ε²))` on the disc of radius
//! `ε`. Convolution at a point uses a fixed 16-point rule: two radial nodes
//! (Gauss nodes for the bump weight in the variable `s = |y|²/ε²`) times eight
//! equally spaced angles. The rule is invariant under `y ↦ -y` and its weights
//! are positive and sum to one, so affine data are reproduced and the sup norm
//! can only decrease.

use alloc::sync::Arc;
use alloc::vec::Vec;
use core::f64::consts::PI;
use core::fmt;

use crate::error::{invalid, out_of_range, Result};
use crate::math::{cos, exp, sin, sqrt};
use crate::mesh::Grid;

#[derive(Clone)]
pub enum BoundaryKind {
    /// `a · x + b`.
    Affine { slope: [f64; 2], offset: f64 },
    /// `A sin(ω₁ x₁) cos(ω₂ x₂)`.
    Trig { amplitude: f64, frequencies: [f64; 2] },
    Custom(Arc<dyn Fn([f64; 2]) -> f64 + Send + Sync>),
}

impl fmt::Debug for BoundaryKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryKind::Affine { slope, offset } => f
                .debug_struct("Affine")
                .field("slope", slope)
                .field("offset", offset)
                .finish(),
            BoundaryKind::Trig {
                amplitude,
                frequencies,
            } => f
                .debug_struct("Trig")
                .field("amplitude", amplitude)
                .field("frequencies", frequencies)
                .finish(),
            BoundaryKind::Custom(_) => f.write_str("Custom(..)"),
        }
    }
}

/// Boundary datum `U` together with its mollification radius `ε`.
#[derive(Debug, Clone)]
pub struct BoundarySpec {
    pub kind: BoundaryKind,
    pub epsilon: f64,
}

impl BoundarySpec {
    pub fn new(kind: BoundaryKind) -> Self {
        BoundarySpec { kind, epsilon: 0.0 }
    }

    pub fn affine(slope: [f64; 2], offset: f64) -> Self {
        Self::new(BoundaryKind::Affine { slope, offset })
    }

    pub fn trig(amplitude: f64, frequencies: [f64; 2]) -> Self {
        Self::new(BoundaryKind::Trig {
            amplitude,
            frequencies,
        })
    }

    pub fn custom(f: impl Fn([f64; 2]) -> f64 + Send + Sync + 'static) -> Self {
        Self::new(BoundaryKind::Custom(Arc::new(f)))
    }

    pub fn with_epsilon(mut self, epsilon: f64) -> Self {
        self.epsilon = epsilon;
        self
    }

    pub fn is_affine(&self) -> bool {
        matches!(self.kind, BoundaryKind::Affine { .. })
    }

    /// `U(x)`.
    pub fn value(&self, x: [f64; 2]) -> f64 {
        match &self.kind {
            BoundaryKind::Affine { slope, offset } => slope[0] * x[0] + slope[1] * x[1] + offset,
            BoundaryKind::Trig {
                amplitude,
                frequencies,
            } => amplitude * sin(frequencies[0] * x[0]) * cos(frequencies[1] * x[1]),
            BoundaryKind::Custom(f) => f(x),
        }
    }

    /// `sup |U|` over the square `[-L, L]²`. Exact for the affine and
    /// trigonometric kinds, sampled on a 513² lattice for custom data.
    pub fn sup_norm(&self, half_width: f64) -> f64 {
        match &self.kind {
            BoundaryKind::Affine { slope, offset } => {
                offset.abs() + (slope[0].abs() + slope[1].abs()) * half_width
            }
            BoundaryKind::Trig {
                amplitude,
                frequencies,
            } => {
                let w = frequencies[0].abs() * half_width;
                let s = if w >= 0.5 * PI { 1.0 } else { sin(w) };
                amplitude.abs() * s
            }
            BoundaryKind::Custom(f) => {
                let k = 512;
                let h = 2.0 * half_width / k as f64;
                let mut m: f64 = 0.0;
                for j in 0..=k {
                    for i in 0..=k {
                        let x = [-half_width + i as f64 * h, -half_width + j as f64 * h];
                        m = m.max(f(x).abs());
                    }
                }
                m
            }
        }
    }

    /// `U_ε(x)` with the 16-point rule; `ε = 0` returns `U(x)`.
    pub fn mollified_value(&self, x: [f64; 2], rule: &MollifierRule) -> f64 {
        if rule.radius == 0.0 || self.is_affine() {
            return self.value(x);
        }
        rule.points
            .iter()
            .map(|(y, w)| w * self.value([x[0] - y[0], x[1] - y[1]]))
            .sum()
    }

    /// The mollified trace at the grid's boundary nodes, in
    /// [`Grid::boundary_indices`] order.
    pub fn mollify(&self, grid: &Grid) -> Result<Vec<f64>> {
        let rule = MollifierRule::new(self.epsilon, epsilon_max(grid))?;
        let out: Vec<f64> = grid
            .boundary_indices()
            .into_iter()
            .map(|k| self.mollified_value(grid.coord_of(k), &rule))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(invalid("boundary datum is not finite on the boundary"));
        }
        Ok(out)
    }

    /// `U_ε` at every node of the grid.
    pub fn mollified_field(&self, grid: &Grid) -> Result<Vec<f64>> {
        let rule = MollifierRule::new(self.epsilon, epsilon_max(grid))?;
        let out: Vec<f64> = (0..grid.node_count())
            .map(|k| self.mollified_value(grid.coord_of(k), &rule))
            .collect();
        if out.iter().any(|v| !v.is_finite()) {
            return Err(invalid("boundary datum is not finite on the grid"));
        }
        Ok(out)
    }
}

/// `ε₀ = min{1, diam/2}` for the grid's square.
pub fn epsilon_max(grid: &Grid) -> f64 {
    let half_diam = sqrt(2.0) * grid.half_width();
    half_diam.min(1.0)
}

/// Quadrature nodes (offsets) and weights for convolution with `ρ_ε`.
#[derive(Debug, Clone, PartialEq)]
pub struct MollifierRule {
    pub radius: f64,
    pub points: Vec<([f64; 2], f64)>,
}

pub const MOLLIFIER_ANGLES: usize = 8;

/// `exp(-1/(1 - s))` on `[0, 1)`, the bump in the variable `s = |y|²/ε²`.
pub fn bump_profile(s: f64) -> f64 {
    if s >= 1.0 {
        0.0
    } else {
        exp(-1.0 / (1.0 - s))
    }
}

impl MollifierRule {
    pub fn new(radius: f64, radius_max: f64) -> Result<Self> {
        if !(radius >= 0.0) || radius >= radius_max {
            return Err(out_of_range(alloc::format!(
                "mollification radius must lie in [0, {radius_max}), got {radius}"
            )));
        }
        if radius == 0.0 {
            return Ok(MollifierRule {
                radius,
                points: alloc::vec![([0.0, 0.0], 1.0)],
            });
        }
        let mu = bump_moments();
        let det = mu[1] * mu[1] - mu[0] * mu[2];
        let a = (mu[0] * mu[3] - mu[1] * mu[2]) / det;
        let b = (mu[2] * mu[2] - mu[1] * mu[3]) / det;
        let disc = sqrt(a * a - 4.0 * b);
        let s1 = 0.5 * (-a - disc);
        let s2 = 0.5 * (-a + disc);
        let w1 = (mu[1] - s2 * mu[0]) / ((s1 - s2) * mu[0]);
        let w2 = 1.0 - w1;
        let mut points = Vec::with_capacity(2 * MOLLIFIER_ANGLES);
        for (s, w) in [(s1, w1), (s2, w2)] {
            let r = radius * sqrt(s);
            for k in 0..MOLLIFIER_ANGLES {
                let theta = k as f64 * 2.0 * PI / MOLLIFIER_ANGLES as f64;
                points.push(([r * cos(theta), r * sin(theta)], w / MOLLIFIER_ANGLES as f64));
            }
        }
        Ok(MollifierRule { radius, points })
    }
}

/// `∫₀¹ sᵏ exp(-1/(1-s)) ds` for `k = 0..4`, composite Simpson with 4096
/// panels. The integrand is flat to all orders at `s = 1`.
fn bump_moments() -> [f64; 4] {
    let panels = 4096;
    let h = 1.0 / panels as f64;
    let mut mu = [0.0; 4];
    for i in 0..=panels {
        let s = i as f64 * h;
        let c = if i == 0 || i == panels {
            1.0
        } else if i % 2 == 1 {
            4.0
        } else {
            2.0
        };
        let w = c * bump_profile(s);
        let mut sk = 1.0;
        for m in mu.iter_mut() {
            *m += w * sk;
            sk *= s;
        }
    }
    mu.map(|m| m * h / 3.0)
}
