//! Model integrands with (p,q)-growth and their quadratic regularization.
//!
//! Every integrand is a function of the gradient only. Values, gradients and
//! Hessians are analytic; the Hessian is assembled symmetrically by
//! construction. The growth and ellipticity hypotheses
//!
//! ```text
//! m|z|^p         ≤ f(z)            ≤ M(1+|z|)^q
//! m|z|^p         ≤ <Df(z), z>      ,  |Df(z)| ≤ M(1+|z|^(q-1))
//! m|z|^(p-2)|ξ|² ≤ <D²f(z)ξ, ξ>   ≤ M(1+|z|^(q-2))|ξ|²
//! ```
//!
//! (and their σ-shifted counterparts) are checked by sampling in
//! [`Integrand::check_growth`].

use alloc::sync::Arc;
use alloc::vec;
use alloc::vec::Vec;
use core::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::Serialize;

use crate::error::{invalid, out_of_range, Result};
use crate::math::{norm, powf};

/// Relative slack allowed when a sampled inequality is checked.
pub const GROWTH_SLACK: f64 = 1e-12;

/// Growth exponents and constants `(p, q, m, M)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GrowthParams {
    pub p: f64,
    pub q: f64,
    pub m: f64,
    #[serde(rename = "M")]
    pub big_m: f64,
}

impl GrowthParams {
    pub fn new(p: f64, q: f64, m: f64, big_m: f64) -> Result<Self> {
        if !(p.is_finite() && q.is_finite() && m.is_finite() && big_m.is_finite()) {
            return Err(invalid("growth parameters must be finite"));
        }
        if p < 2.0 || q < p {
            return Err(out_of_range(alloc::format!(
                "need 2 <= p <= q, got p = {p}, q = {q}"
            )));
        }
        if !(m > 0.0 && m <= big_m) {
            return Err(out_of_range(alloc::format!(
                "need 0 < m <= M, got m = {m}, M = {big_m}"
            )));
        }
        Ok(GrowthParams { p, q, m, big_m })
    }

    /// The standing hypothesis of the higher-integrability and Lipschitz estimates.
    pub fn satisfies_qlt_p_plus_2(&self) -> bool {
        self.q < self.p + 2.0
    }
}

/// User-supplied integrand. Implementations write the gradient into `grad`
/// (length `z.len()`) and the row-major Hessian into `hess`
/// (length `z.len()²`), and return the value.
pub trait CustomIntegrand: Send + Sync + fmt::Debug {
    fn eval(&self, z: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64;
}

#[derive(Debug, Clone)]
pub enum Kind {
    /// `|z|^p + |z_N|^q`.
    AnisotropicPower,
    /// `|z|² + |z_N|⁴`.
    Hong,
    /// `|z|²`.
    Quadratic,
    Custom(Arc<dyn CustomIntegrand>),
}

impl Kind {
    pub fn name(&self) -> &'static str {
        match self {
            Kind::AnisotropicPower => "anisotropic_power",
            Kind::Hong => "hong",
            Kind::Quadratic => "quadratic",
            Kind::Custom(_) => "custom",
        }
    }
}

/// Value, gradient and row-major Hessian at one point.
#[derive(Debug, Clone, PartialEq)]
pub struct Evaluation {
    pub value: f64,
    pub gradient: Vec<f64>,
    pub hessian: Vec<f64>,
}

impl Evaluation {
    pub fn dim(&self) -> usize {
        self.gradient.len()
    }

    pub fn hessian_entry(&self, i: usize, j: usize) -> f64 {
        self.hessian[i * self.dim() + j]
    }
}

/// An integrand `f_σ(z) = f(z) + σ/2 |z|²`. Immutable once built.
#[derive(Debug, Clone)]
pub struct Integrand {
    kind: Kind,
    params: GrowthParams,
    sigma: f64,
}

impl Integrand {
    /// `|z|^p + |z_N|^q` with `m = 1`, `M = p(p-1) + q(q-1)`.
    pub fn anisotropic_power(p: f64, q: f64) -> Result<Self> {
        let big_m = p * (p - 1.0) + q * (q - 1.0);
        let params = GrowthParams::new(p, q, 1.0, big_m)?;
        Ok(Integrand {
            kind: Kind::AnisotropicPower,
            params,
            sigma: 0.0,
        })
    }

    pub fn hong() -> Self {
        Integrand {
            kind: Kind::Hong,
            params: GrowthParams {
                p: 2.0,
                q: 4.0,
                m: 1.0,
                big_m: 14.0,
            },
            sigma: 0.0,
        }
    }

    pub fn quadratic() -> Self {
        Integrand {
            kind: Kind::Quadratic,
            params: GrowthParams {
                p: 2.0,
                q: 2.0,
                m: 1.0,
                big_m: 2.0,
            },
            sigma: 0.0,
        }
    }

    pub fn custom(f: Arc<dyn CustomIntegrand>, params: GrowthParams) -> Self {
        Integrand {
            kind: Kind::Custom(f),
            params,
            sigma: 0.0,
        }
    }

    /// Replace the stored constants, e.g. to probe a deliberately wrong `m`.
    pub fn with_params(mut self, params: GrowthParams) -> Self {
        self.params = params;
        self
    }

    pub fn kind(&self) -> &Kind {
        &self.kind
    }

    pub fn params(&self) -> &GrowthParams {
        &self.params
    }

    pub fn sigma(&self) -> f64 {
        self.sigma
    }

    /// `p = q = 2`: the energy is coercive without regularization.
    pub fn is_quadratic_growth(&self) -> bool {
        self.params.p == 2.0 && self.params.q == 2.0
    }

    /// Adds `σ/2 |z|²` to an unregularized integrand.
    pub fn regularize(&self, sigma: f64) -> Result<Integrand> {
        if !(sigma > 0.0 && sigma < 1.0) {
            return Err(out_of_range(alloc::format!(
                "regularization weight must lie in (0, 1), got {sigma}"
            )));
        }
        if self.sigma != 0.0 {
            return Err(invalid("integrand is already regularized"));
        }
        let mut out = self.clone();
        out.sigma = sigma;
        Ok(out)
    }

    /// The unregularized integrand `f`.
    pub fn base(&self) -> Integrand {
        let mut out = self.clone();
        out.sigma = 0.0;
        out
    }

    pub fn eval(&self, z: &[f64]) -> Result<Evaluation> {
        if z.is_empty() {
            return Err(invalid("evaluation point has no components"));
        }
        if z.iter().any(|v| !v.is_finite()) {
            return Err(invalid("evaluation point has non-finite components"));
        }
        let n = z.len();
        let mut gradient = vec![0.0; n];
        let mut hessian = vec![0.0; n * n];
        let value = self.eval_into(z, &mut gradient, &mut hessian);
        Ok(Evaluation {
            value,
            gradient,
            hessian,
        })
    }

    /// Unchecked evaluation; `grad` and `hess` are overwritten.
    pub fn eval_into(&self, z: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
        let n = z.len();
        let mut value = match &self.kind {
            Kind::AnisotropicPower => {
                anisotropic(self.params.p, self.params.q, z, grad, hess)
            }
            Kind::Hong => anisotropic(2.0, 4.0, z, grad, hess),
            Kind::Quadratic => radial_power(2.0, z, grad, hess),
            Kind::Custom(f) => f.eval(z, grad, hess),
        };
        if self.sigma != 0.0 {
            let s = self.sigma;
            let mut r2 = 0.0;
            for i in 0..n {
                r2 += z[i] * z[i];
                grad[i] += s * z[i];
                hess[i * n + i] += s;
            }
            value += 0.5 * s * r2;
        }
        value
    }

    /// Two-dimensional fast path used by the grid solver.
    #[inline]
    pub fn eval2(&self, z: [f64; 2]) -> (f64, [f64; 2], [[f64; 2]; 2]) {
        let mut g = [0.0; 2];
        let mut h = [0.0; 4];
        let v = self.eval_into(&z, &mut g, &mut h);
        (v, g, [[h[0], h[1]], [h[2], h[3]]])
    }

    #[inline]
    pub fn value2(&self, z: [f64; 2]) -> f64 {
        self.eval2(z).0
    }

    /// Checks the growth hypotheses on every sample. The σ-shifted versions
    /// are used when the integrand is regularized.
    pub fn check_growth(&self, samples: &[GrowthSample]) -> Result<GrowthReport> {
        if samples.is_empty() {
            return Err(invalid("growth check needs at least one sample"));
        }
        let GrowthParams { p, q, m, big_m } = self.params;
        let s = self.sigma;
        let mut checks = [
            InequalityCheck::new(Hypothesis::Growth, Side::Lower),
            InequalityCheck::new(Hypothesis::Growth, Side::Upper),
            InequalityCheck::new(Hypothesis::Gradient, Side::Lower),
            InequalityCheck::new(Hypothesis::Gradient, Side::Upper),
            InequalityCheck::new(Hypothesis::Ellipticity, Side::Lower),
            InequalityCheck::new(Hypothesis::Ellipticity, Side::Upper),
        ];
        for sample in samples {
            let z = &sample.z;
            let xi = &sample.xi;
            if xi.len() != z.len() {
                return Err(invalid("sample z and xi differ in dimension"));
            }
            let ev = self.eval(z)?;
            let n = z.len();
            let r = norm(z);
            let r2 = r * r;
            let xi2: f64 = xi.iter().map(|v| v * v).sum();
            let mut quad = 0.0;
            for i in 0..n {
                for j in 0..n {
                    quad += xi[i] * ev.hessian[i * n + j] * xi[j];
                }
            }
            let dot: f64 = ev.gradient.iter().zip(z).map(|(a, b)| a * b).sum();
            let grad_norm = norm(&ev.gradient);
            let lower_growth = 0.5 * s * r2 + m * powf(r, p);

            let pairs = [
                (lower_growth, ev.value),
                (ev.value, big_m * powf(1.0 + r, q) + 0.5 * s * r2),
                (lower_growth, dot),
                (grad_norm, big_m * (1.0 + powf(r, q - 1.0)) + s * r),
                ((m * powf(r, p - 2.0) + s) * xi2, quad),
                (quad, (big_m * (1.0 + powf(r, q - 2.0)) + s) * xi2),
            ];
            for (check, (lhs, rhs)) in checks.iter_mut().zip(pairs) {
                check.record(lhs, rhs, z, xi);
            }
        }
        Ok(GrowthReport {
            kind: self.kind.name(),
            regularized: s > 0.0,
            sigma: s,
            params: self.params,
            sample_count: samples.len(),
            checks: checks.into_iter().collect(),
        })
    }
}

/// `|z|^p` with its derivatives. At the origin the Hessian is `2I` for
/// `p = 2` and the zero matrix for `p > 2`.
fn radial_power(p: f64, z: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
    let n = z.len();
    let r2: f64 = z.iter().map(|v| v * v).sum();
    // libm's pow(0, 0) = 1 gives the p = 2 limits at r = 0.
    let c = p * powf(r2, 0.5 * (p - 2.0));
    for i in 0..n {
        grad[i] = c * z[i];
        for j in 0..n {
            hess[i * n + j] = 0.0;
        }
        hess[i * n + i] = c;
    }
    if r2 > 0.0 && p != 2.0 {
        let cc = c * (p - 2.0) / r2;
        for i in 0..n {
            for j in 0..=i {
                let v = cc * z[i] * z[j];
                hess[i * n + j] += v;
                if j != i {
                    hess[j * n + i] += v;
                }
            }
        }
    }
    powf(r2, 0.5 * p)
}

fn anisotropic(p: f64, q: f64, z: &[f64], grad: &mut [f64], hess: &mut [f64]) -> f64 {
    let n = z.len();
    let v = radial_power(p, z, grad, hess);
    let t = z[n - 1];
    let a = t.abs();
    grad[n - 1] += q * powf(a, q - 2.0) * t;
    hess[(n - 1) * n + (n - 1)] += q * (q - 1.0) * powf(a, q - 2.0);
    v + powf(a, q)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Hypothesis {
    /// Two-sided bound on `f`.
    Growth,
    /// Coercivity of `<Df(z), z>` and the bound on `|Df|`.
    Gradient,
    /// Two-sided bound on the Hessian.
    Ellipticity,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Side {
    Lower,
    Upper,
}

/// Outcome of one sampled inequality `lhs ≤ rhs`.
#[derive(Debug, Clone, Serialize)]
pub struct InequalityCheck {
    pub hypothesis: Hypothesis,
    pub side: Side,
    pub pass: bool,
    /// Largest observed `lhs / rhs`.
    pub worst_ratio: f64,
    pub witness_z: Vec<f64>,
    pub witness_xi: Vec<f64>,
}

impl InequalityCheck {
    fn new(hypothesis: Hypothesis, side: Side) -> Self {
        InequalityCheck {
            hypothesis,
            side,
            pass: true,
            worst_ratio: f64::NEG_INFINITY,
            witness_z: Vec::new(),
            witness_xi: Vec::new(),
        }
    }

    fn record(&mut self, lhs: f64, rhs: f64, z: &[f64], xi: &[f64]) {
        let ratio = if rhs > 0.0 {
            lhs / rhs
        } else if lhs <= 0.0 {
            0.0
        } else {
            f64::INFINITY
        };
        if lhs > rhs + GROWTH_SLACK * rhs.abs() || !lhs.is_finite() || !rhs.is_finite() {
            self.pass = false;
        }
        if ratio > self.worst_ratio || self.witness_z.is_empty() {
            self.worst_ratio = ratio;
            self.witness_z = z.to_vec();
            self.witness_xi = xi.to_vec();
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct GrowthReport {
    pub kind: &'static str,
    /// `true` when the σ-shifted hypotheses were checked.
    pub regularized: bool,
    pub sigma: f64,
    pub params: GrowthParams,
    pub sample_count: usize,
    pub checks: Vec<InequalityCheck>,
}

impl GrowthReport {
    pub fn check(&self, hypothesis: Hypothesis, side: Side) -> &InequalityCheck {
        self.checks
            .iter()
            .find(|c| c.hypothesis == hypothesis && c.side == side)
            .expect("every hypothesis and side is checked")
    }

    /// Both sides of `hypothesis` held on every sample.
    pub fn passes(&self, hypothesis: Hypothesis) -> bool {
        self.checks
            .iter()
            .filter(|c| c.hypothesis == hypothesis)
            .all(|c| c.pass)
    }

    pub fn all_pass(&self) -> bool {
        self.checks.iter().all(|c| c.pass)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrowthSample {
    pub z: Vec<f64>,
    pub xi: Vec<f64>,
}

pub const DEFAULT_RADII: usize = 64;
pub const DEFAULT_DIRECTIONS: usize = 16;
pub const DEFAULT_XIS: usize = 8;

/// Reproducible sample set: the origin plus 63 radii log-spaced on
/// `[1e-3, 1e3]`, 16 directions (the signed coordinate axes first, then
/// Gaussian directions) and 8 random unit vectors `ξ` per point.
pub fn default_samples(dim: usize, seed: u64) -> Vec<GrowthSample> {
    assert!(dim >= 1, "dimension must be positive");
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let radii: Vec<f64> = (0..DEFAULT_RADII)
        .map(|k| {
            if k == 0 {
                0.0
            } else {
                let t = (k - 1) as f64 / (DEFAULT_RADII - 2) as f64;
                powf(10.0, -3.0 + 6.0 * t)
            }
        })
        .collect();
    let mut directions = Vec::with_capacity(DEFAULT_DIRECTIONS);
    for axis in 0..dim {
        for sign in [1.0, -1.0] {
            if directions.len() < DEFAULT_DIRECTIONS {
                let mut d = vec![0.0; dim];
                d[axis] = sign;
                directions.push(d);
            }
        }
    }
    while directions.len() < DEFAULT_DIRECTIONS {
        directions.push(random_unit(&mut rng, dim));
    }
    let mut out = Vec::with_capacity(DEFAULT_RADII * DEFAULT_DIRECTIONS * DEFAULT_XIS);
    for &r in &radii {
        for d in &directions {
            let z: Vec<f64> = d.iter().map(|v| r * v).collect();
            for _ in 0..DEFAULT_XIS {
                out.push(GrowthSample {
                    z: z.clone(),
                    xi: random_unit(&mut rng, dim),
                });
            }
        }
    }
    out
}

fn random_unit<R: Rng>(rng: &mut R, dim: usize) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..dim).map(|_| rng.sample(StandardNormal)).collect();
        let r = norm(&v);
        if r > 1e-8 {
            return v.into_iter().map(|x| x / r).collect();
        }
    }
}
