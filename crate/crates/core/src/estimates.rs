//! Discrete measurements of the a priori estimates, with all unspecified
//! constants set to one.
//!
//! Reports label every bracket "up to constant": the continuum constants
//! depend on `(M, m, p, q, β, N)` and are never instantiated.

use alloc::vec;
use alloc::vec::Vec;

use num_bigint::BigInt;
use num_rational::BigRational;
use num_traits::{One, Signed};
use serde::Serialize;

use crate::error::{invalid, out_of_range, Error, Result};
use crate::math::{hypot, powf};
use crate::mesh::{discrete_gradient, discrete_hessian, CutoffField, DiscreteField};
use crate::phase::Rational;
use crate::solver::Solution;

/// Default cap on the empirical Caccioppoli constant.
pub const CACCIOPPOLI_CAP: f64 = 1e4;

/// Nodes closer than this many steps to the boundary are excluded from the
/// second-derivative sums.
pub const INTERIOR_DEPTH: usize = 2;

#[derive(Debug, Clone, Serialize)]
pub struct CaccioppoliReport {
    pub alpha: f64,
    pub p: f64,
    pub q: f64,
    /// `h² Σ |∇u|^{p-2+α} |∇²u|² η²`
    pub left: f64,
    /// `h² Σ (|∇u|^{q+α} + |∇u|^{2+α}) |∇η|²`
    pub right: f64,
    /// `left / right`; infinite when only the right side vanishes, zero when
    /// both do.
    pub constant: f64,
    pub cap: f64,
    pub nodes: usize,
    pub pass: bool,
}

/// Measures both sides of the Caccioppoli inequality for `u` on the
/// interior nodes at depth at least two.
pub fn caccioppoli_report(
    solution: &Solution,
    cutoff: &CutoffField,
    alpha: f64,
) -> Result<CaccioppoliReport> {
    caccioppoli_report_with_cap(solution, cutoff, alpha, CACCIOPPOLI_CAP)
}

pub fn caccioppoli_report_with_cap(
    solution: &Solution,
    cutoff: &CutoffField,
    alpha: f64,
    cap: f64,
) -> Result<CaccioppoliReport> {
    let field = &solution.field;
    let grid = field.grid();
    if cutoff.grid() != grid {
        return Err(invalid("cutoff and solution live on different grids"));
    }
    if !(alpha >= 0.0 && alpha.is_finite()) {
        return Err(out_of_range(alloc::format!("α must be ≥ 0, got {alpha}")));
    }
    if !(cap > 0.0) {
        return Err(out_of_range("Caccioppoli cap must be positive"));
    }
    if cutoff.min_support_depth() < INTERIOR_DEPTH {
        return Err(invalid(
            "cutoff support reaches the two outermost node layers",
        ));
    }
    let params = solution.integrand.params();
    let (p, q) = (params.p, params.q);
    let grads = discrete_gradient(field);
    let hess = discrete_hessian(field);
    let eta = cutoff.values();
    let deta = cutoff.gradients();
    let h2 = grid.h() * grid.h();
    let (mut left, mut right, mut nodes) = (0.0, 0.0, 0);
    for k in 0..grid.node_count() {
        let (i, j) = grid.ij(k);
        if grid.depth(i, j) < INTERIOR_DEPTH {
            continue;
        }
        nodes += 1;
        let g = hypot(grads[k][0], grads[k][1]);
        let d2 = hess[k].map_or(0.0, |s| s.norm_sq());
        if eta[k] != 0.0 && d2 != 0.0 {
            left += powf(g, p - 2.0 + alpha) * d2 * eta[k] * eta[k];
        }
        let de2 = deta[k][0] * deta[k][0] + deta[k][1] * deta[k][1];
        if de2 != 0.0 {
            right += (powf(g, q + alpha) + powf(g, 2.0 + alpha)) * de2;
        }
    }
    left *= h2;
    right *= h2;
    let constant = if right > 0.0 {
        left / right
    } else if left > 0.0 {
        f64::INFINITY
    } else {
        0.0
    };
    Ok(CaccioppoliReport {
        alpha,
        p,
        q,
        left,
        right,
        constant,
        cap,
        nodes,
        pass: left <= cap * right,
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct HigherIntegrabilityReport {
    pub beta: f64,
    pub p: f64,
    pub q: f64,
    pub inner_radius: f64,
    pub outer_radius: f64,
    pub sup_u: f64,
    /// `h² Σ_{|x| ≤ r₀} |∇u|^{p+β}`
    pub left: f64,
    /// Right side of the bound with unit constant.
    pub bracket: f64,
    /// `2(β+p)/p`, `2(β+p)/(2-q+p)` and `p+β`.
    pub exponents: [f64; 3],
    pub ratio: f64,
}

fn check_exponents(p: f64, q: f64) -> Result<()> {
    if !(p >= 2.0 && q >= p && q.is_finite()) {
        return Err(out_of_range(alloc::format!(
            "exponents need 2 ≤ p ≤ q < ∞, got p = {p}, q = {q}"
        )));
    }
    if q >= p + 2.0 {
        return Err(Error::UnsupportedRegime { p, q });
    }
    Ok(())
}

/// `R₀^N [s^{2(β+p)/p} + s^{2(β+p)/(2-q+p)} + s^{p+β}]` with
/// `s = sup_U/(R₀ - r₀)`, and its three exponents.
pub fn higher_integrability_bracket(
    p: f64,
    q: f64,
    beta: f64,
    sup_u: f64,
    inner_radius: f64,
    outer_radius: f64,
    n_dim: u32,
) -> Result<(f64, [f64; 3])> {
    check_exponents(p, q)?;
    if !(beta >= 2.0 && beta.is_finite()) {
        return Err(out_of_range(alloc::format!("β must be ≥ 2, got {beta}")));
    }
    if !(inner_radius > 0.0 && inner_radius < outer_radius && outer_radius.is_finite()) {
        return Err(out_of_range("radii need 0 < r₀ < R₀"));
    }
    if !(sup_u >= 0.0 && sup_u.is_finite()) {
        return Err(out_of_range("sup|U| must be finite and non-negative"));
    }
    if n_dim < 2 {
        return Err(out_of_range("dimension must be at least 2"));
    }
    let exponents = [
        2.0 * (beta + p) / p,
        2.0 * (beta + p) / (2.0 - q + p),
        p + beta,
    ];
    let s = sup_u / (outer_radius - inner_radius);
    let bracket =
        powf(outer_radius, n_dim as f64) * exponents.iter().map(|&e| powf(s, e)).sum::<f64>();
    Ok((bracket, exponents))
}

/// Empirical `∫_{B_{r₀}} |∇u|^{p+β}` against the unit-constant bracket.
pub fn higher_integrability_report(
    field: &DiscreteField,
    p: f64,
    q: f64,
    beta: f64,
    inner_radius: f64,
    outer_radius: f64,
    sup_u: f64,
) -> Result<HigherIntegrabilityReport> {
    let grid = field.grid();
    let (bracket, exponents) = higher_integrability_bracket(
        p,
        q,
        beta,
        sup_u,
        inner_radius,
        outer_radius,
        grid.dim() as u32,
    )?;
    if outer_radius > grid.half_width() {
        return Err(out_of_range("R₀ exceeds the grid half-width"));
    }
    let grads = discrete_gradient(field);
    let h2 = grid.h() * grid.h();
    let left = h2
        * (0..grid.node_count())
            .filter(|&k| {
                let x = grid.coord_of(k);
                hypot(x[0], x[1]) <= inner_radius
            })
            .map(|k| powf(hypot(grads[k][0], grads[k][1]), p + beta))
            .sum::<f64>();
    Ok(HigherIntegrabilityReport {
        beta,
        p,
        q,
        inner_radius,
        outer_radius,
        sup_u,
        left,
        bracket,
        exponents,
        ratio: if left == 0.0 { 0.0 } else { left / bracket },
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct MoserSchedule {
    pub p: f64,
    pub q: f64,
    pub n_dim: u32,
    pub two_star: f64,
    pub alpha0: f64,
    /// `α_0 ..= α_{n_max}` from the recurrence.
    pub alphas: Vec<f64>,
    /// `1/(α₀ + (2*p - 2q)/(2* - 2))`; infinite when the denominator vanishes.
    pub limit_exponent: f64,
    /// Whether `α_n → ∞`.
    pub diverges: bool,
    /// Closed form and recurrence agree in exact arithmetic for every `n`.
    pub exact_identity: bool,
    /// The three ratios of the boundedness argument at `n_max`: the first
    /// converges to the limit exponent, the other two stay bounded.
    pub observations: [f64; 3],
}

impl MoserSchedule {
    pub fn ratio(&self) -> f64 {
        self.two_star / 2.0
    }

    /// `(2*/2)^n / (α_n + q)`.
    pub fn limit_ratio(&self, n: usize) -> Option<f64> {
        let a = self.alphas.get(n)?;
        Some(powf(self.ratio(), n as f64) / (a + self.q))
    }
}

/// Sobolev exponent `2N/(N-2)` for `N > 2`, or the chosen value for `N = 2`.
pub fn sobolev_exponent(n_dim: u32, two_star_for_n2: Option<Rational>) -> Result<Rational> {
    match n_dim {
        0 | 1 => Err(out_of_range("dimension must be at least 2")),
        2 => {
            let v = two_star_for_n2.unwrap_or_else(|| Rational::from_integer(4));
            if v <= Rational::from_integer(2) {
                return Err(out_of_range("2* must lie in (2, ∞) for N = 2"));
            }
            Ok(v)
        }
        n => Ok(Rational::new(2 * n as i64, n as i64 - 2)),
    }
}

/// Exponent schedule in exact arithmetic.
#[derive(Debug, Clone)]
pub struct ExactSchedule {
    pub two_star: BigRational,
    pub alpha0: BigRational,
    pub recurrence: Vec<BigRational>,
    pub closed_form: Vec<BigRational>,
    /// `α₀ + (2*p - 2q)/(2* - 2)`
    pub divergence_margin: BigRational,
}

impl ExactSchedule {
    pub fn identity_holds(&self) -> bool {
        self.recurrence == self.closed_form
    }

    /// `α_n → ∞` iff the margin is positive. The margin is never negative;
    /// it vanishes exactly when `α₀ = (2q - 2*p)/(2* - 2)`, the fixed point of
    /// the recurrence.
    pub fn diverges(&self) -> bool {
        self.divergence_margin.is_positive()
    }

    pub fn is_stationary(&self) -> bool {
        self.recurrence.windows(2).all(|w| w[0] == w[1])
    }
}

fn big(r: Rational) -> BigRational {
    BigRational::new(BigInt::from(*r.numer()), BigInt::from(*r.denom()))
}

/// Builds `α_0 ..= α_{n_max}` both from the recurrence
/// `(p + α_n)·2*/2 = α_{n+1} + q` and from its closed form.
pub fn exact_schedule(
    p: &BigRational,
    q: &BigRational,
    two_star: &BigRational,
    n_max: usize,
) -> ExactSchedule {
    let two = BigRational::from_integer(BigInt::from(2));
    let kappa = two_star / &two;
    let shift = (two_star - &two).recip();
    let lower = (&two * q - two_star * p) * &shift;
    let alpha0 = if lower > two { lower } else { two.clone() };
    let mut recurrence = Vec::with_capacity(n_max + 1);
    let mut a = alpha0.clone();
    for _ in 0..=n_max {
        recurrence.push(a.clone());
        a = (p + &a) * &kappa - q;
    }
    let drift = &kappa * p - q;
    let one = BigRational::one();
    let mut closed_form = Vec::with_capacity(n_max + 1);
    let mut kn = one.clone();
    for _ in 0..=n_max {
        closed_form.push(&kn * &alpha0 + &drift * (&kn - &one) / (&kappa - &one));
        kn *= &kappa;
    }
    let divergence_margin = &alpha0 + (two_star * p - &two * q) * &shift;
    ExactSchedule {
        two_star: two_star.clone(),
        alpha0,
        recurrence,
        closed_form,
        divergence_margin,
    }
}

/// Exact schedule for rational exponents.
pub fn exact_schedule_rational(
    p: Rational,
    q: Rational,
    n_dim: u32,
    n_max: usize,
    two_star_for_n2: Option<Rational>,
) -> Result<ExactSchedule> {
    if p < Rational::from_integer(2) || q < p {
        return Err(out_of_range("exponents need 2 ≤ p ≤ q"));
    }
    let two_star = sobolev_exponent(n_dim, two_star_for_n2)?;
    Ok(exact_schedule(&big(p), &big(q), &big(two_star), n_max))
}

fn to_rational(x: f64) -> Result<BigRational> {
    BigRational::from_float(x).ok_or_else(|| invalid("non-finite value"))
}

/// Moser exponent schedule for `2 ≤ p ≤ q` in dimension `N`.
///
/// For `N = 2` the Sobolev exponent is `two_star_for_n2` (default 4).
pub fn moser_schedule(
    p: f64,
    q: f64,
    n_dim: u32,
    n_max: usize,
    two_star_for_n2: Option<f64>,
) -> Result<MoserSchedule> {
    if !(p >= 2.0 && q >= p && q.is_finite()) {
        return Err(out_of_range(alloc::format!(
            "exponents need 2 ≤ p ≤ q < ∞, got p = {p}, q = {q}"
        )));
    }
    let two_star_exact = match (n_dim, two_star_for_n2) {
        (2, Some(v)) => {
            if !(v > 2.0 && v.is_finite()) {
                return Err(out_of_range("2* must lie in (2, ∞) for N = 2"));
            }
            to_rational(v)?
        }
        _ => big(sobolev_exponent(n_dim, None)?),
    };
    let exact = exact_schedule(&to_rational(p)?, &to_rational(q)?, &two_star_exact, n_max);
    let two_star = match (n_dim, two_star_for_n2) {
        (2, Some(v)) => v,
        (2, None) => 4.0,
        (n, _) => 2.0 * n as f64 / (n as f64 - 2.0),
    };
    let kappa = two_star / 2.0;
    let alpha0 = ((2.0 * q - two_star * p) / (two_star - 2.0)).max(2.0);
    let mut alphas = vec![alpha0];
    for n in 0..n_max {
        alphas.push((p + alphas[n]) * kappa - q);
    }
    let margin = alpha0 + (two_star * p - 2.0 * q) / (two_star - 2.0);
    let diverges = exact.diverges();
    let limit_exponent = if margin > 0.0 { 1.0 / margin } else { f64::INFINITY };

    let an_q = alphas[n_max] + q;
    let kn = powf(kappa, n_max as f64);
    let weighted: f64 = (0..n_max)
        .map(|j| powf(kappa, j as f64) * (n_max - j) as f64)
        .sum();
    let plain: f64 = (0..n_max).map(|j| powf(kappa, j as f64 + 1.0)).sum();
    Ok(MoserSchedule {
        p,
        q,
        n_dim,
        two_star,
        alpha0,
        alphas,
        limit_exponent,
        diverges,
        exact_identity: exact.identity_holds(),
        observations: [kn / an_q, weighted / an_q, plain / an_q],
    })
}

#[derive(Debug, Clone, Serialize)]
pub struct LipschitzBudget {
    /// `R₀^N [s^{2(α₀+q)/p} + s^{2(α₀+q)/(2-q+p)} + s^{α₀+q}]`, `s = sup_U/R₀`
    pub gamma1: f64,
    pub beta: f64,
    pub final_exponent: f64,
    /// `(Γ₁ + 1)^{final exponent}`, all constants set to one.
    pub bound_up_to_constant: f64,
}

pub fn lipschitz_budget(
    schedule: &MoserSchedule,
    outer_radius: f64,
    sup_u: f64,
) -> Result<LipschitzBudget> {
    let (p, q) = (schedule.p, schedule.q);
    check_exponents(p, q)?;
    if !(outer_radius > 0.0 && outer_radius.is_finite()) {
        return Err(out_of_range("R₀ must be positive"));
    }
    if !(sup_u >= 0.0 && sup_u.is_finite()) {
        return Err(out_of_range("sup|U| must be finite and non-negative"));
    }
    let a = schedule.alpha0 + q;
    let s = sup_u / outer_radius;
    let gamma1 = powf(outer_radius, schedule.n_dim as f64)
        * (powf(s, 2.0 * a / p) + powf(s, 2.0 * a / (2.0 - q + p)) + powf(s, a));
    let final_exponent = schedule.limit_exponent;
    Ok(LipschitzBudget {
        gamma1,
        beta: a - p,
        final_exponent,
        bound_up_to_constant: powf(gamma1 + 1.0, final_exponent),
    })
}

/// One level of the empirical Moser iteration.
#[derive(Debug, Clone, Serialize)]
pub struct MoserLevel {
    pub n: usize,
    pub radius: f64,
    pub exponent: f64,
    /// `Y_n = h² Σ_{|x| ≤ ρ_n} |∇u|^{α_n + q}`
    pub y: f64,
    /// `(Y_{n+1} / (Y_n + 1)^{2*/2})^{1/n}`, the smallest constant making the
    /// step inequality hold; absent for the last level and for `n = 0`.
    pub fitted_constant: Option<f64>,
}

/// Diagnostic: measured `Y_n` on the radii `ρ_n = R₀(1 + 2^{-n})/2` and the
/// per-step constants they imply. Not an acceptance quantity.
pub fn moser_levels(
    field: &DiscreteField,
    schedule: &MoserSchedule,
    outer_radius: f64,
    levels: usize,
) -> Result<Vec<MoserLevel>> {
    let grid = field.grid();
    if !(outer_radius > 0.0 && outer_radius <= grid.half_width()) {
        return Err(out_of_range("R₀ must lie in (0, L]"));
    }
    if levels + 1 > schedule.alphas.len() {
        return Err(out_of_range("schedule is shorter than the requested levels"));
    }
    let grads = discrete_gradient(field);
    let h2 = grid.h() * grid.h();
    let mut out: Vec<MoserLevel> = (0..=levels)
        .map(|n| {
            let radius = 0.5 * outer_radius * (1.0 + powf(0.5, n as f64));
            let exponent = schedule.alphas[n] + schedule.q;
            let y = h2
                * (0..grid.node_count())
                    .filter(|&k| {
                        let x = grid.coord_of(k);
                        hypot(x[0], x[1]) <= radius
                    })
                    .map(|k| powf(hypot(grads[k][0], grads[k][1]), exponent))
                    .sum::<f64>();
            MoserLevel {
                n,
                radius,
                exponent,
                y,
                fitted_constant: None,
            }
        })
        .collect();
    let kappa = schedule.ratio();
    for n in 1..levels {
        let c = powf(out[n + 1].y / powf(out[n].y + 1.0, kappa), 1.0 / n as f64);
        out[n].fitted_constant = Some(c);
    }
    Ok(out)
}

#[derive(Debug, Clone, Serialize)]
pub struct IterationBound {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub alpha: f64,
    pub beta: f64,
    pub theta: f64,
    pub rho: f64,
    pub radius: f64,
    /// Ratio of the radius sequence `t_i = ρ + (1 - λ^i)(R - ρ)`.
    pub lambda: f64,
    /// `t_0 ..= t_15`
    pub radii: Vec<f64>,
    /// Bound for `Z(ρ)`.
    pub bound: f64,
    /// `A(R-ρ)^{-α} + B(R-ρ)^{-β} + C`
    pub single_step: f64,
}

impl IterationBound {
    /// The factor `c(α, β, ϑ)` in `bound = c · single_step`.
    pub fn constant(&self) -> f64 {
        if self.single_step > 0.0 {
            self.bound / self.single_step
        } else {
            1.0
        }
    }
}

const RADII_KEPT: usize = 16;

/// Iterates `Z(t) ≤ ϑ Z(s) + A(s-t)^{-α} + B(s-t)^{-β} + C` along a geometric
/// radius sequence and sums the resulting series in closed form.
#[allow(clippy::too_many_arguments)]
pub fn iteration_lemma_bound(
    a: f64,
    b: f64,
    c: f64,
    alpha: f64,
    beta: f64,
    theta: f64,
    rho: f64,
    radius: f64,
) -> Result<IterationBound> {
    if !(a >= 0.0 && b >= 0.0 && c >= 0.0) || !(a + b + c).is_finite() {
        return Err(out_of_range("A, B, C must be finite and non-negative"));
    }
    if !(alpha > 0.0 && beta > 0.0 && alpha.is_finite() && beta.is_finite()) {
        return Err(out_of_range("α and β must be positive"));
    }
    if !(0.0..1.0).contains(&theta) {
        return Err(out_of_range(alloc::format!(
            "ϑ must lie in [0, 1), got {theta}"
        )));
    }
    if !(rho < radius && radius.is_finite() && rho.is_finite()) {
        return Err(out_of_range("radii need ρ < R"));
    }
    let width = radius - rho;
    let single_step = a * powf(width, -alpha) + b * powf(width, -beta) + c;
    let lambda = if theta == 0.0 {
        0.0
    } else {
        0.5 * (powf(theta, 1.0 / alpha.max(beta)) + 1.0)
    };
    let bound = if theta == 0.0 {
        single_step
    } else {
        let first = (1.0 - lambda) * width;
        a * powf(first, -alpha) / (1.0 - theta * powf(lambda, -alpha))
            + b * powf(first, -beta) / (1.0 - theta * powf(lambda, -beta))
            + c / (1.0 - theta)
    };
    let radii = (0..RADII_KEPT)
        .map(|i| rho + (1.0 - powf(lambda, i as f64)) * width)
        .collect();
    Ok(IterationBound {
        a,
        b,
        c,
        alpha,
        beta,
        theta,
        rho,
        radius,
        lambda,
        radii,
        bound,
        single_step,
    })
}

/// `max |∇_h u|` over nodes with `|x| ≤ radius`.
pub fn sup_gradient(field: &DiscreteField, radius: f64) -> Result<f64> {
    let grid = field.grid();
    if radius > grid.half_width() {
        return Err(out_of_range("radius exceeds the grid half-width"));
    }
    let grads = discrete_gradient(field);
    (0..grid.node_count())
        .filter(|&k| {
            let x = grid.coord_of(k);
            hypot(x[0], x[1]) <= radius
        })
        .map(|k| hypot(grads[k][0], grads[k][1]))
        .reduce(f64::max)
        .ok_or_else(|| out_of_range(alloc::format!("no node within radius {radius}")))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::boundary::BoundarySpec;
    use crate::integrand::Integrand;
    use crate::mesh::Grid;
    use crate::solver::{minimize, SolveConfig};
    use proptest::prelude::*;

    fn solve(f: &Integrand, n: usize, half: f64, spec: &BoundarySpec) -> Solution {
        let grid = Grid::new(n, half).unwrap();
        let trace = spec.mollify(&grid).unwrap();
        minimize(f, &grid, &trace, &SolveConfig::default()).unwrap()
    }

    #[test]
    fn affine_solution_has_zero_caccioppoli_left_side() {
        let sol = solve(
            &Integrand::hong().regularize(0.1).unwrap(),
            33,
            2.0,
            &BoundarySpec::affine([0.3, -1.1], 0.2),
        );
        let cutoff = CutoffField::new(sol.grid(), 0.5, 1.0).unwrap();
        for alpha in [0.0, 1.0, 2.5] {
            let r = caccioppoli_report(&sol, &cutoff, alpha).unwrap();
            assert_eq!(r.left, 0.0);
            assert!(r.right > 0.0);
            assert!(r.pass);
            assert_eq!(r.constant, 0.0);
        }
    }

    #[test]
    fn caccioppoli_constant_is_grid_stable_for_laplace() {
        let spec = BoundarySpec::custom(|x| libm::exp(0.5 * x[0]) * libm::sin(0.5 * x[1]));
        let c = |n| {
            let sol = solve(&Integrand::quadratic(), n, 2.0, &spec);
            let cutoff = CutoffField::new(sol.grid(), 0.5, 1.0).unwrap();
            caccioppoli_report(&sol, &cutoff, 0.0).unwrap().constant
        };
        let (coarse, fine) = (c(65), c(129));
        assert!(coarse.is_finite() && coarse > 0.0);
        assert!((fine - coarse).abs() < 0.25 * coarse, "{coarse} vs {fine}");
    }

    #[test]
    fn caccioppoli_rejects_cutoff_touching_boundary() {
        let sol = solve(&Integrand::quadratic(), 17, 1.0, &BoundarySpec::affine([1.0, 0.0], 0.0));
        let cutoff = CutoffField::new(sol.grid(), 0.5, 1.0).unwrap();
        assert!(caccioppoli_report(&sol, &cutoff, 0.0).is_err());
        let other = CutoffField::new(&Grid::new(33, 1.0).unwrap(), 0.2, 0.5).unwrap();
        assert!(caccioppoli_report(&sol, &other, 0.0).is_err());
        let inside = CutoffField::new(sol.grid(), 0.2, 0.5).unwrap();
        assert!(caccioppoli_report(&sol, &inside, -1.0).is_err());
    }

    #[test]
    fn bracket_example() {
        let (b, e) = higher_integrability_bracket(2.0, 3.0, 2.0, 1.0, 0.5, 1.0, 2).unwrap();
        assert_eq!(e, [4.0, 8.0, 4.0]);
        assert_eq!(b, 288.0);
    }

    #[test]
    fn bracket_rejects_q_at_or_above_p_plus_two() {
        for q in [4.0, 4.5] {
            assert!(matches!(
                higher_integrability_bracket(2.0, q, 2.0, 1.0, 0.5, 1.0, 2),
                Err(Error::UnsupportedRegime { .. })
            ));
        }
        assert!(higher_integrability_bracket(2.0, 3.0, 1.5, 1.0, 0.5, 1.0, 2).is_err());
    }

    #[test]
    fn zero_data_give_zero_left_side() {
        let sol = solve(
            &Integrand::anisotropic_power(2.0, 3.0).unwrap().regularize(0.1).unwrap(),
            17,
            1.0,
            &BoundarySpec::affine([0.0, 0.0], 0.0),
        );
        let r = higher_integrability_report(&sol.field, 2.0, 3.0, 2.0, 0.5, 1.0, 0.0).unwrap();
        assert_eq!(r.left, 0.0);
        assert_eq!(r.bracket, 0.0);
    }

    #[test]
    fn schedule_examples() {
        let s = moser_schedule(2.0, 3.0, 3, 30, None).unwrap();
        assert_eq!(s.two_star, 6.0);
        assert_eq!(s.alpha0, 2.0);
        assert_eq!(&s.alphas[..3], &[2.0, 9.0, 30.0]);
        assert!((s.limit_exponent - 2.0 / 7.0).abs() < 1e-15);
        assert!(s.diverges && s.exact_identity);
        assert!((s.limit_ratio(30).unwrap() - s.limit_exponent).abs() < 1e-9);
        assert!((s.observations[0] - s.limit_exponent).abs() < 1e-9);

        let s = moser_schedule(2.0, 2.0, 4, 10, None).unwrap();
        assert_eq!(s.two_star, 4.0);
        assert_eq!(&s.alphas[..3], &[2.0, 6.0, 14.0]);
        assert!(s.diverges);

        let s = moser_schedule(2.0, 3.0, 2, 5, None).unwrap();
        assert_eq!(s.two_star, 4.0);
        let s = moser_schedule(2.0, 3.0, 2, 5, Some(3.0)).unwrap();
        assert_eq!(s.two_star, 3.0);
        assert!(moser_schedule(2.0, 3.0, 2, 5, Some(2.0)).is_err());
        assert!(moser_schedule(1.5, 3.0, 3, 5, None).is_err());
        assert!(moser_schedule(3.0, 2.0, 3, 5, None).is_err());
    }

    #[test]
    fn stationary_schedule_does_not_diverge() {
        // N = 3, p = 2, q = 14: α₀ = (28 - 12)/4 = 4 is the fixed point
        let s = moser_schedule(2.0, 14.0, 3, 20, None).unwrap();
        assert_eq!(s.alpha0, 4.0);
        assert!(s.alphas.iter().all(|&a| a == 4.0));
        assert!(!s.diverges);
        assert!(s.limit_exponent.is_infinite());
    }

    #[test]
    fn exact_identity_for_rational_inputs() {
        let r = |a, b| Rational::new(a, b);
        for (p, q, n) in [(r(2, 1), r(10, 3), 6), (r(3, 1), r(15, 2), 6), (r(4, 1), r(28, 5), 7)] {
            let s = exact_schedule_rational(p, q, n, 20, None).unwrap();
            assert!(s.identity_holds());
            assert_eq!(s.recurrence.len(), 21);
        }
    }

    #[test]
    fn budget_examples() {
        let s = moser_schedule(2.0, 3.0, 3, 30, None).unwrap();
        let b = lipschitz_budget(&s, 1.0, 1.0).unwrap();
        assert_eq!(b.gamma1, 3.0);
        assert_eq!(b.beta, 3.0);
        assert!((b.bound_up_to_constant - libm::pow(4.0, 2.0 / 7.0)).abs() < 1e-14);
        let zero = lipschitz_budget(&s, 1.0, 0.0).unwrap();
        assert_eq!(zero.gamma1, 0.0);
        assert_eq!(zero.bound_up_to_constant, 1.0);
        let doubled = lipschitz_budget(&s, 1.0, 2.0).unwrap();
        assert!(doubled.gamma1 > b.gamma1);
        let hong = moser_schedule(2.0, 4.0, 3, 5, None).unwrap();
        assert!(matches!(
            lipschitz_budget(&hong, 1.0, 1.0),
            Err(Error::UnsupportedRegime { .. })
        ));
    }

    #[test]
    fn iteration_lemma_special_cases() {
        let b = iteration_lemma_bound(2.0, 3.0, 0.5, 2.0, 1.0, 0.0, 0.25, 1.0).unwrap();
        let exact = 2.0 / 0.5625 + 3.0 / 0.75 + 0.5;
        assert!((b.bound - exact).abs() < 1e-14);
        let b = iteration_lemma_bound(0.0, 0.0, 1.5, 2.0, 1.0, 0.6, 0.25, 1.0).unwrap();
        assert!((b.bound - 1.5 / 0.4).abs() < 1e-14);
        assert!(iteration_lemma_bound(1.0, 0.0, 0.0, 2.0, 1.0, 1.0, 0.5, 1.0).is_err());
        assert!(iteration_lemma_bound(1.0, 0.0, 0.0, 2.0, 1.0, 0.5, 1.0, 0.5).is_err());
    }

    #[test]
    fn iteration_lemma_matches_partial_sums() {
        let b = iteration_lemma_bound(1.0, 0.0, 0.0, 2.0, 4.0, 0.5, 0.5, 1.0).unwrap();
        assert!(b.bound >= 4.0 && b.bound.is_finite());
        let lambda = b.lambda;
        let t = |i: i32| 0.5 + (1.0 - lambda.powi(i)) * 0.5;
        let oracle: f64 = (0..60)
            .map(|i| 0.5f64.powi(i) * (t(i + 1) - t(i)).powi(-2))
            .sum();
        assert!((b.bound - oracle).abs() < 1e-12 * b.bound, "{} vs {oracle}", b.bound);
        assert!((b.radii[1] - t(1)).abs() < 1e-15);
    }

    #[test]
    fn sup_gradient_examples() {
        let grid = Grid::new(65, 1.0).unwrap();
        let affine = DiscreteField::from_fn(grid, |x| 3.0 * x[0] + 4.0 * x[1]).unwrap();
        assert!((sup_gradient(&affine, 0.5).unwrap() - 5.0).abs() < 1e-12);
        assert_eq!(sup_gradient(&DiscreteField::zeros(grid), 0.5).unwrap(), 0.0);
        assert!(sup_gradient(&affine, 1e-3).is_ok());
        assert!(sup_gradient(&affine, 2.0).is_err());

        let sol = solve(
            &Integrand::quadratic(),
            65,
            1.0,
            &BoundarySpec::custom(|x| x[0] * x[0] - x[1] * x[1]),
        );
        let s = sup_gradient(&sol.field, 0.5).unwrap();
        assert!((s - 1.0).abs() < 0.02, "{s}");
    }

    proptest! {
        #[test]
        fn closed_form_equals_recurrence(p in 2i64..8, dq in 0i64..24, den in 1i64..6, n in 2u32..9) {
            let p = Rational::from_integer(p);
            let q = p + Rational::new(dq, den);
            let s = exact_schedule_rational(p, q, n, 20, None).unwrap();
            prop_assert!(s.identity_holds());
            // divergence flag from the margin test
            let f = moser_schedule(
                *p.numer() as f64,
                *q.numer() as f64 / *q.denom() as f64,
                n,
                20,
                None,
            ).unwrap();
            prop_assert_eq!(f.diverges, s.diverges());
            prop_assert_eq!(s.diverges(), !s.is_stationary());
        }

        #[test]
        fn iteration_bound_dominates_and_grows(
            a in 0.0f64..5.0, b in 0.0f64..5.0, c in 0.0f64..5.0,
            alpha in 0.5f64..4.0, beta in 0.5f64..4.0,
            t1 in 0.0f64..0.9, dt in 0.0f64..0.09,
        ) {
            let lo = iteration_lemma_bound(a, b, c, alpha, beta, t1, 0.2, 1.0).unwrap();
            let hi = iteration_lemma_bound(a, b, c, alpha, beta, t1 + dt, 0.2, 1.0).unwrap();
            let single = iteration_lemma_bound(a, b, c, alpha, beta, 0.0, 0.2, 1.0).unwrap();
            prop_assert!(lo.bound.is_finite());
            prop_assert!(lo.bound >= c);
            prop_assert!(lo.bound >= single.bound * (1.0 - 1e-12));
            prop_assert!(hi.bound >= lo.bound * (1.0 - 1e-12));
        }

        #[test]
        fn iteration_bound_matches_long_partial_sum(
            a in 0.1f64..3.0, alpha in 0.5f64..3.0, theta in 0.05f64..0.8,
        ) {
            let r = iteration_lemma_bound(a, 0.0, 1.0, alpha, alpha, theta, 0.0, 1.0).unwrap();
            let l = r.lambda;
            let oracle: f64 = (0..4000)
                .map(|i| theta.powi(i) * (a * ((1.0 - l) * l.powi(i)).powf(-alpha) + 1.0))
                .take_while(|t| t.is_finite())
                .sum();
            prop_assert!((r.bound - oracle).abs() <= 1e-9 * r.bound, "{} vs {}", r.bound, oracle);
        }

        #[test]
        fn gamma_is_monotone_in_data(sup in 0.0f64..5.0, factor in 1.01f64..3.0) {
            let s = moser_schedule(2.0, 3.0, 3, 10, None).unwrap();
            let a = lipschitz_budget(&s, 1.0, sup).unwrap();
            let b = lipschitz_budget(&s, 1.0, sup * factor + 1e-3).unwrap();
            prop_assert!(b.gamma1 > a.gamma1);
        }
    }
}
