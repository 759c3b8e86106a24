//! Acceptance gate. Runs every criterion in sequence, prints one line per
//! criterion and exits non-zero if any fails.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector};
use num_rational::BigRational;
use pqreg::config::{BoundaryConfig, ExperimentConfig, IntegrandConfig};
use pqreg::experiments::{
    run_estimates, run_hong_experiment, run_refinement_study, run_sigma_sweep, run_solve,
};
use pqreg_core::boundary::BoundarySpec;
use pqreg_core::estimates::{exact_schedule_rational, higher_integrability_bracket};
use pqreg_core::phase::{check_table1, classify, render_table, Upper, TABLE1_N, TABLE1_P};
use pqreg_core::solver::{max_principle_check, minimality_probe};
use pqreg_core::{
    minimize, moser_schedule, Error, Grid, Integrand, Rational, SolveConfig, Solution,
};

struct Outcome {
    checks: Vec<(bool, String)>,
}

impl Outcome {
    fn new() -> Self {
        Outcome { checks: Vec::new() }
    }

    fn check(&mut self, pass: bool, detail: impl Into<String>) {
        self.checks.push((pass, detail.into()));
    }

    fn timed(&mut self, elapsed: Duration, limit: Duration, what: &str) {
        self.check(
            elapsed < limit,
            format!("{what} took {:.3} s (limit {} s)", elapsed.as_secs_f64(), limit.as_secs_f64()),
        );
    }

    fn pass(&self) -> bool {
        !self.checks.is_empty() && self.checks.iter().all(|c| c.0)
    }
}

fn solve(f: &Integrand, grid: &Grid, spec: &BoundarySpec) -> Solution {
    let trace = spec.mollify(grid).expect("boundary trace");
    minimize(f, grid, &trace, &SolveConfig::default()).expect("solve converges")
}

fn config(integrand: IntegrandConfig, boundary: BoundaryConfig, n: usize, sigma: Vec<f64>) -> ExperimentConfig {
    let mut cfg = ExperimentConfig::default();
    cfg.integrand = integrand;
    cfg.boundary = boundary;
    cfg.grid.n = n;
    cfg.sigma = sigma;
    cfg
}

const ANISO: IntegrandConfig = IntegrandConfig::AnisotropicPower { p: 2.0, q: 3.0 };
const TRIG: BoundaryConfig = BoundaryConfig::Trig {
    amplitude: 1.0,
    frequencies: [PI / 2.0, PI / 2.0],
};
const AFFINE_SLOPE: [f64; 2] = [0.7, -0.4];
const AFFINE_OFFSET: f64 = 0.3;

fn saddle_spec() -> BoundarySpec {
    BoundarySpec::custom(|x| x[0] * x[0] - x[1] * x[1])
}

fn criterion_1() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut out = Vec::new();
    let mut err = Vec::new();
    let code = pqreg::cli::run(["pqreg", "phase", "--check-table1"], &mut out, &mut err);
    let elapsed = start.elapsed();
    let text = String::from_utf8_lossy(&out);
    o.check(code == 0, format!("phase --check-table1 exit code {code}"));
    o.check(
        text.contains("PASS Table 1: 54 cells compared") && !text.contains("MISMATCH"),
        "all 54 cells match (values, strictness, ∞ cells, shading)",
    );
    let check = check_table1();
    o.check(
        check.cells.len() == 54 && check.mismatches == 0,
        format!("{} cells, {} mismatches", check.cells.len(), check.mismatches),
    );
    o.timed(elapsed, Duration::from_secs(1), "table check");
    o
}

fn criterion_2() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let a = AFFINE_SLOPE;
    let affine = BoundaryConfig::Affine {
        slope: a,
        offset: AFFINE_OFFSET,
    };
    let cases: [(IntegrandConfig, fn([f64; 2]) -> f64); 3] = [
        (ANISO, |a| a[0] * a[0] + a[1] * a[1] + a[1].abs().powi(3)),
        (IntegrandConfig::Hong, |a| a[0] * a[0] + a[1] * a[1] + a[1].powi(4)),
        (IntegrandConfig::Quadratic, |a| a[0] * a[0] + a[1] * a[1]),
    ];
    for (integrand, f) in cases {
        for sigma in [1e-1, 1e-3] {
            let cfg = config(integrand.clone(), affine.clone(), 65, vec![sigma]);
            let (sol, report) = run_solve(&cfg).expect("affine solve");
            let grid = sol.grid();
            let max_err = grid
                .interior_indices()
                .into_iter()
                .chain(grid.boundary_indices())
                .map(|k| {
                    let x = grid.coord_of(k);
                    (sol.field.values()[k] - (a[0] * x[0] + a[1] * x[1] + AFFINE_OFFSET)).abs()
                })
                .fold(0.0, f64::max);
            // oracle: f_σ(a) written out by hand, times the area of [-2, 2]²
            let expected = 16.0 * (f(a) + 0.5 * sigma * (a[0] * a[0] + a[1] * a[1]));
            let rel = (sol.energy - expected).abs() / expected;
            o.check(
                max_err <= 1e-10 && rel <= 1e-12,
                format!(
                    "{} σ={sigma}: nodal error {max_err:.2e}, energy relative error {rel:.2e}",
                    report.integrand
                ),
            );
        }
    }
    o.timed(start.elapsed(), Duration::from_secs(5), "six affine solves");
    o
}

/// Solves the 5-point Laplace system on the interior with a dense Cholesky
/// factorization.
fn laplace_oracle(grid: &Grid, boundary: impl Fn([f64; 2]) -> f64) -> Vec<f64> {
    let n = grid.n();
    let m = n - 2;
    let idx = |i: usize, j: usize| (j - 1) * m + (i - 1);
    let mut a = DMatrix::<f64>::zeros(m * m, m * m);
    let mut b = DVector::<f64>::zeros(m * m);
    for j in 1..n - 1 {
        for i in 1..n - 1 {
            let row = idx(i, j);
            a[(row, row)] = 4.0;
            for (ni, nj) in [(i - 1, j), (i + 1, j), (i, j - 1), (i, j + 1)] {
                if grid.is_boundary(ni, nj) {
                    b[row] += boundary(grid.coord(ni, nj));
                } else {
                    a[(row, idx(ni, nj))] = -1.0;
                }
            }
        }
    }
    let x = a.cholesky().expect("SPD").solve(&b);
    (0..n * n)
        .map(|k| {
            let (i, j) = grid.ij(k);
            if grid.is_boundary(i, j) {
                boundary(grid.coord(i, j))
            } else {
                x[idx(i, j)]
            }
        })
        .collect()
}

fn criterion_3_solution() -> (Solution, Duration) {
    let grid = Grid::new(33, 1.0).unwrap();
    let start = Instant::now();
    let sol = solve(&Integrand::quadratic(), &grid, &saddle_spec());
    (sol, start.elapsed())
}

fn criterion_3() -> Outcome {
    let mut o = Outcome::new();
    let (sol, elapsed) = criterion_3_solution();
    let oracle = laplace_oracle(sol.grid(), |x| x[0] * x[0] - x[1] * x[1]);
    let diff = sol
        .field
        .values()
        .iter()
        .zip(&oracle)
        .map(|(u, v)| (u - v).abs())
        .fold(0.0, f64::max);
    o.check(diff <= 1e-8, format!("max nodal difference vs 5-point oracle {diff:.2e}"));
    o.check(sol.integrand.sigma() == 0.0, "σ = 0");
    o.timed(elapsed, Duration::from_secs(2), "33² quadratic solve");
    o
}

fn max_principle_holds(sol: &Solution) -> (bool, f64, f64) {
    let grid = sol.grid();
    let v = sol.field.values();
    let interior = grid.interior_indices().into_iter().map(|k| v[k].abs()).fold(0.0, f64::max);
    let boundary = grid.boundary_indices().into_iter().map(|k| v[k].abs()).fold(0.0, f64::max);
    let pass = interior <= boundary + 1e-12 * (1.0 + boundary);
    (pass && max_principle_check(sol).pass == pass, interior, boundary)
}

fn criterion_4() -> Outcome {
    let mut o = Outcome::new();
    let mut record = |label: String, sol: &Solution| {
        let (pass, interior, boundary) = max_principle_holds(sol);
        o.check(pass, format!("{label}: interior {interior:.6} vs boundary {boundary:.6}"));
    };
    let affine = BoundarySpec::affine(AFFINE_SLOPE, AFFINE_OFFSET);
    let base = [
        Integrand::anisotropic_power(2.0, 3.0).unwrap(),
        Integrand::hong(),
        Integrand::quadratic(),
    ];
    let g65 = Grid::new(65, 2.0).unwrap();
    for f in &base {
        for sigma in [1e-1, 1e-3] {
            let sol = solve(&f.regularize(sigma).unwrap(), &g65, &affine);
            record(format!("criterion 2 {} σ={sigma}", f.kind().name()), &sol);
        }
    }
    let (sol, _) = criterion_3_solution();
    record("criteria 3, 5 Laplace".into(), &sol);
    let trig = BoundarySpec::trig(1.0, [PI / 2.0, PI / 2.0]).with_epsilon(0.05);
    let aniso = Integrand::anisotropic_power(2.0, 3.0).unwrap();
    for sigma in [1e-1, 1e-2, 5e-3, 2.5e-3, 1e-3, 1.25e-3] {
        let sol = solve(&aniso.regularize(sigma).unwrap(), &g65, &trig);
        record(format!("criteria 6, 9, 11 anisotropic 65² σ={sigma}"), &sol);
    }
    for n in [33, 129] {
        let g = Grid::new(n, 2.0).unwrap();
        let sol = solve(&aniso.regularize(1.25e-3).unwrap(), &g, &trig);
        record(format!("criterion 11 anisotropic {n}²"), &sol);
    }
    for n in [33, 65, 129] {
        let g = Grid::new(n, 2.0).unwrap();
        let sol = solve(&Integrand::quadratic().regularize(1.25e-3).unwrap(), &g, &trig);
        record(format!("criterion 11 quadratic {n}²"), &sol);
    }
    let hong_trig = BoundarySpec::trig(1.0, [PI, 0.0]).with_epsilon(0.05);
    let sol = solve(&Integrand::hong().regularize(1.25e-3).unwrap(), &g65, &hong_trig);
    record("criterion 10 Hong N=2".into(), &sol);
    o
}

fn criterion_5() -> Outcome {
    let mut o = Outcome::new();
    let (sol, _) = criterion_3_solution();
    let nodes = sol.grid().node_count() as f64;
    let report = minimality_probe(&sol, 100, 1e-3, 2024);
    o.check(
        report.pass && report.trials == 100 && report.min_difference >= -1e-12 * nodes,
        format!(
            "100 perturbations: smallest energy change {:.3e} (allowed −{:.3e})",
            report.min_difference,
            1e-12 * nodes
        ),
    );
    let mut corrupted = sol.clone();
    let c = corrupted.grid().index(16, 16);
    corrupted.field.values_mut()[c] += 0.1;
    let control = minimality_probe(&corrupted, 100, 1e-3, 2024);
    o.check(
        !control.pass && control.min_difference < -1e-12 * nodes,
        format!("corrupted control registers a decrease {:.3e}", control.min_difference),
    );
    o
}

fn criterion_6() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut cfg = config(ANISO, TRIG, 65, vec![1e-1, 1e-2, 1e-3]);
    cfg.alpha = vec![0.0, 1.0, 2.0];
    cfg.radii.inner = 0.5;
    cfg.radii.outer = 1.0;
    let report = run_estimates(&cfg).expect("estimates");
    let constants: Vec<f64> = report
        .rows
        .iter()
        .flat_map(|r| r.caccioppoli.iter().map(|c| c.constant))
        .collect();
    let finite = constants.len() == 9 && constants.iter().all(|c| c.is_finite() && *c > 0.0);
    o.check(finite, format!("{} finite positive constants", constants.len()));
    let hi = constants.iter().cloned().fold(f64::MIN, f64::max);
    let lo = constants.iter().cloned().fold(f64::MAX, f64::min);
    o.check(hi / lo <= 10.0, format!("max/min = {:.3}", hi / lo));
    o.check(
        report.affine_control_left == 0.0,
        format!("affine control left side {:e}", report.affine_control_left),
    );
    o.timed(start.elapsed(), Duration::from_secs(120), "nine Caccioppoli runs");
    o
}

/// Table-1 parameter cells with candidate rational q values: p, every finite
/// endpoint, the midpoints between p and those endpoints, and p + 1.
fn moser_cells() -> Vec<(Rational, Rational, u32)> {
    let p_list: Vec<Rational> = TABLE1_P.iter().map(|&p| Rational::from_integer(p)).collect();
    let cells = render_table(&p_list, &TABLE1_N).unwrap();
    let mut out: Vec<(Rational, Rational, u32)> = Vec::new();
    for c in &cells {
        let p = c.p;
        let mut qs = vec![p, p + Rational::from_integer(1)];
        if let Upper::Finite { value, .. } = c.interval.upper {
            if value >= p {
                qs.push(value);
                qs.push((p + value) / Rational::from_integer(2));
            }
        }
        for q in qs {
            if !out.contains(&(p, q, c.n_dim)) {
                out.push((p, q, c.n_dim));
            }
        }
    }
    out
}

fn to_f64(r: Rational) -> f64 {
    *r.numer() as f64 / *r.denom() as f64
}

fn criterion_7() -> Outcome {
    let mut o = Outcome::new();
    let cells = moser_cells();
    let mut identity_failures = Vec::new();
    let mut flag_failures = Vec::new();
    let mut limit_failures = Vec::new();
    let mut limit_checked = 0;
    let mut worst_checked: f64 = 0.0;
    let mut unattainable: Vec<String> = Vec::new();
    let big = |x: i64| BigRational::from_integer(x.into());
    let tol = BigRational::new(1.into(), 1_000_000_000.into());
    let rel_tol = BigRational::new(1.into(), 1_000_000_000_000i64.into());
    for &(p, q, n) in &cells {
        let exact = exact_schedule_rational(p, q, n, 20, None).unwrap();
        if !exact.identity_holds() || exact.recurrence.len() != 21 {
            identity_failures.push(format!("({p},{q},{n})"));
        }
        // oracle: α_{n+1} - α_n = κ^n (α_1 - α_0), so the sequence grows
        // without bound iff its first step is positive
        let grows = exact.recurrence[1] > exact.recurrence[0];
        let s = moser_schedule(to_f64(p), to_f64(q), n, 30, None).unwrap();
        if exact.diverges() != grows || s.diverges != grows {
            flag_failures.push(format!("({p},{q},{n})"));
        }
        if !grows {
            continue;
        }
        // exact (2*/2)^30 / (α_30 + q) and its distance to the limit exponent
        let long = exact_schedule_rational(p, q, n, 30, None).unwrap();
        let kappa = &long.two_star / big(2);
        let mut k30 = big(1);
        for _ in 0..30 {
            k30 *= &kappa;
        }
        let q_big = BigRational::new((*q.numer()).into(), (*q.denom()).into());
        let ratio = &k30 / (&long.recurrence[30] + &q_big);
        let limit = long.divergence_margin.recip();
        let exact_gap = if ratio > limit { &ratio - &limit } else { &limit - &ratio };
        let computed = s.limit_ratio(30).unwrap();
        let gap = (computed - s.limit_exponent).abs();
        let matches_exact = {
            let c = BigRational::from_float(computed).unwrap();
            let d = if c > ratio { &c - &ratio } else { &ratio - &c };
            d <= &rel_tol * &ratio
        };
        if exact_gap < tol {
            limit_checked += 1;
            worst_checked = worst_checked.max(gap);
            if !(gap < 1e-9 && matches_exact) {
                limit_failures.push(format!("({p},{q},{n}) gap {gap:.2e}"));
            }
        } else {
            if !matches_exact {
                limit_failures.push(format!("({p},{q},{n}) ratio {computed:e} differs from the exact value"));
            }
            unattainable.push(format!("({p},{q},{n}) {gap:.1e}"));
        }
    }
    o.check(
        identity_failures.is_empty(),
        format!(
            "closed form = recurrence for n ≤ 20 on {} (p,q,N) cells {:?}",
            cells.len(),
            identity_failures
        ),
    );
    o.check(flag_failures.is_empty(), format!("divergence flag agrees with the exact sequence {flag_failures:?}"));
    let example = moser_schedule(2.0, 3.0, 3, 30, None).unwrap();
    let example_gap = (example.limit_ratio(30).unwrap() - 2.0 / 7.0).abs();
    o.check(
        example.alpha0 == 2.0 && example_gap < 1e-9,
        format!("(2,3,3): α₀ = {}, |ratio − 2/7| = {example_gap:.2e}", example.alpha0),
    );
    o.check(
        limit_failures.is_empty() && limit_checked > 0,
        format!(
            "limit ratio within 1e-9 at n = 30 on all {limit_checked} diverging cells where the exact gap is below 1e-9 (worst {worst_checked:.2e}); f64 ratio matches exact arithmetic to 1e-12 on every cell {limit_failures:?}"
        ),
    );
    // The ratio approaches its limit like (2*/2)^{-n}; for the remaining
    // cells the exact value at n = 30 is itself more than 1e-9 away.
    if !unattainable.is_empty() {
        println!(
            "    note: {} diverging cells have an exact gap ≥ 1e-9 at n = 30, e.g. {}",
            unattainable.len(),
            unattainable.iter().take(4).cloned().collect::<Vec<_>>().join(", ")
        );
    }
    let q3 = exact_schedule_rational(
        Rational::from_integer(2),
        Rational::from_integer(14),
        3,
        10,
        None,
    )
    .unwrap();
    o.check(
        q3.divergence_margin == BigRational::from_integer(0.into()) && !q3.diverges() && q3.recurrence.iter().all(|a| *a == q3.alpha0),
        "stationary sequence at (2,14,3) is flagged as non-divergent",
    );
    o
}

fn criterion_8() -> Outcome {
    let mut o = Outcome::new();
    let (value, _) = higher_integrability_bracket(2.0, 3.0, 2.0, 1.0, 0.5, 1.0, 2).unwrap();
    o.check(value == 288.0, format!("bracket = {value:?}"));
    for q in [4.0, 4.5, 7.0] {
        let r = higher_integrability_bracket(2.0, q, 2.0, 1.0, 0.5, 1.0, 2);
        o.check(
            matches!(r, Err(Error::UnsupportedRegime { .. })),
            format!("q = {q} rejected as unsupported regime"),
        );
    }
    o
}

fn criterion_9() -> Outcome {
    let mut o = Outcome::new();
    let start = Instant::now();
    let mut cfg = config(ANISO, TRIG, 65, vec![1e-2, 5e-3, 2.5e-3, 1.25e-3]);
    cfg.epsilon = vec![0.05];
    let report = run_sigma_sweep(&cfg, 0.05).expect("sweep");
    o.check(report.rows.len() == 4, format!("{} rows", report.rows.len()));
    let ratios: Vec<f64> = report
        .rows
        .windows(2)
        .map(|w| w[1].sup_gradient / w[0].sup_gradient)
        .collect();
    o.check(ratios.iter().all(|r| *r <= 1.1), format!("sup-gradient ratios {ratios:.5?}"));
    let chain_ok = report.rows.iter().all(|r| {
        let slack = |b: f64| 1e-12 * (1.0 + b.abs());
        r.chain.windows(2).all(|w| w[0] <= w[1] + slack(w[1])) && r.chain_holds
    });
    o.check(chain_ok, "energy chain ordered on every row");
    let d: Vec<f64> = report.rows.iter().filter_map(|r| r.distance_to_previous).collect();
    o.check(
        d.len() == 3 && d.windows(2).all(|w| w[1] < w[0]),
        format!("W^(1,p) distances {d:?}"),
    );
    o.timed(start.elapsed(), Duration::from_secs(180), "σ-sweep");
    o
}

fn criterion_10() -> Outcome {
    let mut o = Outcome::new();
    let dims = [2u32, 3, 4, 5, 6, 7, 8, 10];
    let cfg = config(IntegrandConfig::Hong, TRIG, 65, vec![1e-2, 1.25e-3]);
    let report = run_hong_experiment(&dims, &cfg).expect("hong");
    for row in &report.rows {
        let c = &row.classification;
        // oracle: the boundedness threshold (N-1)p/(N-1-p) for p < N-1 is
        // 2(N-1)/(N-3); q = 4 exceeds it iff N > 5
        let n = row.n_dim as i64;
        let risk = n > 3 && 4 * (n - 3) > 2 * (n - 1);
        let direct = classify(Rational::from_integer(2), Rational::from_integer(4), row.n_dim).unwrap();
        o.check(
            c.unbounded_risk == (row.n_dim >= 6)
                && c.unbounded_risk == risk
                && c.bounded_by_hs == (row.n_dim <= 5)
                && direct == *c,
            format!("N={}: unbounded risk {}, bounded {}", row.n_dim, c.unbounded_risk, c.bounded_by_hs),
        );
    }
    match &report.solve {
        Some(s) => {
            o.check(s.max_principle.pass, format!("N=2 solve max principle ({:.6} ≤ {:.6})", s.max_principle.interior_max, s.max_principle.boundary_max));
            let nodes = (s.n * s.n) as f64;
            o.check(
                s.probe.pass && s.probe.trials == 100 && s.probe.min_difference >= -1e-12 * nodes,
                format!("N=2 solve local minimality, smallest change {:.3e}", s.probe.min_difference),
            );
        }
        None => o.check(false, "no N=2 solve"),
    }
    o
}

fn criterion_11() -> Outcome {
    let mut o = Outcome::new();
    let sizes = [33, 65, 129];
    let quad = run_refinement_study(&config(IntegrandConfig::Quadratic, TRIG, 65, vec![1.25e-3]), &sizes)
        .expect("quadratic refinement");
    let e: Vec<f64> = quad.rows.iter().map(|r| r.energy).collect();
    let (d1, d2) = ((e[1] - e[0]).abs(), (e[2] - e[1]).abs());
    o.check(
        d1 >= 3.0 * d2 && quad.energy_deltas_shrink,
        format!("quadratic energy deltas {d1:.3e}, {d2:.3e} (ratio {:.2})", d1 / d2),
    );
    let aniso = run_refinement_study(&config(ANISO, TRIG, 65, vec![1.25e-3]), &sizes)
        .expect("anisotropic refinement");
    let s: Vec<f64> = aniso.rows.iter().map(|r| r.sup_gradient).collect();
    let change = (s[2] - s[1]).abs() / s[2].abs().max(s[1].abs());
    o.check(
        change <= 0.1 && aniso.sup_gradient_stable,
        format!("anisotropic sup-gradient {:.5} → {:.5} (relative change {change:.2e})", s[1], s[2]),
    );
    o
}

fn main() {
    let criteria: [(u32, fn() -> Outcome); 11] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
        (8, criterion_8),
        (9, criterion_9),
        (10, criterion_10),
        (11, criterion_11),
    ];
    let mut failed = Vec::new();
    for (id, run) in criteria {
        let start = Instant::now();
        let outcome = catch_unwind(AssertUnwindSafe(run));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(o) => {
                let status = if o.pass() { "PASS" } else { "FAIL" };
                println!("criterion {id}: {status} ({secs:.2} s)");
                for (pass, detail) in &o.checks {
                    println!("    [{}] {detail}", if *pass { "ok" } else { "FAILED" });
                }
                if !o.pass() {
                    failed.push(id);
                }
            }
            Err(_) => {
                println!("criterion {id}: FAIL (panicked after {secs:.2} s)");
                failed.push(id);
            }
        }
    }
    if failed.is_empty() {
        println!("acceptance: all 11 criteria pass");
    } else {
        println!("acceptance: failing criteria {failed:?}");
        std::process::exit(1);
    }
}
