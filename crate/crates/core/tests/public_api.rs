use std::f64::consts::PI;

use pqreg_core::phase::{admissible_interval, classify};
use pqreg_core::solver::{initial_field, max_principle_check};
use pqreg_core::{
    energy, minimize, BoundarySpec, Criterion, DiscreteField, Grid, InitialGuess, Integrand,
    Rational, SolveConfig,
};
use proptest::prelude::*;

fn hong_solution() -> (pqreg_core::Solution, Vec<f64>) {
    let grid = Grid::new(25, 1.0).unwrap();
    let f = Integrand::hong().regularize(0.05).unwrap();
    let trace = BoundarySpec::trig(0.8, [PI, PI / 2.0]).mollify(&grid).unwrap();
    let sol = minimize(&f, &grid, &trace, &SolveConfig::default()).unwrap();
    (sol, trace)
}

#[test]
fn minimizer_beats_the_affine_fit_and_zero_interior() {
    let (sol, trace) = hong_solution();
    let grid = *sol.grid();
    for guess in [InitialGuess::AffineFit, InitialGuess::ZeroInterior] {
        let v = initial_field(&grid, &trace, &guess).unwrap();
        assert!(sol.energy <= energy(&v, &sol.integrand));
    }
    assert!(max_principle_check(&sol).pass);
    assert!(sol.descent_is_monotone());
    assert_eq!(sol.field.boundary_trace(), trace);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(32))]

    // Any interior perturbation of the discrete minimizer raises the energy,
    // and along the segment to it the energy is convex.
    #[test]
    fn energy_is_minimal_and_convex_along_segments(seed in any::<u64>(), scale in 1e-3f64..1.0) {
        let (sol, _) = hong_solution();
        let grid = *sol.grid();
        let mut state = seed | 1;
        let mut v = sol.field.values().to_vec();
        for k in grid.interior_indices() {
            state ^= state << 13;
            state ^= state >> 7;
            state ^= state << 17;
            v[k] += scale * ((state % 2001) as f64 / 1000.0 - 1.0);
        }
        let w = DiscreteField::new(grid, v.clone()).unwrap();
        let mid: Vec<f64> = v.iter().zip(sol.field.values()).map(|(a, b)| 0.5 * (a + b)).collect();
        let mid = DiscreteField::new(grid, mid).unwrap();
        let (e0, e1, em) = (sol.energy, energy(&w, &sol.integrand), energy(&mid, &sol.integrand));
        let slack = 1e-12 * grid.node_count() as f64;
        prop_assert!(e1 >= e0 - slack);
        prop_assert!(em <= 0.5 * (e0 + e1) + slack);
    }

    // Classification flags agree with the admissible intervals they summarize.
    #[test]
    fn classification_matches_intervals(p in 2i64..6, num in 0i64..40, n_dim in 2u32..10) {
        let p = Rational::from_integer(p);
        let q = p + Rational::new(num, 4);
        let c = classify(p, q, n_dim).unwrap();
        let inside = |k| admissible_interval(k, p, n_dim).unwrap().contains(q);
        prop_assert_eq!(c.lipschitz_by_paper, inside(Criterion::ThisPaperCombined));
        prop_assert_eq!(c.bounded_by_hs, inside(Criterion::HirschSchaffner));
        prop_assert!(!(c.unbounded_risk && c.bounded_by_hs));
        prop_assert!(!c.lipschitz_by_paper || c.bounded_by_hs);
    }
}
