//! Numerical laboratory for scalar variational integrals with (p,q)-growth.
//!
//! The crate solves the quadratically regularized minimization problem
//! `min ∫ f(∇v) + σ/2 |∇v|²` over a uniform square grid with Dirichlet data,
//! and measures the classical a priori estimates on the discrete minimizers:
//! the Caccioppoli inequality for second derivatives, higher integrability of
//! the gradient, the Moser exponent schedule and the resulting Lipschitz
//! budget. The admissibility diagram comparing the known Lipschitz and
//! boundedness restrictions on `q` is evaluated in exact rational arithmetic.
//!
//! The crate is `no_std` and only needs `alloc`. File formats, the experiment
//! driver and the command line live in the `pqreg` crate.
#![no_std]

extern crate alloc;
#[cfg(test)]
extern crate std;

mod banded;
pub mod boundary;
pub mod error;
pub mod estimates;
pub mod integrand;
pub(crate) mod math;
pub mod mesh;
pub mod phase;
pub mod solver;

pub use boundary::{BoundaryKind, BoundarySpec};
pub use error::{Error, Result};
pub use estimates::{
    caccioppoli_report, higher_integrability_bracket, higher_integrability_report,
    iteration_lemma_bound, lipschitz_budget, moser_schedule, sup_gradient, CaccioppoliReport,
    HigherIntegrabilityReport, IterationBound, LipschitzBudget, MoserSchedule,
};
pub use integrand::{CustomIntegrand, Evaluation, GrowthParams, GrowthReport, Integrand, Kind};
pub use mesh::{CutoffField, DiscreteField, Grid, Sym2};
pub use phase::{Criterion, QInterval, Rational};
pub use solver::{energy, minimize, InitialGuess, Solution, SolveConfig};
