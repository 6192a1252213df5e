//! Shared fixtures for the criterion benchmarks.

use std::sync::Arc;

use fracpq_core::{build_context, build_grid, Functionals, Grid, Interval, PQConfig, SolverOptions, ThresholdContext};

pub fn grid(n: usize) -> Arc<Grid> {
    Arc::new(build_grid(Interval::unit(), n).expect("n > 0"))
}

/// `(s1, p, s2, q) = (0.7, 3, 0.5, 2)` on the unit interval.
pub fn standard_config() -> PQConfig {
    PQConfig::new(Interval::unit(), 0.7, 3.0, 0.5, 2.0).expect("valid exponents")
}

pub fn functionals(n: usize, alpha: f64, beta: f64) -> Functionals {
    Functionals::new(standard_config(), grid(n), alpha, beta, &SolverOptions::default()).expect("eigensolver converges")
}

pub fn context(n: usize) -> ThresholdContext {
    build_context(standard_config(), grid(n), &SolverOptions::default()).expect("context builds")
}

/// Smooth positive test function `x (1 - x)` rescaled to the grid.
pub fn bump(grid: &Grid) -> Vec<f64> {
    let Interval { a, b } = grid.interval();
    grid.nodes().iter().map(|x| (x - a) * (b - x)).collect()
}
