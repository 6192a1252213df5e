#![allow(dead_code)]

use std::sync::Arc;

use fracpq_core::{
    build_context, build_grid, EnergyAssembly, FractionalParams, Grid, Interval, PQConfig, SolverOptions,
    ThresholdContext,
};
use nalgebra::{DMatrix, SymmetricEigen};

pub fn grid(n: usize) -> Arc<Grid> {
    Arc::new(build_grid(Interval::unit(), n).unwrap())
}

pub fn assembly(n: usize, s: f64, r: f64) -> EnergyAssembly {
    EnergyAssembly::new(grid(n), FractionalParams::new(s, r).unwrap()).unwrap()
}

pub fn config(s1: f64, p: f64, s2: f64, q: f64) -> PQConfig {
    PQConfig::new(Interval::unit(), s1, p, s2, q).unwrap()
}

/// The configuration most scenarios use.
pub fn standard() -> PQConfig {
    config(0.7, 3.0, 0.5, 2.0)
}

pub fn context(cfg: PQConfig, n: usize) -> ThresholdContext {
    build_context(cfg, grid(n), &SolverOptions::default()).unwrap()
}

/// Dense matrix of the quadratic form `E(u) = u^T M u` on `(0, 1)`, built
/// straight from the kernel formulas.
pub fn quadratic_form(n: usize, s: f64) -> DMatrix<f64> {
    let sr = 2.0 * s;
    let h = 1.0 / n as f64;
    let x: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) * h).collect();
    let mut m = DMatrix::zeros(n, n);
    for i in 0..n {
        let tail = (x[i].powf(-sr) + (1.0 - x[i]).powf(-sr)) / sr;
        m[(i, i)] += 2.0 * h * tail;
        for j in 0..n {
            if i != j {
                let w = h * h / (x[i] - x[j]).abs().powf(1.0 + sr);
                m[(i, i)] += 2.0 * w;
                m[(i, j)] -= 2.0 * w;
            }
        }
    }
    m
}

/// Smallest eigenvalue of `M / h` and its eigenvector, normalized to unit
/// discrete `L^2` norm with a positive sum.
pub fn r2_oracle(n: usize, s: f64) -> (f64, Vec<f64>) {
    let h = 1.0 / n as f64;
    let eig = SymmetricEigen::new(quadratic_form(n, s) / h);
    let k = eig.eigenvalues.imin();
    let v: Vec<f64> = eig.eigenvectors.column(k).iter().copied().collect();
    (eig.eigenvalues[k], l2_normalized(&v, h))
}

pub fn l2_normalized(v: &[f64], h: f64) -> Vec<f64> {
    let norm = (h * v.iter().map(|x| x * x).sum::<f64>()).sqrt();
    let sign = if v.iter().sum::<f64>() < 0.0 { -1.0 } else { 1.0 };
    v.iter().map(|x| sign * x / norm).collect()
}

pub fn l2_distance(a: &[f64], b: &[f64], h: f64) -> f64 {
    (h * a.iter().zip(b).map(|(x, y)| (x - y).powi(2)).sum::<f64>()).sqrt()
}

/// Central differences of `f` at `x` with step `1e-6 (1 + |x_i|)`.
pub fn central_gradient(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    (0..x.len())
        .map(|i| {
            let e = 1e-6 * (1.0 + x[i].abs());
            let mut a = x.to_vec();
            let mut b = x.to_vec();
            a[i] += e;
            b[i] -= e;
            (f(&a) - f(&b)) / (2.0 * e)
        })
        .collect()
}

/// `||a - b||_inf / ||b||_inf`.
pub fn relative_error(a: &[f64], b: &[f64]) -> f64 {
    let num = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    let den = b.iter().fold(0.0f64, |m, y| m.max(y.abs()));
    num / den.max(1e-300)
}
