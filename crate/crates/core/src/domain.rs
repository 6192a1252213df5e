//! The interval domain, its cell-midpoint grid and the closed-form exterior
//! kernel that encodes the zero extension outside the interval.
//!
//! Every grid node sits at a cell center `x_i = a + (i - 1/2) h`, so no node
//! touches the boundary and the tail integral
//! `k_i = ∫_{R \ (a,b)} |x_i - y|^{-(1+sr)} dy` is finite and available in
//! closed form.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{FracPqError, Result};

/// Bounded open interval `(a, b)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub a: f64,
    pub b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(FracPqError::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn unit() -> Self {
        Self { a: 0.0, b: 1.0 }
    }

    pub fn length(&self) -> f64 {
        self.b - self.a
    }
}

/// Uniform cell-midpoint grid on an [`Interval`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    interval: Interval,
    n: usize,
    h: f64,
    nodes: Vec<f64>,
}

/// Builds the midpoint grid with `n` cells.
pub fn build_grid(interval: Interval, n: usize) -> Result<Grid> {
    let interval = Interval::new(interval.a, interval.b)?;
    if n == 0 {
        return Err(FracPqError::EmptyGrid);
    }
    let h = interval.length() / n as f64;
    let nodes = (0..n).map(|i| interval.a + (i as f64 + 0.5) * h).collect();
    Ok(Grid { interval, n, h, nodes })
}

impl Grid {
    pub fn new(interval: Interval, n: usize) -> Result<Self> {
        build_grid(interval, n)
    }

    pub fn interval(&self) -> Interval {
        self.interval
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn h(&self) -> f64 {
        self.h
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    /// Index of the node mirrored through the interval midpoint.
    pub fn mirror(&self, i: usize) -> usize {
        self.n - 1 - i
    }

    /// `k_i = (1/sr) [ (x_i - a)^{-sr} + (b - x_i)^{-sr} ]`.
    pub fn exterior_kernel_weight(&self, i: usize, params: FractionalParams) -> Result<f64> {
        exterior_kernel_weight(self, i, params)
    }
}

/// Tail integral of the kernel `|x_i - y|^{-(1+sr)}` over the complement of the
/// interval.
pub fn exterior_kernel_weight(grid: &Grid, i: usize, params: FractionalParams) -> Result<f64> {
    let x = *grid.nodes.get(i).ok_or(FracPqError::IndexOutOfRange { index: i, n: grid.n })?;
    tail_integral(grid.interval, x, params.sr()).ok_or(FracPqError::BoundaryNode { index: i })
}

pub(crate) fn tail_integral(interval: Interval, x: f64, sr: f64) -> Option<f64> {
    let left = x - interval.a;
    let right = interval.b - x;
    if left <= 0.0 || right <= 0.0 {
        return None;
    }
    Some((left.powf(-sr) + right.powf(-sr)) / sr)
}

/// Order `s` and integrability exponent `r` of one fractional r-Laplacian.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FractionalParams {
    s: f64,
    r: f64,
}

impl FractionalParams {
    pub fn new(s: f64, r: f64) -> Result<Self> {
        if !(s > 0.0 && s < 1.0 && r > 1.0 && r.is_finite()) {
            return Err(FracPqError::InvalidParams { s, r });
        }
        Ok(Self { s, r })
    }

    pub fn s(&self) -> f64 {
        self.s
    }

    pub fn r(&self) -> f64 {
        self.r
    }

    pub fn sr(&self) -> f64 {
        self.s * self.r
    }
}

/// Full problem data: interval plus `(s1, p)` and `(s2, q)` with
/// `0 < s2 < s1 < 1 < q < p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PQConfig {
    pub interval: Interval,
    pub s1: f64,
    pub p: f64,
    pub s2: f64,
    pub q: f64,
}

impl PQConfig {
    pub fn new(interval: Interval, s1: f64, p: f64, s2: f64, q: f64) -> Result<Self> {
        let cfg = Self { interval, s1, p, s2, q };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        Interval::new(self.interval.a, self.interval.b)?;
        let Self { s1, p, s2, q, .. } = *self;
        let ordered = 0.0 < s2 && s2 < s1 && s1 < 1.0 && 1.0 < q && q < p && p.is_finite();
        if !ordered {
            return Err(FracPqError::InvalidConfig(format!(
                "need 0 < s2 < s1 < 1 < q < p < inf, got s1={s1}, p={p}, s2={s2}, q={q}"
            )));
        }
        Ok(())
    }

    pub fn p_params(&self) -> FractionalParams {
        FractionalParams { s: self.s1, r: self.p }
    }

    pub fn q_params(&self) -> FractionalParams {
        FractionalParams { s: self.s2, r: self.q }
    }
}

/// Nodal values on a grid; the function is zero outside the interval.
#[derive(Debug, Clone, PartialEq)]
pub struct GridFunction {
    grid: Arc<Grid>,
    values: Vec<f64>,
}

impl GridFunction {
    pub fn new(grid: Arc<Grid>, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n() {
            return Err(FracPqError::GridMismatch { expected: grid.n(), found: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: Arc<Grid>) -> Self {
        let values = vec![0.0; grid.n()];
        Self { grid, values }
    }

    pub fn constant(grid: Arc<Grid>, c: f64) -> Self {
        let values = vec![c; grid.n()];
        Self { grid, values }
    }

    pub fn from_fn(grid: Arc<Grid>, f: impl Fn(f64) -> f64) -> Self {
        let values = grid.nodes().iter().map(|&x| f(x)).collect();
        Self { grid, values }
    }

    pub fn grid(&self) -> &Arc<Grid> {
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

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0, |m, v| m.max(v.abs()))
    }

    pub fn min_value(&self) -> f64 {
        self.values.iter().copied().fold(f64::INFINITY, f64::min)
    }

    /// Fails unless `other` is defined on the same grid.
    pub fn check_same_grid(&self, grid: &Grid) -> Result<()> {
        if *self.grid != *grid {
            return Err(FracPqError::GridMismatch { expected: grid.n(), found: self.values.len() });
        }
        Ok(())
    }
}
