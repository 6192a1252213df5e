//! First Dirichlet eigenpair of the discrete fractional r-Laplacian.
//!
//! The eigenvalue is the minimum of the Rayleigh quotient `E(u) / ||u||_r^r`.
//! Each start runs normalized gradient descent on the unit `L^r` sphere with
//! Armijo backtracking, then refines with nonlinear inverse iteration: solve
//! `g(v) = |u|^{r-2} u h` by Newton's method and renormalize. Both stages keep
//! the quotient non-increasing.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{GridFunction, PQConfig};
use crate::energy::{lp_norm_pow_raw, signed_pow, EnergyAssembly};
use crate::error::{FracPqError, Result};
use crate::optimize::{inf_norm, minimize, Method, MinimizeOptions, Objective};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolverOptions {
    pub max_iterations: usize,
    /// Relative decrease of the quotient below which the descent stage stops.
    pub descent_tol: f64,
    pub residual_tol: f64,
    pub contraction: f64,
    pub sufficient_decrease: f64,
    pub multistart: usize,
    pub seed: u64,
    /// Iteration cap for the descent stage before inverse iteration takes over.
    pub descent_iterations: usize,
}

impl Default for SolverOptions {
    fn default() -> Self {
        Self {
            max_iterations: 50_000,
            descent_tol: 1e-12,
            residual_tol: 1e-8,
            contraction: 0.5,
            sufficient_decrease: 1e-4,
            multistart: 5,
            seed: 0,
            descent_iterations: 300,
        }
    }
}

impl SolverOptions {
    pub fn validate(&self) -> Result<()> {
        let ok = self.descent_tol > 0.0
            && self.residual_tol > 0.0
            && self.contraction > 0.0
            && self.contraction < 1.0
            && self.sufficient_decrease > 0.0
            && self.sufficient_decrease < 1.0
            && self.multistart >= 1
            && self.max_iterations >= 1;
        if ok {
            Ok(())
        } else {
            Err(FracPqError::InvalidArgument(format!("invalid solver options {self:?}")))
        }
    }
}

#[derive(Debug, Clone)]
pub struct Eigenpair {
    pub lambda: f64,
    pub phi: GridFunction,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
    /// Index of the start that produced this pair.
    pub start: usize,
    /// Rayleigh quotient after every iteration.
    pub history: Vec<f64>,
}

/// `E(u) / ||u||_r^r`.
pub fn rayleigh_quotient(asm: &EnergyAssembly, u: &GridFunction) -> Result<f64> {
    let e = asm.energy(u)?;
    let norm = asm.lp_norm_pow(u, asm.r())?;
    if norm == 0.0 {
        return Err(FracPqError::ZeroFunction);
    }
    Ok(e / norm)
}

fn normalize(asm: &EnergyAssembly, u: &mut [f64]) {
    let norm = lp_norm_pow_raw(asm.grid().h(), u, asm.r()).powf(1.0 / asm.r());
    for v in u.iter_mut() {
        *v = v.abs() / norm;
    }
}

fn symmetrize(u: &mut [f64]) {
    let n = u.len();
    for i in 0..n / 2 {
        let m = 0.5 * (u[i] + u[n - 1 - i]);
        u[i] = m;
        u[n - 1 - i] = m;
    }
}

/// `||g(u) - lambda |u|^{r-2} u h||_inf`.
pub fn eigen_residual(asm: &EnergyAssembly, u: &[f64], lambda: f64) -> f64 {
    let r = asm.r();
    let h = asm.grid().h();
    let g = asm.operator_apply_raw(u);
    g.iter().zip(u).fold(0.0, |m, (gi, ui)| m.max((gi - lambda * signed_pow(*ui, r) * h).abs()))
}

/// `E(v)/r - <b, v>`; its minimizer solves `g(v) = b`.
struct InverseStep<'a> {
    asm: &'a EnergyAssembly,
    b: Vec<f64>,
    symmetric: bool,
}

impl Objective for InverseStep<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.asm.energy_raw(x) / self.asm.r() - x.iter().zip(&self.b).map(|(a, b)| a * b).sum::<f64>()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let mut g = self.asm.operator_apply_raw(x);
        for (gi, bi) in g.iter_mut().zip(&self.b) {
            *gi -= bi;
        }
        g
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.asm.hessian_raw(x, 1e-8 * inf_norm(x).max(1e-300)))
    }

    fn retract(&self, x: &mut [f64]) {
        if self.symmetric {
            symmetrize(x);
        }
    }
}

fn start_values(n: usize, start: usize, seed: u64, mixed_sign: bool) -> Vec<f64> {
    if start == 0 && !mixed_sign {
        return vec![1.0; n];
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed.wrapping_mul(0x9E37_79B9_7F4A_7C15).wrapping_add(start as u64));
    if mixed_sign {
        (0..n).map(|_| rng.random_range(-1.0..1.0)).collect()
    } else {
        (0..n).map(|_| rng.random_range(0.05..1.0)).collect()
    }
}

/// Runs descent plus inverse iteration from explicit starting values.
pub fn eigen_from_start(asm: &EnergyAssembly, start: &[f64], opts: &SolverOptions) -> Result<Eigenpair> {
    opts.validate()?;
    if start.len() != asm.n() {
        return Err(FracPqError::GridMismatch { expected: asm.n(), found: start.len() });
    }
    if start.iter().all(|v| *v == 0.0) {
        return Err(FracPqError::ZeroFunction);
    }
    let r = asm.r();
    let h = asm.grid().h();
    let mut u = start.to_vec();
    normalize(asm, &mut u);
    let mut lambda = asm.energy_raw(&u);
    let mut history = vec![lambda];
    let mut iterations = 0;

    // Normalized gradient descent on the unit sphere.
    let mut step = 1.0 / lambda.max(1e-300);
    while iterations < opts.descent_iterations.min(opts.max_iterations) {
        let g = asm.operator_apply_raw(&u);
        let grad: Vec<f64> = g.iter().zip(&u).map(|(gi, ui)| r * (gi - lambda * signed_pow(*ui, r) * h)).collect();
        let gg: f64 = grad.iter().map(|v| v * v).sum();
        if gg == 0.0 {
            break;
        }
        step *= 2.0;
        let mut accepted = None;
        while step > 1e-30 {
            let mut trial: Vec<f64> = u.iter().zip(&grad).map(|(a, d)| a - step * d).collect();
            if trial.iter().any(|v| *v != 0.0) {
                normalize(asm, &mut trial);
                let lt = asm.energy_raw(&trial);
                if lt <= lambda - opts.sufficient_decrease * step * gg {
                    accepted = Some((trial, lt));
                    break;
                }
            }
            step *= opts.contraction;
        }
        let Some((trial, lt)) = accepted else { break };
        iterations += 1;
        let rel = (lambda - lt) / lambda;
        u = trial;
        lambda = lt;
        history.push(lambda);
        if rel < opts.descent_tol {
            break;
        }
    }

    // Nonlinear inverse iteration.
    let symmetric = r < 2.0;
    if symmetric {
        symmetrize(&mut u);
        normalize(asm, &mut u);
        lambda = lambda.min(asm.energy_raw(&u));
    }
    let inner_opts = MinimizeOptions {
        method: Method::Newton,
        max_iterations: 200,
        gradient_tol: 1e-13,
        value_rel_tol: 0.0,
        stall_window: 8,
        ..Default::default()
    };
    let target = 1e-3 * opts.residual_tol;
    let mut residual = eigen_residual(asm, &u, lambda);
    let mut best_residual = residual;
    let mut idle = 0;
    while iterations < opts.max_iterations && residual > target {
        let b: Vec<f64> = u.iter().map(|v| signed_pow(*v, r) * h).collect();
        let c = lambda.powf(-1.0 / (r - 1.0));
        let v0: Vec<f64> = u.iter().map(|v| c * v).collect();
        let inner = InverseStep { asm, b, symmetric };
        let out = minimize(&inner, &v0, &inner_opts);
        let mut v = out.x;
        if v.iter().all(|x| *x == 0.0) {
            break;
        }
        normalize(asm, &mut v);
        let lv = asm.energy_raw(&v);
        iterations += 1;
        if lv > lambda * (1.0 + 1e-13) {
            break;
        }
        u = v;
        lambda = lv.min(lambda);
        history.push(lambda);
        residual = eigen_residual(asm, &u, lambda);
        if residual < best_residual * 0.9 {
            best_residual = residual;
            idle = 0;
        } else {
            idle += 1;
            if idle >= 5 {
                break;
            }
        }
    }
    lambda = asm.energy_raw(&u);
    residual = eigen_residual(asm, &u, lambda);
    let phi = GridFunction::new(asm.grid().clone(), u)?;
    let converged = residual < opts.residual_tol;
    Ok(Eigenpair { lambda, phi, residual, iterations, converged, start: 0, history })
}

fn pick_best(pairs: Vec<Eigenpair>) -> Eigenpair {
    // Converged first, then smallest quotient, then start index.
    pairs
        .into_iter()
        .min_by(|a, b| {
            (!a.converged).cmp(&!b.converged).then(a.lambda.total_cmp(&b.lambda)).then(a.start.cmp(&b.start))
        })
        .expect("at least one start")
}

/// First eigenpair from `opts.multistart` starts: the constant function and
/// seeded random positive vectors.
pub fn first_eigenpair(asm: &EnergyAssembly, opts: &SolverOptions) -> Result<Eigenpair> {
    opts.validate()?;
    let n = asm.n();
    let runs: Vec<Result<Eigenpair>> = (0..opts.multistart)
        .into_par_iter()
        .map(|k| {
            let start = start_values(n, k, opts.seed, false);
            eigen_from_start(asm, &start, opts).map(|mut p| {
                p.start = k;
                p
            })
        })
        .collect();
    let pairs = runs.into_iter().collect::<Result<Vec<_>>>()?;
    Ok(pick_best(pairs))
}

/// Discrete `L^2` distance after scaling both functions to unit `L^2` norm and
/// aligning signs.
pub fn normalized_distance(a: &GridFunction, b: &GridFunction) -> Result<f64> {
    a.check_same_grid(b.grid())?;
    let h = a.grid().h();
    let na = lp_norm_pow_raw(h, a.values(), 2.0).sqrt();
    let nb = lp_norm_pow_raw(h, b.values(), 2.0).sqrt();
    if na == 0.0 || nb == 0.0 {
        return Err(FracPqError::ZeroFunction);
    }
    let (mut plus, mut minus) = (0.0, 0.0);
    for (x, y) in a.values().iter().zip(b.values()) {
        let (x, y) = (x / na, y / nb);
        plus += (x - y) * (x - y);
        minus += (x + y) * (x + y);
    }
    Ok((plus.min(minus) * h).sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SimplicityReport {
    pub max_distance: f64,
    pub lambdas: Vec<f64>,
    pub passed: bool,
}

pub const SIMPLICITY_TOL: f64 = 1e-6;

/// Reruns the solver from independent positive and sign-changing starts and
/// reports the largest pairwise distance between the normalized results.
pub fn simplicity_check(asm: &EnergyAssembly, pair: &Eigenpair, opts: &SolverOptions) -> Result<SimplicityReport> {
    opts.validate()?;
    let n = asm.n();
    let seed = opts.seed.wrapping_add(0x5EED);
    let runs: Vec<Result<Eigenpair>> = (0..opts.multistart)
        .into_par_iter()
        .map(|k| eigen_from_start(asm, &start_values(n, k + 1, seed, k % 2 == 1), opts))
        .collect();
    let mut phis = vec![pair.phi.clone()];
    let mut lambdas = vec![pair.lambda];
    for run in runs {
        let run = run?;
        lambdas.push(run.lambda);
        phis.push(run.phi);
    }
    let mut max_distance = 0.0f64;
    for i in 0..phis.len() {
        for j in (i + 1)..phis.len() {
            max_distance = max_distance.max(normalized_distance(&phis[i], &phis[j])?);
        }
    }
    Ok(SimplicityReport { max_distance, lambdas, passed: max_distance < SIMPLICITY_TOL })
}

/// Lower end of the exponent window `s1 p' / q' < s2 < s1`.
pub fn li_lower_bound(config: &PQConfig) -> f64 {
    let conj = |r: f64| r / (r - 1.0);
    config.s1 * conj(config.p) / conj(config.q)
}

pub fn li_condition(config: &PQConfig) -> bool {
    li_lower_bound(config) < config.s2 && config.s2 < config.s1
}

pub const LI_THRESHOLD: f64 = 1e-3;

pub fn li_distance(pair1: &Eigenpair, pair2: &Eigenpair) -> Result<f64> {
    normalized_distance(&pair1.phi, &pair2.phi)
}

/// `Some(distance > threshold)` inside the exponent window, `None` outside it.
pub fn li_verdict(config: &PQConfig, distance: f64, threshold: f64) -> Option<bool> {
    li_condition(config).then_some(distance > threshold)
}

/// Eigenpair for the constant-1 start only; convenient for tiny grids.
pub fn eigen_from_constant(asm: &EnergyAssembly, opts: &SolverOptions) -> Result<Eigenpair> {
    eigen_from_start(asm, &vec![1.0; asm.n()], opts)
}
