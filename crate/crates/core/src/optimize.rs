//! Line-search minimization and Newton polishing on dense vectors.

use std::collections::VecDeque;

use nalgebra::{DMatrix, DVector};

/// Smooth objective on `R^n`. `value` may return `+inf` outside its domain,
/// which the line search treats as a rejected trial point.
pub trait Objective {
    fn value(&self, x: &[f64]) -> f64;

    fn gradient(&self, x: &[f64]) -> Vec<f64>;

    fn hessian(&self, _x: &[f64]) -> Option<DMatrix<f64>> {
        None
    }

    /// Maps an accepted or trial point back onto the feasible set.
    fn retract(&self, _x: &mut [f64]) {}

    /// Returning `false` aborts the iteration (e.g. on blow-up).
    fn admissible(&self, _x: &[f64]) -> bool {
        true
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Method {
    /// Newton with a diagonal shift until the model is positive definite.
    Newton,
    Lbfgs {
        memory: usize,
    },
    SteepestDescent,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MinimizeOptions {
    pub method: Method,
    pub max_iterations: usize,
    /// Stop once `||grad||_inf` drops below this.
    pub gradient_tol: f64,
    /// Stop after `stall_window` iterations whose relative decrease is below this.
    pub value_rel_tol: f64,
    pub stall_window: usize,
    pub armijo: f64,
    pub contraction: f64,
    pub min_step: f64,
    /// Cap on `||step * d||_2` relative to `max(||x||_2, 1)`.
    pub max_step: f64,
}

impl Default for MinimizeOptions {
    fn default() -> Self {
        Self {
            method: Method::Lbfgs { memory: 8 },
            max_iterations: 5_000,
            gradient_tol: 1e-10,
            value_rel_tol: 1e-15,
            stall_window: 20,
            armijo: 1e-4,
            contraction: 0.5,
            min_step: 1e-20,
            max_step: f64::INFINITY,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    GradientTolerance,
    Stalled,
    LineSearchFailed,
    MaxIterations,
    Aborted,
}

#[derive(Debug, Clone)]
pub struct MinimizeOutcome {
    pub x: Vec<f64>,
    pub value: f64,
    pub gradient_norm: f64,
    pub iterations: usize,
    pub stop: StopReason,
    /// Objective value after every accepted step, starting with the initial point.
    pub history: Vec<f64>,
}

impl MinimizeOutcome {
    pub fn converged(&self) -> bool {
        self.stop == StopReason::GradientTolerance
    }
}

pub fn inf_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0, |m, x| m.max(x.abs()))
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm2(v: &[f64]) -> f64 {
    dot(v, v).sqrt()
}

/// Solves `(H + tau I) d = -g` with the smallest tried `tau >= 0` that admits a
/// Cholesky factorization.
pub fn shifted_newton_direction(hess: DMatrix<f64>, g: &[f64]) -> Option<Vec<f64>> {
    let n = g.len();
    let scale = (0..n).fold(0.0f64, |m, i| m.max(hess[(i, i)].abs())).max(1e-300);
    let rhs = DVector::from_iterator(n, g.iter().map(|v| -v));
    let mut tau = 0.0;
    for _ in 0..60 {
        let mut m = hess.clone();
        for i in 0..n {
            m[(i, i)] += tau;
        }
        if let Some(ch) = m.cholesky() {
            let d = ch.solve(&rhs);
            if d.iter().all(|v| v.is_finite()) {
                return Some(d.iter().copied().collect());
            }
        }
        tau = if tau == 0.0 { 1e-10 * scale } else { tau * 4.0 };
    }
    None
}

struct Lbfgs {
    memory: usize,
    pairs: VecDeque<(Vec<f64>, Vec<f64>, f64)>,
}

impl Lbfgs {
    fn direction(&self, g: &[f64]) -> Option<Vec<f64>> {
        let (s_last, y_last, _) = self.pairs.back()?;
        let mut q = g.to_vec();
        let mut alphas = Vec::with_capacity(self.pairs.len());
        for (s, y, rho) in self.pairs.iter().rev() {
            let a = rho * dot(s, &q);
            for (qi, yi) in q.iter_mut().zip(y) {
                *qi -= a * yi;
            }
            alphas.push(a);
        }
        let gamma = dot(s_last, y_last) / dot(y_last, y_last);
        for qi in q.iter_mut() {
            *qi *= gamma;
        }
        for ((s, y, rho), a) in self.pairs.iter().zip(alphas.iter().rev()) {
            let b = rho * dot(y, &q);
            for (qi, si) in q.iter_mut().zip(s) {
                *qi += (a - b) * si;
            }
        }
        Some(q.into_iter().map(|v| -v).collect())
    }

    fn push(&mut self, s: Vec<f64>, y: Vec<f64>) {
        let sy = dot(&s, &y);
        if sy > 1e-300 && sy > 1e-12 * norm2(&s) * norm2(&y) {
            if self.pairs.len() == self.memory {
                self.pairs.pop_front();
            }
            self.pairs.push_back((s, y, 1.0 / sy));
        }
    }
}

/// Armijo line-search descent from `x0`.
pub fn minimize<O: Objective + ?Sized>(obj: &O, x0: &[f64], opts: &MinimizeOptions) -> MinimizeOutcome {
    let mut x = x0.to_vec();
    obj.retract(&mut x);
    let mut f = obj.value(&x);
    let mut g = obj.gradient(&x);
    let mut history = vec![f];
    let mut lbfgs = match opts.method {
        Method::Lbfgs { memory } => Some(Lbfgs { memory: memory.max(1), pairs: VecDeque::new() }),
        _ => None,
    };
    let mut stalled = 0;
    let mut iterations = 0;
    let mut stop = StopReason::MaxIterations;

    if !f.is_finite() || !obj.admissible(&x) {
        let gradient_norm = inf_norm(&g);
        return MinimizeOutcome { x, value: f, gradient_norm, iterations, stop: StopReason::Aborted, history };
    }

    while iterations < opts.max_iterations {
        let gnorm = inf_norm(&g);
        if gnorm < opts.gradient_tol {
            stop = StopReason::GradientTolerance;
            break;
        }
        let mut d = match opts.method {
            Method::Newton => obj
                .hessian(&x)
                .and_then(|h| shifted_newton_direction(h, &g))
                .unwrap_or_else(|| g.iter().map(|v| -v).collect()),
            Method::Lbfgs { .. } => {
                lbfgs.as_ref().and_then(|l| l.direction(&g)).unwrap_or_else(|| g.iter().map(|v| -v).collect())
            }
            Method::SteepestDescent => g.iter().map(|v| -v).collect(),
        };
        let mut slope = dot(&g, &d);
        if !(slope < 0.0) {
            d = g.iter().map(|v| -v).collect();
            slope = -dot(&g, &g);
            if let Some(l) = lbfgs.as_mut() {
                l.pairs.clear();
            }
        }
        // First steepest step: move by a fraction of the current point's size.
        let mut step = if lbfgs.as_ref().is_some_and(|l| l.pairs.is_empty()) || opts.method == Method::SteepestDescent {
            let xn = norm2(&x).max(1.0);
            (0.1 * xn / norm2(&d)).min(1.0)
        } else {
            1.0
        };
        let cap = opts.max_step * norm2(&x).max(1.0) / norm2(&d).max(1e-300);
        step = step.min(cap);
        let mut accepted = None;
        while step >= opts.min_step {
            let mut trial: Vec<f64> = x.iter().zip(&d).map(|(xi, di)| xi + step * di).collect();
            obj.retract(&mut trial);
            let ft = obj.value(&trial);
            if ft.is_finite() && ft <= f + opts.armijo * step * slope {
                accepted = Some((trial, ft));
                break;
            }
            step *= opts.contraction;
        }
        let Some((xn, fnew)) = accepted else {
            stop = StopReason::LineSearchFailed;
            break;
        };
        iterations += 1;
        if !obj.admissible(&xn) {
            x = xn;
            f = fnew;
            g = obj.gradient(&x);
            history.push(f);
            stop = StopReason::Aborted;
            break;
        }
        let gn = obj.gradient(&xn);
        if let Some(l) = lbfgs.as_mut() {
            let s = xn.iter().zip(&x).map(|(a, b)| a - b).collect();
            let y = gn.iter().zip(&g).map(|(a, b)| a - b).collect();
            l.push(s, y);
        }
        let decrease = f - fnew;
        if decrease <= opts.value_rel_tol * f.abs().max(1e-300) {
            stalled += 1;
        } else {
            stalled = 0;
        }
        x = xn;
        f = fnew;
        g = gn;
        history.push(f);
        if stalled >= opts.stall_window {
            stop = StopReason::Stalled;
            break;
        }
    }
    let gradient_norm = inf_norm(&g);
    if stop != StopReason::GradientTolerance && gradient_norm < opts.gradient_tol {
        stop = StopReason::GradientTolerance;
    }
    MinimizeOutcome { x, value: f, gradient_norm, iterations, stop, history }
}

#[derive(Debug, Clone)]
pub struct RootOutcome {
    pub x: Vec<f64>,
    pub residual: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Newton iteration for `grad(x) = 0` with backtracking on `||grad||_2^2`.
/// Works for saddle points as long as the Hessian stays invertible.
pub fn newton_root<O: Objective + ?Sized>(obj: &O, x0: &[f64], tol: f64, max_iterations: usize) -> RootOutcome {
    let mut x = x0.to_vec();
    let mut g = obj.gradient(&x);
    let mut merit = dot(&g, &g);
    let mut iterations = 0;
    while iterations < max_iterations && inf_norm(&g) >= tol {
        let Some(h) = obj.hessian(&x) else { break };
        let rhs = DVector::from_iterator(g.len(), g.iter().map(|v| -v));
        let Some(d) = h.lu().solve(&rhs) else { break };
        if !d.iter().all(|v| v.is_finite()) {
            break;
        }
        let mut step = 1.0;
        let mut accepted = None;
        while step >= 1e-12 {
            let trial: Vec<f64> = x.iter().zip(d.iter()).map(|(xi, di)| xi + step * di).collect();
            if obj.admissible(&trial) {
                let gt = obj.gradient(&trial);
                let mt = dot(&gt, &gt);
                if mt.is_finite() && mt <= (1.0 - 1e-4 * step) * merit {
                    accepted = Some((trial, gt, mt));
                    break;
                }
            }
            step *= 0.5;
        }
        let Some((xn, gn, mn)) = accepted else { break };
        x = xn;
        g = gn;
        merit = mn;
        iterations += 1;
    }
    let residual = inf_norm(&g);
    RootOutcome { x, residual, iterations, converged: residual < tol }
}

#[cfg(test)]
mod tests {
    use super::*;

    struct Rosenbrock;

    impl Objective for Rosenbrock {
        fn value(&self, x: &[f64]) -> f64 {
            (1.0 - x[0]).powi(2) + 100.0 * (x[1] - x[0] * x[0]).powi(2)
        }
        fn gradient(&self, x: &[f64]) -> Vec<f64> {
            vec![-2.0 * (1.0 - x[0]) - 400.0 * x[0] * (x[1] - x[0] * x[0]), 200.0 * (x[1] - x[0] * x[0])]
        }
        fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
            Some(DMatrix::from_row_slice(
                2,
                2,
                &[2.0 - 400.0 * x[1] + 1200.0 * x[0] * x[0], -400.0 * x[0], -400.0 * x[0], 200.0],
            ))
        }
    }

    #[test]
    fn newton_and_lbfgs_solve_rosenbrock() {
        for method in [Method::Newton, Method::Lbfgs { memory: 6 }] {
            let opts = MinimizeOptions { method, max_iterations: 10_000, ..Default::default() };
            let out = minimize(&Rosenbrock, &[-1.2, 1.0], &opts);
            assert!(out.converged(), "{method:?} {:?}", out.stop);
            assert!((out.x[0] - 1.0).abs() < 1e-8 && (out.x[1] - 1.0).abs() < 1e-8);
            assert!(out.history.windows(2).all(|w| w[1] <= w[0]));
        }
    }

    #[test]
    fn root_polish_finds_saddle() {
        struct Saddle;
        impl Objective for Saddle {
            fn value(&self, x: &[f64]) -> f64 {
                x[0] * x[0] - x[1] * x[1] + 0.1 * x[1].powi(4)
            }
            fn gradient(&self, x: &[f64]) -> Vec<f64> {
                vec![2.0 * x[0], -2.0 * x[1] + 0.4 * x[1].powi(3)]
            }
            fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
                Some(DMatrix::from_diagonal(&DVector::from_vec(vec![2.0, -2.0 + 1.2 * x[1] * x[1]])))
            }
        }
        let out = newton_root(&Saddle, &[0.3, 0.2], 1e-12, 50);
        assert!(out.converged);
        assert!(out.x[0].abs() < 1e-12 && out.x[1].abs() < 1e-12);
    }
}
