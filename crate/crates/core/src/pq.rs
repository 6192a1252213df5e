//! Energy functional of the `(p, q)` problem with parameters `(alpha, beta)`,
//! its Nehari decomposition, and three ways of producing certified positive
//! critical points: direct minimization, minimization over the Nehari set,
//! and minimization of a truncated functional below a supersolution.
//!
//! A run reports `Found` only when the final iterate has
//! `||grad I_+||_inf < residual_tol` and `min_i u_i > positivity_tol * ||u||_inf`.
//! `NoneFound` means every start was exhausted without such a point; it is a
//! bounded-effort statement, not a proof of non-existence.

use std::sync::Arc;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Grid, GridFunction, PQConfig};
use crate::eigen::{first_eigenpair, Eigenpair, SolverOptions};
use crate::energy::{abs_pow, assemble, lp_norm_pow_raw, positive_part_norm_pow_raw, signed_pow, EnergyAssembly};
use crate::error::{FracPqError, Result};
use crate::optimize::{dot, inf_norm, minimize, newton_root, Method, MinimizeOptions, Objective};

/// Both eigenpairs of the problem, shared between functionals that differ
/// only in `(alpha, beta)`.
#[derive(Debug, Clone)]
pub struct Spectrum {
    pub p: Eigenpair,
    pub q: Eigenpair,
}

#[derive(Debug, Clone)]
pub struct Functionals {
    config: PQConfig,
    asm_p: Arc<EnergyAssembly>,
    asm_q: Arc<EnergyAssembly>,
    spectrum: Arc<Spectrum>,
    pub alpha: f64,
    pub beta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NehariDiagnostics {
    pub h: f64,
    pub g: f64,
    pub i: f64,
    pub t_scale: Option<f64>,
}

impl Functionals {
    /// Assembles both operators and computes their first eigenpairs.
    pub fn new(config: PQConfig, grid: Arc<Grid>, alpha: f64, beta: f64, eig: &SolverOptions) -> Result<Self> {
        config.validate()?;
        let asm_p = Arc::new(assemble(grid.clone(), config.p_params())?);
        let asm_q = Arc::new(assemble(grid, config.q_params())?);
        let p = first_eigenpair(&asm_p, eig)?;
        let q = first_eigenpair(&asm_q, eig)?;
        for pair in [&p, &q] {
            if !pair.converged {
                return Err(FracPqError::NotConverged { residual: pair.residual, iterations: pair.iterations });
            }
        }
        Ok(Self { config, asm_p, asm_q, spectrum: Arc::new(Spectrum { p, q }), alpha, beta })
    }

    pub fn from_parts(
        config: PQConfig,
        asm_p: Arc<EnergyAssembly>,
        asm_q: Arc<EnergyAssembly>,
        spectrum: Arc<Spectrum>,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if asm_p.grid() != asm_q.grid() {
            return Err(FracPqError::GridMismatch { expected: asm_p.n(), found: asm_q.n() });
        }
        Ok(Self { config, asm_p, asm_q, spectrum, alpha, beta })
    }

    /// Same operators, different parameters.
    pub fn with_params(&self, alpha: f64, beta: f64) -> Self {
        Self { alpha, beta, ..self.clone() }
    }

    pub fn config(&self) -> &PQConfig {
        &self.config
    }

    pub fn grid(&self) -> &Arc<Grid> {
        self.asm_p.grid()
    }

    pub fn asm_p(&self) -> &Arc<EnergyAssembly> {
        &self.asm_p
    }

    pub fn asm_q(&self) -> &Arc<EnergyAssembly> {
        &self.asm_q
    }

    pub fn spectrum(&self) -> &Arc<Spectrum> {
        &self.spectrum
    }

    pub fn lambda_p(&self) -> f64 {
        self.spectrum.p.lambda
    }

    pub fn lambda_q(&self) -> f64 {
        self.spectrum.q.lambda
    }

    fn h(&self) -> f64 {
        self.grid().h()
    }

    fn wrap(&self, values: Vec<f64>) -> Result<GridFunction> {
        GridFunction::new(self.grid().clone(), values)
    }

    fn check(&self, u: &GridFunction) -> Result<()> {
        u.check_same_grid(self.grid())
    }

    pub fn h_alpha_raw(&self, u: &[f64]) -> f64 {
        self.asm_p.energy_raw(u) - self.alpha * positive_part_norm_pow_raw(self.h(), u, self.config.p)
    }

    pub fn g_beta_raw(&self, u: &[f64]) -> f64 {
        self.asm_q.energy_raw(u) - self.beta * positive_part_norm_pow_raw(self.h(), u, self.config.q)
    }

    /// `I_+ = H/p + G/q`.
    pub fn i_plus_raw(&self, u: &[f64]) -> f64 {
        self.h_alpha_raw(u) / self.config.p + self.g_beta_raw(u) / self.config.q
    }

    pub fn i_plus(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.i_plus_raw(u.values()))
    }

    pub fn h_alpha(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.h_alpha_raw(u.values()))
    }

    pub fn g_beta(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        Ok(self.g_beta_raw(u.values()))
    }

    /// Sum of the magnitudes of the four terms; the reference size for
    /// identity and residual checks.
    pub fn term_scale_raw(&self, u: &[f64]) -> f64 {
        let h = self.h();
        let PQConfig { p, q, .. } = self.config;
        self.asm_p.energy_raw(u)
            + self.asm_q.energy_raw(u)
            + (self.alpha * positive_part_norm_pow_raw(h, u, p)).abs()
            + (self.beta * positive_part_norm_pow_raw(h, u, q)).abs()
    }

    /// `f(t) = alpha |t|^{p-2} t + beta |t|^{q-2} t`.
    pub fn force(&self, t: f64) -> f64 {
        self.alpha * signed_pow(t, self.config.p) + self.beta * signed_pow(t, self.config.q)
    }

    /// Gradient of `I_+` with respect to the nodal values.
    pub fn gradient_raw(&self, u: &[f64]) -> Vec<f64> {
        let h = self.h();
        let gp = self.asm_p.operator_apply_raw(u);
        let gq = self.asm_q.operator_apply_raw(u);
        gp.iter().zip(&gq).zip(u).map(|((a, b), v)| a + b - h * self.force(v.max(0.0))).collect()
    }

    pub fn gradient(&self, u: &GridFunction) -> Result<GridFunction> {
        self.check(u)?;
        self.wrap(self.gradient_raw(u.values()))
    }

    /// `||g_p(u)||_inf + ||g_q(u)||_inf`, the size of the operator terms a
    /// residual is compared against.
    pub fn operator_scale_raw(&self, u: &[f64]) -> f64 {
        inf_norm(&self.asm_p.operator_apply_raw(u)) + inf_norm(&self.asm_q.operator_apply_raw(u))
    }

    /// `||grad I_+(u)||_inf`.
    pub fn residual_raw(&self, u: &[f64]) -> f64 {
        inf_norm(&self.gradient_raw(u))
    }

    fn force_derivative(&self, t: f64, floor: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        let PQConfig { p, q, .. } = self.config;
        let dp = |r: f64| if r >= 2.0 { abs_pow(t, r - 2.0) } else { t.max(floor).powf(r - 2.0) };
        self.alpha * (p - 1.0) * dp(p) + self.beta * (q - 1.0) * dp(q)
    }

    pub fn hessian_raw(&self, u: &[f64]) -> DMatrix<f64> {
        let floor = 1e-8 * inf_norm(u).max(1e-300);
        let h = self.h();
        let mut m = self.asm_p.hessian_raw(u, floor) + self.asm_q.hessian_raw(u, floor);
        for (i, v) in u.iter().enumerate() {
            m[(i, i)] -= h * self.force_derivative(*v, floor);
        }
        m
    }

    /// `t = (-G/H)^{1/(p-q)}`, the multiplier placing `t u` on the Nehari set.
    pub fn nehari_scale_raw(&self, u: &[f64]) -> Result<f64> {
        let h = self.h_alpha_raw(u);
        let g = self.g_beta_raw(u);
        scale_from(h, g, self.config.p, self.config.q)
    }

    pub fn nehari_scale(&self, u: &GridFunction) -> Result<f64> {
        self.check(u)?;
        self.nehari_scale_raw(u.values())
    }

    pub fn diagnostics_raw(&self, u: &[f64]) -> NehariDiagnostics {
        let h = self.h_alpha_raw(u);
        let g = self.g_beta_raw(u);
        let PQConfig { p, q, .. } = self.config;
        NehariDiagnostics { h, g, i: h / p + g / q, t_scale: scale_from(h, g, p, q).ok() }
    }

    pub fn diagnostics(&self, u: &GridFunction) -> Result<NehariDiagnostics> {
        self.check(u)?;
        Ok(self.diagnostics_raw(u.values()))
    }
}

/// Nehari multiplier from the two split values.
pub fn scale_from(h: f64, g: f64, p: f64, q: f64) -> Result<f64> {
    if h == 0.0 || g == 0.0 || (h > 0.0) == (g > 0.0) || !h.is_finite() || !g.is_finite() {
        return Err(FracPqError::UndefinedScale { h, g });
    }
    Ok((-g / h).powf(1.0 / (p - q)))
}

pub fn i_plus(f: &Functionals, u: &GridFunction) -> Result<f64> {
    f.i_plus(u)
}

pub fn h_alpha(f: &Functionals, u: &GridFunction) -> Result<f64> {
    f.h_alpha(u)
}

pub fn g_beta(f: &Functionals, u: &GridFunction) -> Result<f64> {
    f.g_beta(u)
}

pub fn nehari_scale(f: &Functionals, u: &GridFunction) -> Result<f64> {
    f.nehari_scale(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolutionStatus {
    Found,
    Inconclusive,
    NoneFound,
}

impl SolutionStatus {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Found => "found",
            Self::Inconclusive => "inconclusive",
            Self::NoneFound => "none_found",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SolveMethod {
    Nehari,
    GlobalMin,
    Truncation,
    /// Newton's method from a solution at nearby parameters.
    Continuation,
}

impl SolveMethod {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Nehari => "nehari",
            Self::GlobalMin => "global_min",
            Self::Truncation => "truncation",
            Self::Continuation => "continuation",
        }
    }
}

#[derive(Debug, Clone)]
pub struct SolutionReport {
    pub status: SolutionStatus,
    pub u: Option<GridFunction>,
    pub residual: f64,
    pub min_interior: f64,
    pub max_norm: f64,
    pub diagnostics: NehariDiagnostics,
    pub method: SolveMethod,
    /// Value of the functional that was minimized (`I_+`, `J` or the truncated one).
    pub objective: f64,
    pub starts: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PqOptions {
    /// Iteration cap per start for the descent stage.
    pub max_iterations: usize,
    pub residual_tol: f64,
    /// Relative positivity threshold: `min u > positivity_tol * max |u|`.
    pub positivity_tol: f64,
    /// Below this max norm a critical point counts as the zero solution.
    pub zero_floor: f64,
    pub random_starts: usize,
    pub seed: u64,
    /// Additional starting points, e.g. from a neighbouring parameter value.
    pub extra_starts: Vec<Vec<f64>>,
    /// A Nehari descent aborts once the multiplier leaves
    /// `[t0 / blowup_factor, t0 * blowup_factor]`.
    pub blowup_factor: f64,
    pub newton_iterations: usize,
}

impl Default for PqOptions {
    fn default() -> Self {
        Self {
            max_iterations: 3_000,
            residual_tol: 1e-8,
            positivity_tol: 1e-8,
            zero_floor: 1e-7,
            random_starts: 2,
            seed: 0,
            extra_starts: Vec::new(),
            blowup_factor: 1e4,
            newton_iterations: 60,
        }
    }
}

/// Outcome of one start before aggregation.
#[derive(Debug, Clone)]
struct Attempt {
    u: Vec<f64>,
    residual: f64,
    objective: f64,
    certified: bool,
    /// Descent reached a stationary point that polishing could not certify.
    stuck: bool,
    index: usize,
}

fn certify(f: &Functionals, u: &[f64], opts: &PqOptions) -> (f64, bool) {
    let residual = f.residual_raw(u);
    let max = inf_norm(u);
    let min = u.iter().copied().fold(f64::INFINITY, f64::min);
    // The relative test rejects near-zero iterates whose absolute residual is
    // small only because every term is.
    let relative = residual <= opts.residual_tol * f.operator_scale_raw(u);
    let ok = residual < opts.residual_tol && relative && max > opts.zero_floor && min > opts.positivity_tol * max;
    (residual, ok)
}

/// Newton polish of `grad I_+ = 0`, keeping the polished point only if it
/// improves the residual.
fn polish(f: &Functionals, u: Vec<f64>, opts: &PqOptions) -> Vec<f64> {
    let obj = IPlus { f };
    let tol = 1e-3 * opts.residual_tol * f.operator_scale_raw(&u).min(1.0);
    let out = newton_root(&obj, &u, tol, opts.newton_iterations);
    if out.residual < f.residual_raw(&u) {
        out.x
    } else {
        u
    }
}

fn aggregate(f: &Functionals, attempts: Vec<Attempt>, method: SolveMethod) -> SolutionReport {
    let starts = attempts.len();
    let best = attempts
        .iter()
        .filter(|a| a.certified)
        .min_by(|a, b| a.objective.total_cmp(&b.objective).then(a.index.cmp(&b.index)));
    let (status, chosen) = match best {
        Some(a) => (SolutionStatus::Found, Some(a)),
        None => {
            let stuck = attempts
                .iter()
                .filter(|a| a.stuck)
                .min_by(|a, b| a.residual.total_cmp(&b.residual).then(a.index.cmp(&b.index)));
            match stuck {
                Some(a) => (SolutionStatus::Inconclusive, Some(a)),
                None => (SolutionStatus::NoneFound, None),
            }
        }
    };
    match chosen {
        Some(a) => {
            let u = GridFunction::new(f.grid().clone(), a.u.clone()).ok();
            SolutionReport {
                status,
                residual: a.residual,
                min_interior: a.u.iter().copied().fold(f64::INFINITY, f64::min),
                max_norm: inf_norm(&a.u),
                diagnostics: f.diagnostics_raw(&a.u),
                method,
                objective: a.objective,
                u,
                starts,
            }
        }
        None => {
            // Report the least bad iterate's numbers without a function.
            let a = attempts.iter().min_by(|a, b| a.residual.total_cmp(&b.residual));
            SolutionReport {
                status,
                u: None,
                residual: a.map_or(f64::INFINITY, |a| a.residual),
                min_interior: a.map_or(0.0, |a| a.u.iter().copied().fold(f64::INFINITY, f64::min)),
                max_norm: a.map_or(0.0, |a| inf_norm(&a.u)),
                diagnostics: a
                    .map_or(NehariDiagnostics { h: 0.0, g: 0.0, i: 0.0, t_scale: None }, |a| f.diagnostics_raw(&a.u)),
                method,
                objective: a.map_or(f64::NAN, |a| a.objective),
                starts,
            }
        }
    }
}

/// `I_+` as an optimization objective.
struct IPlus<'a> {
    f: &'a Functionals,
}

impl Objective for IPlus<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        self.f.i_plus_raw(x)
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        self.f.gradient_raw(x)
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        Some(self.f.hessian_raw(x))
    }
}

fn random_positive(n: usize, seed: u64, k: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ (0xA5A5_0000 + k as u64));
    // Smooth-ish bump times noise keeps the start away from the boundary layer.
    (0..n)
        .map(|i| {
            let x = (i as f64 + 0.5) / n as f64;
            (x * (1.0 - x)).sqrt() * rng.random_range(0.5..1.5)
        })
        .collect()
}

fn normalized_p(f: &Functionals, u: &[f64]) -> Vec<f64> {
    let norm = lp_norm_pow_raw(f.h(), u, f.config.p).powf(1.0 / f.config.p);
    u.iter().map(|v| v.abs() / norm).collect()
}

/// Direction seeds: eigenfunctions, their blends, extra and random starts.
fn direction_starts(f: &Functionals, opts: &PqOptions) -> Vec<Vec<f64>> {
    let n = f.grid().n();
    let pp = f.spectrum.p.phi.values();
    let pq = f.spectrum.q.phi.values();
    let mut starts: Vec<Vec<f64>> = opts.extra_starts.iter().filter(|s| s.len() == n).cloned().collect();
    starts.push(pq.to_vec());
    starts.push(pp.to_vec());
    starts.push(pp.iter().zip(pq).map(|(a, b)| 0.5 * (a + b)).collect());
    for k in 0..opts.random_starts {
        starts.push(random_positive(n, opts.seed, k));
    }
    starts.into_iter().filter(|s| s.iter().any(|v| *v != 0.0)).map(|s| normalized_p(f, &s)).collect()
}

/// Unconstrained minimization of `I_+`; needs `alpha < lambda_1(s1, p)` for
/// the functional to be bounded below.
pub fn solve_global_min(f: &Functionals, opts: &PqOptions) -> Result<SolutionReport> {
    if !(f.alpha < f.lambda_p()) {
        return Err(FracPqError::InvalidArgument(format!(
            "global minimization needs alpha < {}, got {}",
            f.lambda_p(),
            f.alpha
        )));
    }
    let starts: Vec<Vec<f64>> = direction_starts(f, opts)
        .into_iter()
        .map(|d| {
            // On the descending branch of the fibre when one exists, else small.
            let t = f.nehari_scale_raw(&d).ok().filter(|_| f.g_beta_raw(&d) < 0.0).unwrap_or(1e-2);
            d.iter().map(|v| t * v).collect()
        })
        .collect();
    let mopts = MinimizeOptions {
        method: Method::Newton,
        max_iterations: opts.max_iterations,
        gradient_tol: 1e-2 * opts.residual_tol,
        value_rel_tol: 1e-15,
        stall_window: 10,
        ..Default::default()
    };
    let attempts: Vec<Attempt> = starts
        .par_iter()
        .enumerate()
        .map(|(index, x0)| {
            let out = minimize(&IPlus { f }, x0, &mopts);
            let u = polish(f, out.x, opts);
            let (residual, certified) = certify(f, &u, opts);
            let stuck = !certified && residual < 1e-4 && inf_norm(&u) > opts.zero_floor;
            Attempt { objective: f.i_plus_raw(&u), u, residual, certified, stuck, index }
        })
        .collect();
    Ok(aggregate(f, attempts, SolveMethod::GlobalMin))
}

/// Which part of the Nehari set a descent works on.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum NehariBranch {
    /// `G < 0 < H`: `t u` minimizes `I_+` along its ray, `I_+ < 0`.
    Plus,
    /// `H < 0 < G`: `t u` maximizes `I_+` along its ray, `I_+ > 0`.
    Minus,
}

/// `J(u) = I_+(t(u) u)` on the unit `L^p` sphere, restricted to one branch.
/// Zero-homogeneous, with `grad J(u) = t grad I_+(t u)`.
struct Fibered<'a> {
    f: &'a Functionals,
    branch: NehariBranch,
    t_range: (f64, f64),
}

impl Fibered<'_> {
    fn scale(&self, x: &[f64]) -> Option<f64> {
        let h = self.f.h_alpha_raw(x);
        let g = self.f.g_beta_raw(x);
        let ok = match self.branch {
            NehariBranch::Plus => g < 0.0 && h > 0.0,
            NehariBranch::Minus => h < 0.0 && g > 0.0,
        };
        if !ok {
            return None;
        }
        scale_from(h, g, self.f.config.p, self.f.config.q).ok()
    }
}

impl Objective for Fibered<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        match self.scale(x) {
            Some(t) => {
                let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
                self.f.i_plus_raw(&tx)
            }
            None => f64::INFINITY,
        }
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let t = self.scale(x).unwrap_or(1.0);
        let tx: Vec<f64> = x.iter().map(|v| t * v).collect();
        self.f.gradient_raw(&tx).into_iter().map(|g| t * g).collect()
    }

    fn retract(&self, x: &mut [f64]) {
        let norm = lp_norm_pow_raw(self.f.h(), x, self.f.config.p).powf(1.0 / self.f.config.p);
        if norm > 0.0 {
            for v in x.iter_mut() {
                *v = v.abs() / norm;
            }
        }
    }

    fn admissible(&self, x: &[f64]) -> bool {
        self.scale(x).is_some_and(|t| t >= self.t_range.0 && t <= self.t_range.1)
    }
}

/// Minimizes `I_+` over one branch of the Nehari set: each step is a free
/// descent step followed by re-projection `u -> t(u) u`, then the limit is
/// polished by Newton's method on `grad I_+`.
pub fn solve_nehari_branch(f: &Functionals, branch: NehariBranch, opts: &PqOptions) -> SolutionReport {
    let starts: Vec<Vec<f64>> = direction_starts(f, opts)
        .into_iter()
        .filter(|d| Fibered { f, branch, t_range: (0.0, f64::INFINITY) }.scale(d).is_some())
        .collect();
    let mopts = MinimizeOptions {
        method: Method::Lbfgs { memory: 10 },
        max_iterations: opts.max_iterations,
        gradient_tol: 1e-3 * opts.residual_tol,
        value_rel_tol: 1e-14,
        stall_window: 25,
        max_step: 0.25,
        ..Default::default()
    };
    let attempts: Vec<Attempt> = starts
        .par_iter()
        .enumerate()
        .map(|(index, d)| {
            let probe = Fibered { f, branch, t_range: (0.0, f64::INFINITY) };
            let t0 = probe.scale(d).unwrap_or(1.0);
            let obj = Fibered { f, branch, t_range: (t0 / opts.blowup_factor, t0 * opts.blowup_factor) };
            let out = minimize(&obj, d, &mopts);
            let escaped = out.stop == crate::optimize::StopReason::Aborted;
            let t = obj.scale(&out.x);
            let (u, objective) = match (escaped, t) {
                (false, Some(t)) => {
                    let u: Vec<f64> = out.x.iter().map(|v| t * v).collect();
                    (polish(f, u, opts), out.value)
                }
                _ => (out.x.clone(), out.value),
            };
            let (residual, certified) = certify(f, &u, opts);
            let stuck = !escaped && !certified && residual < 1e-4 && inf_norm(&u) > opts.zero_floor;
            Attempt { u, residual, objective, certified, stuck, index }
        })
        .collect();
    aggregate(f, attempts, SolveMethod::Nehari)
}

/// Nehari minimization. For `beta > lambda_1(s2, q)` the branch `G < 0 < H`
/// is tried first; the branch `H < 0 < G` covers `beta <= lambda_1(s2, q)`,
/// where it also stands in for the mountain-pass level.
pub fn solve_nehari_min(f: &Functionals, opts: &PqOptions) -> SolutionReport {
    let mut report = None::<SolutionReport>;
    let branches: &[NehariBranch] =
        if f.beta > f.lambda_q() { &[NehariBranch::Plus, NehariBranch::Minus] } else { &[NehariBranch::Minus] };
    for &branch in branches {
        let r = solve_nehari_branch(f, branch, opts);
        let better = report.as_ref().is_none_or(|old| r.status < old.status);
        if better {
            report = Some(r);
        }
        if report.as_ref().is_some_and(|r| r.status == SolutionStatus::Found) {
            break;
        }
    }
    report.expect("at least one branch")
}

/// Newton's method on `grad I_+ = 0` started at `seed`, typically a solution
/// at nearby parameters. Finds saddle-type solutions as well as minimizers.
pub fn solve_from(f: &Functionals, seed: &[f64], opts: &PqOptions) -> SolutionReport {
    let u = polish(f, seed.to_vec(), opts);
    let (residual, certified) = certify(f, &u, opts);
    let stuck = !certified && residual < 1e-4 && inf_norm(&u) > opts.zero_floor;
    let attempt = Attempt { objective: f.i_plus_raw(&u), u, residual, certified, stuck, index: 0 };
    aggregate(f, vec![attempt], SolveMethod::Continuation)
}

/// Picks the method by parameter regime: global minimization below the first
/// `p`-eigenvalue, Nehari minimization otherwise.
pub fn solve(f: &Functionals, opts: &PqOptions) -> SolutionReport {
    if f.alpha < f.lambda_p() {
        solve_global_min(f, opts).expect("regime checked")
    } else {
        solve_nehari_min(f, opts)
    }
}

/// Truncated reaction `f~(x_i, t)` between `ulow_i` and `ubar_i`.
#[allow(clippy::too_many_arguments)]
pub fn truncated_force(
    t: f64,
    i: usize,
    ubar: &GridFunction,
    ulow: &GridFunction,
    alpha: f64,
    beta: f64,
    p: f64,
    q: f64,
) -> Result<f64> {
    let n = ubar.len();
    if i >= n || ulow.len() != n {
        return Err(FracPqError::IndexOutOfRange { index: i, n });
    }
    let (lo, hi) = (ulow.values()[i], ubar.values()[i]);
    if lo > hi {
        return Err(FracPqError::OrderingViolation { index: i, lower: lo, upper: hi });
    }
    let f = |s: f64| alpha * signed_pow(s, p) + beta * signed_pow(s, q);
    Ok(f(t.clamp(lo, hi)))
}

/// `I~(u) = E_p/p + E_q/q - sum_i F~_i(u_i) h` with `ulow = 0`.
pub struct Truncated<'a> {
    f: &'a Functionals,
    ubar: &'a [f64],
}

impl<'a> Truncated<'a> {
    pub fn new(f: &'a Functionals, ubar: &'a [f64]) -> Self {
        Self { f, ubar }
    }

    fn primitive(&self, t: f64, top: f64) -> f64 {
        let PQConfig { p, q, .. } = self.f.config;
        let big_f = |s: f64| self.f.alpha * abs_pow(s, p) / p + self.f.beta * abs_pow(s, q) / q;
        if t <= 0.0 {
            0.0
        } else if t <= top {
            big_f(t)
        } else {
            big_f(top) + self.f.force(top) * (t - top)
        }
    }
}

impl Objective for Truncated<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let PQConfig { p, q, .. } = self.f.config;
        let e = self.f.asm_p.energy_raw(x) / p + self.f.asm_q.energy_raw(x) / q;
        let reaction: f64 = x.iter().zip(self.ubar).map(|(t, top)| self.primitive(*t, *top)).sum();
        e - reaction * self.f.h()
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let h = self.f.h();
        let gp = self.f.asm_p.operator_apply_raw(x);
        let gq = self.f.asm_q.operator_apply_raw(x);
        (0..x.len()).map(|i| gp[i] + gq[i] - h * self.f.force(x[i].clamp(0.0, self.ubar[i]))).collect()
    }

    fn hessian(&self, x: &[f64]) -> Option<DMatrix<f64>> {
        let floor = 1e-8 * inf_norm(x).max(1e-300);
        let h = self.f.h();
        let mut m = self.f.asm_p.hessian_raw(x, floor) + self.f.asm_q.hessian_raw(x, floor);
        for i in 0..x.len() {
            if x[i] > 0.0 && x[i] < self.ubar[i] {
                m[(i, i)] -= h * self.f.force_derivative(x[i], floor);
            }
        }
        Some(m)
    }
}

/// Smallest weak residual of the problem at `ubar` against coordinate test
/// directions; `ubar` is a supersolution when this is `>= -tol`.
pub fn supersolution_margin(f: &Functionals, ubar: &[f64]) -> (usize, f64) {
    f.gradient_raw(ubar).into_iter().enumerate().min_by(|a, b| a.1.total_cmp(&b.1)).unwrap_or((0, 0.0))
}

/// Minimizes the functional truncated at `0` and `ubar`; a minimizer lies in
/// `[0, ubar]` and solves the original problem.
pub fn solve_by_truncation(f: &Functionals, ubar: &GridFunction, opts: &PqOptions) -> Result<SolutionReport> {
    ubar.check_same_grid(f.grid())?;
    let top = ubar.values();
    if let Some((index, &value)) = top.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(FracPqError::NonPositive { index, value });
    }
    let (index, margin) = supersolution_margin(f, top);
    if margin < -opts.residual_tol {
        return Err(FracPqError::NotSupersolution { index, residual: margin });
    }
    let obj = Truncated::new(f, top);
    let phi = f.spectrum.q.phi.values();
    let fit = top.iter().zip(phi).map(|(a, b)| a / b).fold(f64::INFINITY, f64::min);
    let mut starts = vec![
        phi.iter().map(|v| 0.5 * fit * v).collect::<Vec<_>>(),
        top.iter().map(|v| 0.5 * v).collect(),
        top.to_vec(),
    ];
    starts.extend(opts.extra_starts.iter().filter(|s| s.len() == top.len()).cloned());
    let mopts = MinimizeOptions {
        method: Method::Newton,
        max_iterations: opts.max_iterations,
        gradient_tol: 1e-3 * opts.residual_tol,
        value_rel_tol: 1e-15,
        stall_window: 10,
        ..Default::default()
    };
    let mut attempts = Vec::with_capacity(starts.len());
    for (k, x0) in starts.iter().enumerate() {
        let out = minimize(&obj, x0, &mopts);
        let tol = 1e-3 * opts.residual_tol * f.operator_scale_raw(&out.x).min(1.0);
        let polished = newton_root(&obj, &out.x, tol, opts.newton_iterations);
        let x = if polished.residual < inf_norm(&obj.gradient(&out.x)) { polished.x } else { out.x };
        // The minimizer is ordered up to rounding; anything larger is a bug.
        let slack = 1e-9 * (1.0 + inf_norm(top));
        for (i, (v, t)) in x.iter().zip(top).enumerate() {
            if *v < -slack || *v > t + slack {
                return Err(FracPqError::OrderingViolation { index: i, lower: *v, upper: *t });
            }
        }
        let u: Vec<f64> = x.iter().zip(top).map(|(v, t)| v.clamp(0.0, *t)).collect();
        let value = obj.value(&u);
        let (residual, certified) = certify(f, &u, opts);
        let stuck = !certified && (value < 0.0 || residual < 1e-4) && inf_norm(&u) > opts.zero_floor;
        attempts.push(Attempt { u, residual, objective: value, certified, stuck, index: k });
    }
    let mut report = aggregate(f, attempts.clone(), SolveMethod::Truncation);
    if report.status == SolutionStatus::NoneFound {
        // Zero is always admissible: without a negative value nothing is decided.
        if let Some(a) = attempts.iter().min_by(|a, b| a.objective.total_cmp(&b.objective)) {
            report.status = SolutionStatus::Inconclusive;
            report.u = GridFunction::new(f.grid().clone(), a.u.clone()).ok();
            report.objective = a.objective;
        }
    }
    Ok(report)
}

/// Value of the truncated functional at `u`.
pub fn truncated_value(f: &Functionals, ubar: &GridFunction, u: &GridFunction) -> Result<f64> {
    ubar.check_same_grid(f.grid())?;
    u.check_same_grid(f.grid())?;
    Ok(Truncated::new(f, ubar.values()).value(u.values()))
}

/// Gradient of the truncated functional at `u`.
pub fn truncated_gradient(f: &Functionals, ubar: &GridFunction, u: &GridFunction) -> Result<Vec<f64>> {
    ubar.check_same_grid(f.grid())?;
    u.check_same_grid(f.grid())?;
    Ok(Truncated::new(f, ubar.values()).gradient(u.values()))
}

/// `<grad I_+(u), u>`; equals `H + G`.
pub fn nehari_pairing(f: &Functionals, u: &[f64]) -> f64 {
    dot(&f.gradient_raw(u), u)
}
