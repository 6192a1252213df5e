//! Threshold quantities of the two-parameter problem: `alpha*`, `theta*`,
//! `theta*_+`, `beta*(alpha)`, the threshold curve `lambda*(theta)` and the
//! classification of parameter points.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::domain::{Grid, GridFunction, PQConfig};
use crate::eigen::{li_distance, SolverOptions, LI_THRESHOLD};
use crate::energy::{lp_norm_pow_raw, signed_pow};
use crate::error::{FracPqError, Result};
use crate::optimize::{minimize, Method, MinimizeOptions, Objective};
use crate::pq::{solve, solve_by_truncation, solve_from, Functionals, PqOptions, SolutionReport, SolutionStatus};

/// Everything the curve and region computations need, fixed once built.
#[derive(Debug, Clone)]
pub struct ThresholdContext {
    pub config: PQConfig,
    pub lambda1_p: f64,
    pub lambda1_q: f64,
    pub phi_p: GridFunction,
    pub phi_q: GridFunction,
    /// `E_p(phi_q) / ||phi_q||_p^p`.
    pub alpha_star: f64,
    pub theta_star: f64,
    pub theta_star_plus: f64,
    /// Normalized distance between `phi_p` and `phi_q`.
    pub li_distance: f64,
    base: Functionals,
}

impl ThresholdContext {
    pub fn grid(&self) -> &Arc<Grid> {
        self.base.grid()
    }

    pub fn functionals(&self) -> &Functionals {
        &self.base
    }

    /// Functionals at `(alpha, beta)` sharing this context's operators.
    pub fn at(&self, alpha: f64, beta: f64) -> Functionals {
        self.base.with_params(alpha, beta)
    }

    /// Default bracket tolerance `1e-3 * max(1, lambda1_q)`.
    pub fn default_tolerance(&self) -> f64 {
        1e-3 * self.lambda1_q.max(1.0)
    }
}

pub fn build_context(config: PQConfig, grid: Arc<Grid>, opts: &SolverOptions) -> Result<ThresholdContext> {
    let base = Functionals::new(config, grid, 0.0, 0.0, opts)?;
    let spectrum = base.spectrum().clone();
    let (lambda1_p, lambda1_q) = (spectrum.p.lambda, spectrum.q.lambda);
    let phi_q = spectrum.q.phi.clone();
    let h = base.grid().h();
    let alpha_star = base.asm_p().energy_raw(phi_q.values()) / lp_norm_pow_raw(h, phi_q.values(), config.p);
    Ok(ThresholdContext {
        config,
        lambda1_p,
        lambda1_q,
        phi_p: spectrum.p.phi.clone(),
        phi_q,
        alpha_star,
        theta_star: lambda1_p - lambda1_q,
        theta_star_plus: alpha_star - lambda1_q,
        li_distance: li_distance(&spectrum.p, &spectrum.q)?,
        base,
    })
}

/// `([v]_p^p + [v^{p/q}]_q^q - min(0, theta ||v||_p^p)) / ||v||_p^p`, an upper
/// bound for `lambda*(theta)` valid for every positive `v`.
pub fn lambda_star_upper_bound(ctx: &ThresholdContext, theta: f64, v: &GridFunction) -> Result<f64> {
    v.check_same_grid(ctx.grid())?;
    if let Some((index, &value)) = v.values().iter().enumerate().find(|(_, x)| !(**x > 0.0)) {
        return Err(FracPqError::NonPositive { index, value });
    }
    let PQConfig { p, q, .. } = ctx.config;
    let f = ctx.functionals();
    let norm = lp_norm_pow_raw(ctx.grid().h(), v.values(), p);
    let lifted: Vec<f64> = v.values().iter().map(|x| x.powf(p / q)).collect();
    let energy = f.asm_p().energy_raw(v.values()) + f.asm_q().energy_raw(&lifted);
    Ok((energy - (theta * norm).min(0.0)) / norm)
}

// ---------------------------------------------------------------------------
// beta*(alpha)

#[derive(Debug, Clone, PartialEq)]
pub struct BetaStarOptions {
    pub rho_start: f64,
    pub rho_max: f64,
    pub rho_factor: f64,
    /// Iteration cap per penalty stage.
    pub max_iterations: usize,
    pub random_starts: usize,
    pub seed: u64,
    /// Accepted constraint value relative to `E_p(u) + alpha ||u||_p^p`.
    pub feasibility_tol: f64,
}

impl Default for BetaStarOptions {
    fn default() -> Self {
        Self {
            rho_start: 10.0,
            rho_max: 1e10,
            rho_factor: 10.0,
            max_iterations: 2_000,
            random_starts: 2,
            seed: 0,
            feasibility_tol: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
pub struct BetaStar {
    pub alpha: f64,
    pub value: f64,
    /// Minimizer on the unit `L^p` sphere.
    pub u: GridFunction,
    /// `H_alpha(u)`.
    pub constraint: f64,
    pub scale: f64,
    pub starts: usize,
}

/// `R_q(u) + rho max(0, H_alpha(u))^2`, with `R_q = E_q / ||u||_q^q`.
pub struct BetaStarPenalty<'a> {
    f: &'a Functionals,
    pub rho: f64,
}

impl<'a> BetaStarPenalty<'a> {
    /// `f.alpha` is the constraint parameter; `f.beta` is unused.
    pub fn new(f: &'a Functionals, rho: f64) -> Self {
        Self { f, rho }
    }

    fn quotient_q(&self, x: &[f64]) -> f64 {
        self.f.asm_q().energy_raw(x) / lp_norm_pow_raw(self.f.grid().h(), x, self.f.config().q)
    }
}

impl Objective for BetaStarPenalty<'_> {
    fn value(&self, x: &[f64]) -> f64 {
        let c = self.f.h_alpha_raw(x).max(0.0);
        self.quotient_q(x) + self.rho * c * c
    }

    fn gradient(&self, x: &[f64]) -> Vec<f64> {
        let PQConfig { p, q, .. } = *self.f.config();
        let h = self.f.grid().h();
        let nq = lp_norm_pow_raw(h, x, q);
        let rq = self.f.asm_q().energy_raw(x) / nq;
        let gq = self.f.asm_q().operator_apply_raw(x);
        let c = self.f.h_alpha_raw(x).max(0.0);
        let gp = if c > 0.0 { self.f.asm_p().operator_apply_raw(x) } else { vec![0.0; x.len()] };
        x.iter()
            .enumerate()
            .map(|(i, &v)| {
                let dr = q * (gq[i] - rq * h * signed_pow(v, q)) / nq;
                let dh = p * gp[i] - self.f.alpha * p * h * signed_pow(v.max(0.0), p);
                dr + 2.0 * self.rho * c * dh
            })
            .collect()
    }

    fn retract(&self, x: &mut [f64]) {
        let p = self.f.config().p;
        let norm = lp_norm_pow_raw(self.f.grid().h(), x, p).powf(1.0 / p);
        if norm > 0.0 {
            for v in x.iter_mut() {
                *v = v.abs() / norm;
            }
        }
    }
}

fn unit_p(x: &[f64], h: f64, p: f64) -> Vec<f64> {
    let norm = lp_norm_pow_raw(h, x, p).powf(1.0 / p);
    x.iter().map(|v| v.abs() / norm).collect()
}

/// `inf { R_q(u) : H_alpha(u) <= 0 }` by an escalating quadratic penalty from
/// several starts, followed by a move toward `phi_p` when the penalty leaves
/// the constraint violated.
pub fn beta_star(ctx: &ThresholdContext, alpha: f64, opts: &BetaStarOptions) -> Result<BetaStar> {
    if !(alpha >= ctx.lambda1_p) {
        return Err(FracPqError::Infeasible { alpha, lambda1: ctx.lambda1_p });
    }
    if !(opts.rho_start > 0.0 && opts.rho_factor > 1.0 && opts.rho_max >= opts.rho_start) {
        return Err(FracPqError::InvalidConfig("penalty schedule must be positive and increasing".into()));
    }
    let f = ctx.at(alpha, 0.0);
    let (h, p) = (ctx.grid().h(), ctx.config.p);
    let n = ctx.grid().n();
    let pp = ctx.phi_p.values();
    let pq = ctx.phi_q.values();
    let mut starts = vec![pq.to_vec(), pp.iter().zip(pq).map(|(a, b)| 0.5 * (a + b)).collect(), pp.to_vec()];
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed ^ 0xBE7A);
    for _ in 0..opts.random_starts {
        starts.push(pq.iter().map(|v| v * rng.random_range(0.5..1.5)).collect());
    }
    let starts: Vec<Vec<f64>> = starts.iter().map(|s| unit_p(s, h, p)).collect();
    let scale_of = |x: &[f64]| f.asm_p().energy_raw(x) + alpha.abs() * lp_norm_pow_raw(h, x, p);
    let feasible = |x: &[f64]| f.h_alpha_raw(x) <= opts.feasibility_tol * scale_of(x);

    let results: Vec<(f64, Vec<f64>)> = starts
        .par_iter()
        .map(|x0| {
            let mut x = x0.clone();
            let mut rho = opts.rho_start;
            loop {
                let obj = BetaStarPenalty::new(&f, rho);
                let mopts = MinimizeOptions {
                    method: Method::Lbfgs { memory: 10 },
                    max_iterations: opts.max_iterations,
                    gradient_tol: 1e-12,
                    value_rel_tol: 1e-15,
                    stall_window: 20,
                    ..Default::default()
                };
                x = minimize(&obj, &x, &mopts).x;
                if rho >= opts.rho_max || feasible(&x) && rho >= opts.rho_start * opts.rho_factor {
                    break;
                }
                rho = (rho * opts.rho_factor).min(opts.rho_max);
            }
            if !feasible(&x) {
                x = restore(&x, pp, &feasible, h, p);
            }
            let penalty = BetaStarPenalty::new(&f, 0.0);
            (penalty.quotient_q(&x), x)
        })
        .collect();
    let (value, x) = results
        .into_iter()
        .filter(|(_, x)| feasible(x))
        .min_by(|a, b| a.0.total_cmp(&b.0))
        .ok_or(FracPqError::Infeasible { alpha, lambda1: ctx.lambda1_p })?;
    debug_assert_eq!(x.len(), n);
    Ok(BetaStar {
        alpha,
        value,
        constraint: f.h_alpha_raw(&x),
        scale: scale_of(&x),
        u: GridFunction::new(ctx.grid().clone(), x)?,
        starts: starts.len(),
    })
}

/// Smallest `t` in `[0, 1]` with `(1 - t) x + t phi_p` feasible, by bisection.
fn restore(x: &[f64], phi_p: &[f64], feasible: &dyn Fn(&[f64]) -> bool, h: f64, p: f64) -> Vec<f64> {
    let blend = |t: f64| -> Vec<f64> {
        let y: Vec<f64> = x.iter().zip(phi_p).map(|(a, b)| (1.0 - t) * a + t * b).collect();
        unit_p(&y, h, p)
    };
    let (mut lo, mut hi) = (0.0, 1.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if feasible(&blend(mid)) {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    blend(hi)
}

// ---------------------------------------------------------------------------
// lambda*(theta)

#[derive(Debug, Clone)]
pub struct CurveOptions {
    pub pq: PqOptions,
    /// Bracket tolerance; `None` means `1e-3 * max(1, lambda1_q)`.
    pub tol: Option<f64>,
    pub max_bisections: usize,
    /// Step halvings allowed in one continuation before giving up.
    pub continuation_halvings: usize,
    /// Extra solves above the final bracket that look for non-monotone answers.
    pub probes_above: usize,
    /// Seed each sample of a traced curve with the previous certificate.
    pub warm_start: bool,
    pub li_threshold: f64,
    /// Relative tolerance for treating a parameter as equal to an eigenvalue.
    pub equality_tol: f64,
}

impl Default for CurveOptions {
    fn default() -> Self {
        Self {
            pq: PqOptions::default(),
            tol: None,
            max_bisections: 60,
            continuation_halvings: 10,
            probes_above: 2,
            warm_start: true,
            li_threshold: LI_THRESHOLD,
            equality_tol: 1e-9,
        }
    }
}

impl CurveOptions {
    pub fn tolerance(&self, ctx: &ThresholdContext) -> f64 {
        self.tol.unwrap_or_else(|| ctx.default_tolerance())
    }
}

#[derive(Debug, Clone)]
pub struct CurveSample {
    pub theta: f64,
    /// Midpoint of the final bracket; `NaN` when no lower certificate was found.
    pub lambda_star: f64,
    pub lower: f64,
    pub upper: f64,
    pub bracket_width: f64,
    /// `lambda_star_upper_bound(theta, phi_q)`.
    pub upper_bound: f64,
    /// Certified solution at `lower`.
    pub existence_certificate: Option<SolutionReport>,
    /// Failed attempts at `upper`.
    pub nonexistence_evidence: Vec<SolutionReport>,
    pub inconclusive: bool,
    pub note: Option<String>,
    pub solves: usize,
}

struct Probe {
    found: Option<SolutionReport>,
    failures: Vec<SolutionReport>,
}

fn found(r: &SolutionReport) -> bool {
    r.status == SolutionStatus::Found
}

fn certificate_values(r: &SolutionReport) -> Option<Vec<f64>> {
    r.u.as_ref().map(|u| u.values().to_vec())
}

/// Existence test at `lambda` with seeds: continuation from a certificate at
/// `from`, then a full multistart solve.
fn probe(
    ctx: &ThresholdContext,
    theta: f64,
    lambda: f64,
    from: Option<(f64, &[f64])>,
    opts: &CurveOptions,
    solves: &mut usize,
) -> Probe {
    let mut failures = Vec::new();
    let mut seeds: Vec<Vec<f64>> = Vec::new();
    if let Some((start, u0)) = from {
        let mut cur = start;
        let mut u = u0.to_vec();
        let mut step = lambda - start;
        let min_step = (lambda - start).abs() / f64::powi(2.0, opts.continuation_halvings as i32);
        while step.abs() >= min_step && step != 0.0 {
            let target = if (lambda - cur).abs() <= step.abs() { lambda } else { cur + step };
            let r = solve_from(&ctx.at(target + theta, target), &u, &opts.pq);
            *solves += 1;
            if found(&r) {
                u = certificate_values(&r).expect("found reports carry u");
                cur = target;
                if cur == lambda {
                    return Probe { found: Some(r), failures };
                }
                step *= 2.0;
            } else {
                if target == lambda {
                    failures.push(r);
                }
                step *= 0.5;
            }
        }
        seeds.push(u0.to_vec());
        if cur != start {
            seeds.push(u);
        }
    }
    let mut pq = opts.pq.clone();
    pq.extra_starts.extend(seeds);
    let r = solve(&ctx.at(lambda + theta, lambda), &pq);
    *solves += 1;
    if found(&r) {
        Probe { found: Some(r), failures }
    } else {
        failures.push(r);
        Probe { found: None, failures }
    }
}

/// Candidate lower ends, all inside regions where a solution is known to exist.
fn anchors(ctx: &ThresholdContext, theta: f64, tol: f64) -> Vec<f64> {
    let lq = ctx.lambda1_q;
    let gap = theta - ctx.theta_star;
    if gap > tol {
        // alpha > lambda1_p, beta < lambda1_q.
        let m = (0.05 * lq.abs().max(1.0)).min(0.5 * gap);
        vec![lq - m, lq - 0.25 * m]
    } else if gap < -tol {
        // alpha < lambda1_p, beta > lambda1_q.
        let w = -gap;
        vec![lq + 0.5 * w, lq + 0.25 * w, lq + 0.75 * w]
    } else {
        vec![lq + tol, lq + 2.0 * tol, lq + 4.0 * tol, lq + 0.5 * tol]
    }
}

/// `lambda*(theta)` by bisection on the existence predicate.
pub fn lambda_star(ctx: &ThresholdContext, theta: f64, opts: &CurveOptions) -> Result<CurveSample> {
    lambda_star_seeded(ctx, theta, None, opts)
}

fn lambda_star_seeded(
    ctx: &ThresholdContext,
    theta: f64,
    seed: Option<&[f64]>,
    opts: &CurveOptions,
) -> Result<CurveSample> {
    let tol = opts.tolerance(ctx);
    if !(tol > 0.0) || !theta.is_finite() {
        return Err(FracPqError::InvalidArgument(format!("theta {theta} and tolerance {tol} must be finite, tol > 0")));
    }
    let upper_bound = lambda_star_upper_bound(ctx, theta, &ctx.phi_q)?;
    let mut solves = 0;

    let mut anchor = None;
    let mut misses = Vec::new();
    for lambda in anchors(ctx, theta, tol) {
        let mut pq = opts.pq.clone();
        if let Some(s) = seed {
            pq.extra_starts.push(s.to_vec());
            let r = solve_from(&ctx.at(lambda + theta, lambda), s, &opts.pq);
            solves += 1;
            if found(&r) {
                anchor = Some((lambda, r));
                break;
            }
        }
        let r = solve(&ctx.at(lambda + theta, lambda), &pq);
        solves += 1;
        if found(&r) {
            anchor = Some((lambda, r));
            break;
        }
        misses.push(r);
    }
    let Some((mut lo, mut cert)) = anchor else {
        return Ok(CurveSample {
            theta,
            lambda_star: f64::NAN,
            lower: f64::NAN,
            upper: upper_bound,
            bracket_width: f64::INFINITY,
            upper_bound,
            existence_certificate: None,
            nonexistence_evidence: misses,
            inconclusive: true,
            note: Some("no certified solution at any lower anchor".into()),
            solves,
        });
    };

    let mut hi = upper_bound + tol;
    let mut evidence = Vec::new();
    let mut tested_hi = false;
    let mut steps = 0;
    while hi - lo > tol && steps < opts.max_bisections {
        steps += 1;
        let mid = 0.5 * (lo + hi);
        let u = certificate_values(&cert).expect("certificate carries u");
        let pr = probe(ctx, theta, mid, Some((lo, &u)), opts, &mut solves);
        match pr.found {
            Some(r) => {
                lo = mid;
                cert = r;
            }
            None => {
                hi = mid;
                evidence = pr.failures;
                tested_hi = true;
            }
        }
    }
    let u = certificate_values(&cert).expect("certificate carries u");
    if !tested_hi {
        let pr = probe(ctx, theta, hi, Some((lo, &u)), opts, &mut solves);
        if let Some(r) = pr.found {
            // Solutions above the a-priori bound would contradict it.
            return Ok(CurveSample {
                theta,
                lambda_star: hi,
                lower: hi,
                upper: hi,
                bracket_width: 0.0,
                upper_bound,
                existence_certificate: Some(r),
                nonexistence_evidence: Vec::new(),
                inconclusive: true,
                note: Some("certified solution above the a-priori bound".into()),
                solves,
            });
        }
        evidence = pr.failures;
    }

    let mut inconclusive = false;
    let mut note = None;
    for k in 1..=opts.probes_above {
        let lambda = hi + k as f64 * tol;
        let mut pq = opts.pq.clone();
        pq.extra_starts.push(u.clone());
        let r = solve(&ctx.at(lambda + theta, lambda), &pq);
        solves += 1;
        if found(&r) {
            inconclusive = true;
            note = Some(format!("solution found at {lambda} above a failed bracket end {hi}"));
            break;
        }
    }
    if hi - lo > tol {
        inconclusive = true;
        note.get_or_insert_with(|| "bisection budget exhausted".into());
    }
    Ok(CurveSample {
        theta,
        lambda_star: 0.5 * (lo + hi),
        lower: lo,
        upper: hi,
        bracket_width: hi - lo,
        upper_bound,
        existence_certificate: Some(cert),
        nonexistence_evidence: evidence,
        inconclusive,
        note,
        solves,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct MonotonicityReport {
    /// Allowed slack, twice the bracket tolerance.
    pub tolerance: f64,
    /// `(k, increase)` where `lambda*` rose from sample `k` to `k + 1`.
    pub decreasing_violations: Vec<(usize, f64)>,
    /// `(k, decrease)` where `lambda* + theta` fell from sample `k` to `k + 1`.
    pub sum_violations: Vec<(usize, f64)>,
    pub inconclusive: Vec<usize>,
}

impl MonotonicityReport {
    pub fn passed(&self) -> bool {
        self.decreasing_violations.is_empty() && self.sum_violations.is_empty() && self.inconclusive.is_empty()
    }
}

#[derive(Debug, Clone)]
pub struct CurveTrace {
    pub samples: Vec<CurveSample>,
    pub monotonicity: MonotonicityReport,
}

pub fn monotonicity_report(samples: &[CurveSample], tol: f64) -> MonotonicityReport {
    let slack = 2.0 * tol;
    let mut report = MonotonicityReport {
        tolerance: slack,
        decreasing_violations: Vec::new(),
        sum_violations: Vec::new(),
        inconclusive: samples.iter().enumerate().filter(|(_, s)| s.inconclusive).map(|(k, _)| k).collect(),
    };
    for (k, w) in samples.windows(2).enumerate() {
        let (a, b) = (&w[0], &w[1]);
        if !(a.lambda_star.is_finite() && b.lambda_star.is_finite()) {
            continue;
        }
        let rise = b.lambda_star - a.lambda_star;
        if rise > slack {
            report.decreasing_violations.push((k, rise));
        }
        let fall = (a.lambda_star + a.theta) - (b.lambda_star + b.theta);
        if fall > slack {
            report.sum_violations.push((k, fall));
        }
    }
    report
}

/// `steps` samples of `lambda*` on an even grid over `[theta_min, theta_max]`.
pub fn trace_curve(
    ctx: &ThresholdContext,
    theta_min: f64,
    theta_max: f64,
    steps: usize,
    opts: &CurveOptions,
) -> Result<CurveTrace> {
    trace_curve_with(ctx, theta_min, theta_max, steps, opts, |_| Ok(()))
}

/// Like [`trace_curve`], handing each sample to `sink` in theta order as soon
/// as it and all earlier samples are done. Without warm start the samples are
/// computed in parallel and delivered at the end.
pub fn trace_curve_with(
    ctx: &ThresholdContext,
    theta_min: f64,
    theta_max: f64,
    steps: usize,
    opts: &CurveOptions,
    mut sink: impl FnMut(&CurveSample) -> Result<()>,
) -> Result<CurveTrace> {
    let thetas = theta_grid(theta_min, theta_max, steps)?;
    let samples = if opts.warm_start {
        let mut out: Vec<CurveSample> = Vec::with_capacity(steps);
        for &theta in &thetas {
            let seed =
                out.last().and_then(|s: &CurveSample| s.existence_certificate.as_ref()).and_then(certificate_values);
            let sample = lambda_star_seeded(ctx, theta, seed.as_deref(), opts)?;
            sink(&sample)?;
            out.push(sample);
        }
        out
    } else {
        let out = thetas.par_iter().map(|&theta| lambda_star(ctx, theta, opts)).collect::<Result<Vec<_>>>()?;
        out.iter().try_for_each(&mut sink)?;
        out
    };
    let monotonicity = monotonicity_report(&samples, opts.tolerance(ctx));
    Ok(CurveTrace { samples, monotonicity })
}

/// Even grid of `steps` points from `theta_min` to `theta_max`.
pub fn theta_grid(theta_min: f64, theta_max: f64, steps: usize) -> Result<Vec<f64>> {
    if !(theta_min < theta_max) || steps < 2 {
        return Err(FracPqError::InvalidArgument(format!(
            "need theta_min < theta_max and steps >= 2, got [{theta_min}, {theta_max}] with {steps}"
        )));
    }
    Ok((0..steps).map(|k| theta_min + (theta_max - theta_min) * k as f64 / (steps - 1) as f64).collect())
}

// ---------------------------------------------------------------------------
// Region classification

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    Exists,
    NotExists,
    Boundary,
    Unknown,
}

impl Verdict {
    pub fn as_str(&self) -> &'static str {
        match self {
            Self::Exists => "exists",
            Self::NotExists => "not_exists",
            Self::Boundary => "boundary",
            Self::Unknown => "unknown",
        }
    }
}

#[derive(Debug, Clone)]
pub struct RegionVerdict {
    pub alpha: f64,
    pub beta: f64,
    pub verdict: Verdict,
    /// Which part of the existence theory decided the point.
    pub theorem_ref: &'static str,
    /// The certified solution behind an `exists` verdict, or a solution that
    /// contradicted a `not_exists` prediction.
    pub certificate: Option<SolutionReport>,
    pub curve: Option<CurveSample>,
}

pub mod tags {
    pub const BELOW_BOTH: &str = "nonexistence-below-first-eigenvalues";
    pub const MIXED_QUADRANT: &str = "existence-mixed-quadrants";
    pub const CORNER: &str = "corner-linear-independence";
    pub const Q_LINE_BELOW: &str = "q-eigenvalue-line-below-alpha-star";
    pub const Q_LINE_ABOVE: &str = "q-eigenvalue-line-above-alpha-star";
    pub const Q_LINE_AT: &str = "q-eigenvalue-line-at-alpha-star";
    pub const LI_VIOLATED: &str = "eigenfunctions-proportional";
    pub const BELOW_CURVE: &str = "below-threshold-curve";
    pub const ABOVE_CURVE: &str = "above-threshold-curve";
    pub const ON_CURVE: &str = "on-threshold-curve";
    pub const ON_CURVE_BEYOND: &str = "on-threshold-curve-beyond-theta-star-plus";
    pub const BORDERLINE: &str = "borderline-theta-star-plus";
    pub const CURVE_INCONCLUSIVE: &str = "threshold-curve-inconclusive";
}

fn verdict(alpha: f64, beta: f64, verdict: Verdict, tag: &'static str) -> RegionVerdict {
    RegionVerdict { alpha, beta, verdict, theorem_ref: tag, certificate: None, curve: None }
}

/// Runs the solver at a predicted-existence point; without a certificate the
/// verdict degrades to `unknown`.
fn certify_exists(
    ctx: &ThresholdContext,
    mut v: RegionVerdict,
    seeds: &[Vec<f64>],
    opts: &CurveOptions,
) -> RegionVerdict {
    let f = ctx.at(v.alpha, v.beta);
    let mut r = solve(&f, &opts.pq);
    for s in seeds {
        if found(&r) {
            break;
        }
        r = solve_from(&f, s, &opts.pq);
    }
    if !found(&r) {
        v.verdict = Verdict::Unknown;
    }
    v.certificate = Some(r);
    v
}

/// Runs the solver at a predicted-nonexistence point; a certified solution
/// there is reported and the verdict degrades to `unknown`.
fn check_not_exists(ctx: &ThresholdContext, mut v: RegionVerdict, opts: &CurveOptions) -> RegionVerdict {
    let r = solve(&ctx.at(v.alpha, v.beta), &opts.pq);
    if found(&r) {
        v.verdict = Verdict::Unknown;
        v.certificate = Some(r);
    }
    v
}

pub fn region_classify(ctx: &ThresholdContext, alpha: f64, beta: f64, opts: &CurveOptions) -> RegionVerdict {
    let (lp, lq) = (ctx.lambda1_p, ctx.lambda1_q);
    let cmp = |x: f64, y: f64| {
        if (x - y).abs() <= opts.equality_tol * y.abs().max(1.0) {
            std::cmp::Ordering::Equal
        } else {
            x.total_cmp(&y)
        }
    };
    use std::cmp::Ordering::{Equal, Greater, Less};
    if !(alpha.is_finite() && beta.is_finite()) {
        return verdict(alpha, beta, Verdict::Unknown, tags::CURVE_INCONCLUSIVE);
    }
    let li_holds = ctx.li_distance > opts.li_threshold;
    match (cmp(alpha, lp), cmp(beta, lq)) {
        (Less | Equal, Less) | (Less, Equal) => {
            check_not_exists(ctx, verdict(alpha, beta, Verdict::NotExists, tags::BELOW_BOTH), opts)
        }
        (Greater, Less) | (Less, Greater) => {
            certify_exists(ctx, verdict(alpha, beta, Verdict::Exists, tags::MIXED_QUADRANT), &[], opts)
        }
        (Equal, Equal) => {
            if li_holds {
                check_not_exists(ctx, verdict(alpha, beta, Verdict::NotExists, tags::CORNER), opts)
            } else {
                certify_exists(ctx, verdict(alpha, beta, Verdict::Exists, tags::CORNER), &[], opts)
            }
        }
        (Greater, Equal) => match cmp(alpha, ctx.alpha_star) {
            Less => certify_exists(ctx, verdict(alpha, beta, Verdict::Exists, tags::Q_LINE_BELOW), &[], opts),
            Greater => check_not_exists(ctx, verdict(alpha, beta, Verdict::NotExists, tags::Q_LINE_ABOVE), opts),
            Equal => verdict(alpha, beta, Verdict::Boundary, tags::Q_LINE_AT),
        },
        (Greater | Equal, Greater) => {
            if !li_holds {
                return check_not_exists(ctx, verdict(alpha, beta, Verdict::NotExists, tags::LI_VIOLATED), opts);
            }
            classify_against_curve(ctx, alpha, beta, opts)
        }
    }
}

fn classify_against_curve(ctx: &ThresholdContext, alpha: f64, beta: f64, opts: &CurveOptions) -> RegionVerdict {
    let tol = opts.tolerance(ctx);
    let theta = alpha - beta;
    if (theta - ctx.theta_star_plus).abs() <= tol {
        return verdict(alpha, beta, Verdict::Boundary, tags::BORDERLINE);
    }
    let sample = match lambda_star(ctx, theta, opts) {
        Ok(s) if !s.inconclusive => s,
        Ok(s) => {
            let mut v = verdict(alpha, beta, Verdict::Unknown, tags::CURVE_INCONCLUSIVE);
            v.curve = Some(s);
            return v;
        }
        Err(_) => return verdict(alpha, beta, Verdict::Unknown, tags::CURVE_INCONCLUSIVE),
    };
    let beyond = theta > ctx.theta_star_plus;
    let mut v = if beta >= sample.upper {
        check_not_exists(ctx, verdict(alpha, beta, Verdict::NotExists, tags::ABOVE_CURVE), opts)
    } else if beta <= sample.lower {
        let cert = sample.existence_certificate.as_ref().and_then(|r| r.u.clone());
        certify_below_curve(ctx, verdict(alpha, beta, Verdict::Exists, tags::BELOW_CURVE), cert, opts)
    } else if beyond {
        check_not_exists(ctx, verdict(alpha, beta, Verdict::NotExists, tags::ON_CURVE_BEYOND), opts)
    } else {
        verdict(alpha, beta, Verdict::Boundary, tags::ON_CURVE)
    };
    v.curve = Some(sample);
    v
}

/// Below the curve the certificate at `lambda*(theta) - eps` is a
/// supersolution; truncating at it gives the solution.
fn certify_below_curve(
    ctx: &ThresholdContext,
    v: RegionVerdict,
    ubar: Option<GridFunction>,
    opts: &CurveOptions,
) -> RegionVerdict {
    let f = ctx.at(v.alpha, v.beta);
    if let Some(ubar) = &ubar {
        if let Ok(r) = solve_by_truncation(&f, ubar, &opts.pq) {
            if found(&r) {
                return RegionVerdict { certificate: Some(r), ..v };
            }
        }
    }
    let seeds: Vec<Vec<f64>> = ubar.into_iter().map(|u| u.into_values()).collect();
    certify_exists(ctx, v, &seeds, opts)
}
