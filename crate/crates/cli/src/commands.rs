//! One function per subcommand. Each fills a [`ResultRecord`], streams its
//! table through an [`Emitter`] and reports whether the numerics converged.

use std::sync::Arc;

use fracpq_core::eigen::{li_lower_bound, li_verdict};
use fracpq_core::{
    assemble, build_context, build_grid, first_eigenpair, random_suites, region_classify, solve, trace_curve_with,
    CurveOptions, FracPqError, Functionals, Grid, PQConfig, PqOptions, SolutionStatus, SolverOptions, ThresholdContext,
    Verdict,
};
use rayon::prelude::*;
use serde_json::{json, Value};

use crate::config::{RunConfig, Task};
use crate::error::CliError;
use crate::record::{num, Cell, Emitter, Fields, ResultRecord};

pub struct Outcome {
    pub record: ResultRecord,
    /// False when some part of the computation did not converge.
    pub converged: bool,
    /// Human-readable lines for the terminal.
    pub summary: Vec<String>,
}

pub fn run(cfg: &RunConfig, emitter: Emitter) -> Result<Outcome, CliError> {
    let mut record = ResultRecord::new(cfg.task.name());
    record.inputs = common_inputs(cfg);
    match &cfg.task {
        Task::Eigen { .. } => cmd_eigen(cfg, record, emitter),
        Task::Solve { .. } => cmd_solve(cfg, record, emitter),
        Task::Curve { .. } => cmd_curve(cfg, record, emitter),
        Task::Region { .. } => cmd_region(cfg, record, emitter),
        Task::Proptest { .. } => cmd_proptest(cfg, record, emitter),
        Task::LiCheck { .. } => cmd_li_check(cfg, record, emitter),
    }
}

fn common_inputs(cfg: &RunConfig) -> Fields {
    let mut inputs = Fields::new();
    inputs.insert("interval".into(), json!([num(cfg.interval.a), num(cfg.interval.b)]));
    inputs.insert("n".into(), json!(cfg.n));
    inputs.insert("seed".into(), json!(cfg.seed));
    if let Some(t) = cfg.tol {
        inputs.insert("tol".into(), num(t));
    }
    inputs
}

fn insert_problem(inputs: &mut Fields, problem: &PQConfig) {
    for (k, v) in [("s1", problem.s1), ("p", problem.p), ("s2", problem.s2), ("q", problem.q)] {
        inputs.insert(k.into(), num(v));
    }
}

fn grid(cfg: &RunConfig) -> Result<Arc<Grid>, CliError> {
    Ok(Arc::new(build_grid(cfg.interval, cfg.n)?))
}

fn eigen_options(cfg: &RunConfig) -> SolverOptions {
    let mut opts = SolverOptions { seed: cfg.seed, ..Default::default() };
    if let (Task::Eigen { .. }, Some(t)) = (&cfg.task, cfg.tol) {
        opts.residual_tol = t;
    }
    opts
}

fn pq_options(cfg: &RunConfig) -> PqOptions {
    let mut opts = PqOptions { seed: cfg.seed, ..Default::default() };
    if let (Task::Solve { .. }, Some(t)) = (&cfg.task, cfg.tol) {
        opts.residual_tol = t;
    }
    opts
}

fn curve_options(cfg: &RunConfig) -> CurveOptions {
    CurveOptions { pq: pq_options(cfg), tol: cfg.tol, ..Default::default() }
}

fn insert_context(outputs: &mut Fields, ctx: &ThresholdContext) {
    for (k, v) in [
        ("lambda_p", ctx.lambda1_p),
        ("lambda_q", ctx.lambda1_q),
        ("alpha_star", ctx.alpha_star),
        ("theta_star", ctx.theta_star),
        ("theta_star_plus", ctx.theta_star_plus),
        ("li_distance", ctx.li_distance),
    ] {
        outputs.insert(k.into(), num(v));
    }
}

fn cmd_eigen(cfg: &RunConfig, mut record: ResultRecord, mut emitter: Emitter) -> Result<Outcome, CliError> {
    let Task::Eigen { params } = &cfg.task else { unreachable!() };
    record.inputs.insert("s".into(), num(params.s()));
    record.inputs.insert("r".into(), num(params.r()));
    let asm = assemble(grid(cfg)?, *params)?;
    let pair = first_eigenpair(&asm, &eigen_options(cfg))?;

    emitter.begin(&["x", "phi"])?;
    for (x, v) in asm.grid().nodes().iter().zip(pair.phi.values()) {
        emitter.row(vec![Cell::num(*x), Cell::num(*v)])?;
    }
    record.outputs.insert("lambda".into(), num(pair.lambda));
    record.outputs.insert("residual".into(), num(pair.residual));
    record.outputs.insert("iterations".into(), json!(pair.iterations));
    record.outputs.insert("converged".into(), json!(pair.converged));
    record.diagnostics.insert("start".into(), json!(pair.start));
    record.diagnostics.insert("min_phi".into(), num(pair.phi.min_value()));
    emitter.finish(&mut record)?;
    let summary = vec![
        format!("lambda1 = {}", pair.lambda),
        format!("residual = {:e}", pair.residual),
        format!("iterations = {}, converged = {}", pair.iterations, pair.converged),
    ];
    Ok(Outcome { record, converged: pair.converged, summary })
}

fn cmd_solve(cfg: &RunConfig, mut record: ResultRecord, mut emitter: Emitter) -> Result<Outcome, CliError> {
    let Task::Solve { problem, alpha, beta } = &cfg.task else { unreachable!() };
    insert_problem(&mut record.inputs, problem);
    record.inputs.insert("alpha".into(), num(*alpha));
    record.inputs.insert("beta".into(), num(*beta));
    let f = Functionals::new(*problem, grid(cfg)?, *alpha, *beta, &eigen_options(cfg))?;
    let report = solve(&f, &pq_options(cfg));

    emitter.begin(&["x", "u"])?;
    if let Some(u) = &report.u {
        for (x, v) in f.grid().nodes().iter().zip(u.values()) {
            emitter.row(vec![Cell::num(*x), Cell::num(*v)])?;
        }
    }
    let d = report.diagnostics;
    let out = &mut record.outputs;
    out.insert("status".into(), json!(report.status.as_str()));
    out.insert("method".into(), json!(report.method.as_str()));
    out.insert("residual".into(), num(report.residual));
    out.insert("min_interior".into(), num(report.min_interior));
    out.insert("max_norm".into(), num(report.max_norm));
    out.insert("objective".into(), num(report.objective));
    out.insert("lambda_p".into(), num(f.lambda_p()));
    out.insert("lambda_q".into(), num(f.lambda_q()));
    let diag = &mut record.diagnostics;
    diag.insert("h".into(), num(d.h));
    diag.insert("g".into(), num(d.g));
    diag.insert("i_plus".into(), num(d.i));
    diag.insert("t_scale".into(), d.t_scale.map_or(Value::Null, num));
    diag.insert("starts".into(), json!(report.starts));
    emitter.finish(&mut record)?;
    let summary = vec![
        format!("lambda_p = {}, lambda_q = {}", f.lambda_p(), f.lambda_q()),
        format!("status = {} (method {})", report.status.as_str(), report.method.as_str()),
        format!("residual = {:e}, min = {:e}, max = {:e}", report.residual, report.min_interior, report.max_norm),
    ];
    Ok(Outcome { record, converged: report.status != SolutionStatus::Inconclusive, summary })
}

fn cmd_curve(cfg: &RunConfig, mut record: ResultRecord, mut emitter: Emitter) -> Result<Outcome, CliError> {
    let Task::Curve { problem, theta_min, theta_max, steps, warm_start } = &cfg.task else { unreachable!() };
    insert_problem(&mut record.inputs, problem);
    let ctx = build_context(*problem, grid(cfg)?, &eigen_options(cfg))?;
    let opts = CurveOptions { warm_start: *warm_start, ..curve_options(cfg) };
    let lo = theta_min.unwrap_or(ctx.theta_star - 2.0);
    let hi = theta_max.unwrap_or(ctx.theta_star_plus + 2.0);
    record.inputs.insert("theta_min".into(), num(lo));
    record.inputs.insert("theta_max".into(), num(hi));
    record.inputs.insert("steps".into(), json!(steps));
    record.inputs.insert("warm_start".into(), json!(warm_start));

    emitter.begin(&["theta", "lambda_star", "alpha", "beta", "bracket"])?;
    let mut write_error = None;
    let traced = trace_curve_with(&ctx, lo, hi, *steps, &opts, |s| {
        let row = vec![
            Cell::num(s.theta),
            Cell::num(s.lambda_star),
            Cell::num(s.lambda_star + s.theta),
            Cell::num(s.lambda_star),
            Cell::num(s.bracket_width),
        ];
        emitter.row(row).map_err(|e| {
            write_error = Some(e);
            FracPqError::InvalidArgument("output failed".into())
        })
    });
    if let Some(e) = write_error {
        return Err(e);
    }
    let trace = traced?;
    let m = &trace.monotonicity;
    insert_context(&mut record.outputs, &ctx);
    let out = &mut record.outputs;
    out.insert("tolerance".into(), num(opts.tolerance(&ctx)));
    out.insert("monotone".into(), json!(m.passed()));
    out.insert("decreasing_violations".into(), json!(m.decreasing_violations.len()));
    out.insert("sum_violations".into(), json!(m.sum_violations.len()));
    out.insert("inconclusive".into(), json!(m.inconclusive));
    let samples: Vec<Value> = trace
        .samples
        .iter()
        .map(|s| {
            json!({
                "theta": num(s.theta),
                "lower": num(s.lower),
                "upper": num(s.upper),
                "upper_bound": num(s.upper_bound),
                "solves": s.solves,
                "certificate_method": s.existence_certificate.as_ref().map(|c| c.method.as_str()),
                "note": s.note,
            })
        })
        .collect();
    record.diagnostics.insert("samples".into(), Value::Array(samples));
    emitter.finish(&mut record)?;
    let summary = vec![
        format!(
            "lambda_p = {}, lambda_q = {}, theta* = {}, theta*+ = {}",
            ctx.lambda1_p, ctx.lambda1_q, ctx.theta_star, ctx.theta_star_plus
        ),
        format!(
            "{} samples on [{lo}, {hi}], monotone = {} ({} decreasing, {} sum violations, {} inconclusive)",
            trace.samples.len(),
            m.passed(),
            m.decreasing_violations.len(),
            m.sum_violations.len(),
            m.inconclusive.len()
        ),
    ];
    Ok(Outcome { record, converged: m.inconclusive.is_empty(), summary })
}

fn cmd_region(cfg: &RunConfig, mut record: ResultRecord, mut emitter: Emitter) -> Result<Outcome, CliError> {
    let Task::Region { problem, alpha_grid, beta_grid, relative } = &cfg.task else { unreachable!() };
    insert_problem(&mut record.inputs, problem);
    let ctx = build_context(*problem, grid(cfg)?, &eigen_options(cfg))?;
    let opts = curve_options(cfg);
    let shift = |v: &[f64], by: f64| -> Vec<f64> { v.iter().map(|x| if *relative { x + by } else { *x }).collect() };
    let alphas = shift(alpha_grid, ctx.lambda1_p);
    let betas = shift(beta_grid, ctx.lambda1_q);
    record.inputs.insert("alpha_grid".into(), json!(alphas.iter().map(|x| num(*x)).collect::<Vec<_>>()));
    record.inputs.insert("beta_grid".into(), json!(betas.iter().map(|x| num(*x)).collect::<Vec<_>>()));
    record.inputs.insert("relative".into(), json!(relative));

    emitter.begin(&["alpha", "beta", "verdict"])?;
    let mut counts = [0usize; 4];
    let mut tags = Vec::new();
    for &beta in &betas {
        let row: Vec<_> = alphas.par_iter().map(|&alpha| region_classify(&ctx, alpha, beta, &opts)).collect();
        for v in row {
            let slot = match v.verdict {
                Verdict::Exists => 0,
                Verdict::NotExists => 1,
                Verdict::Boundary => 2,
                Verdict::Unknown => 3,
            };
            counts[slot] += 1;
            emitter.row(vec![Cell::num(v.alpha), Cell::num(v.beta), Cell::text(v.verdict.as_str())])?;
            tags.push(json!({
                "alpha": num(v.alpha),
                "beta": num(v.beta),
                "reason": v.theorem_ref,
                "residual": v.certificate.as_ref().map(|c| num(c.residual)),
            }));
        }
    }
    insert_context(&mut record.outputs, &ctx);
    for (name, c) in ["exists", "not_exists", "boundary", "unknown"].iter().zip(counts) {
        record.outputs.insert(format!("count_{name}"), json!(c));
    }
    record.diagnostics.insert("points".into(), Value::Array(tags));
    emitter.finish(&mut record)?;
    let summary = vec![
        format!("lambda_p = {}, lambda_q = {}", ctx.lambda1_p, ctx.lambda1_q),
        format!(
            "{} points: {} exists, {} not_exists, {} boundary, {} unknown",
            alphas.len() * betas.len(),
            counts[0],
            counts[1],
            counts[2],
            counts[3]
        ),
    ];
    Ok(Outcome { record, converged: true, summary })
}

fn cmd_proptest(cfg: &RunConfig, mut record: ResultRecord, mut emitter: Emitter) -> Result<Outcome, CliError> {
    let Task::Proptest { p, q, cases } = &cfg.task else { unreachable!() };
    record.inputs.insert("p".into(), num(*p));
    record.inputs.insert("q".into(), num(*q));
    record.inputs.insert("cases".into(), json!(cases));
    let results = random_suites(*cases, cfg.seed, *p, *q);

    emitter.begin(&["suite", "variant", "cases", "passed", "failed"])?;
    let mut failed = 0;
    for r in &results {
        failed += r.violations;
        emitter.row(vec![
            Cell::text(&r.suite),
            Cell::text(&r.variant),
            Cell::num(r.cases as f64),
            Cell::num((r.cases - r.violations) as f64),
            Cell::num(r.violations as f64),
        ])?;
        record.diagnostics.insert(format!("{}_{}_worst_slack", r.suite, r.variant), num(r.worst_relative_slack));
    }
    record.outputs.insert("total_cases".into(), json!(results.iter().map(|r| r.cases).sum::<usize>()));
    record.outputs.insert("total_failed".into(), json!(failed));
    emitter.finish(&mut record)?;
    let summary = results
        .iter()
        .map(|r| format!("{} {}: {}/{} passed", r.suite, r.variant, r.cases - r.violations, r.cases))
        .collect();
    Ok(Outcome { record, converged: true, summary })
}

fn cmd_li_check(cfg: &RunConfig, mut record: ResultRecord, mut emitter: Emitter) -> Result<Outcome, CliError> {
    let Task::LiCheck { problem, threshold } = &cfg.task else { unreachable!() };
    insert_problem(&mut record.inputs, problem);
    record.inputs.insert("li_threshold".into(), num(*threshold));
    let g = grid(cfg)?;
    let opts = eigen_options(cfg);
    let pp = first_eigenpair(&assemble(g.clone(), problem.p_params())?, &opts)?;
    let pq = first_eigenpair(&assemble(g.clone(), problem.q_params())?, &opts)?;
    let distance = fracpq_core::li_distance(&pp, &pq)?;
    let verdict = match li_verdict(problem, distance, *threshold) {
        Some(true) => "independent",
        Some(false) => "dependent",
        None => "outside_window",
    };

    emitter.begin(&["x", "phi_p", "phi_q"])?;
    for ((x, a), b) in g.nodes().iter().zip(pp.phi.values()).zip(pq.phi.values()) {
        emitter.row(vec![Cell::num(*x), Cell::num(*a), Cell::num(*b)])?;
    }
    let out = &mut record.outputs;
    out.insert("lambda_p".into(), num(pp.lambda));
    out.insert("lambda_q".into(), num(pq.lambda));
    out.insert("distance".into(), num(distance));
    out.insert("window".into(), json!([num(li_lower_bound(problem)), num(problem.s1)]));
    out.insert("verdict".into(), json!(verdict));
    record.diagnostics.insert("residual_p".into(), num(pp.residual));
    record.diagnostics.insert("residual_q".into(), num(pq.residual));
    emitter.finish(&mut record)?;
    let summary = vec![
        format!("lambda_p = {}, lambda_q = {}", pp.lambda, pq.lambda),
        format!(
            "distance = {distance:e}, window s2 in ({}, {}), verdict = {verdict}",
            li_lower_bound(problem),
            problem.s1
        ),
    ];
    Ok(Outcome { record, converged: pp.converged && pq.converged, summary })
}
