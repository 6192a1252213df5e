//! Discretized fractional (p,q)-Laplacian Dirichlet problems on an interval:
//! first eigenpairs, Nehari and truncation solvers, and the threshold curve
//! separating existence from non-existence of positive solutions.
//!
//! ```
//! use std::sync::Arc;
//! use fracpq_core::{build_context, build_grid, lambda_star, CurveOptions, Interval, PQConfig, SolverOptions};
//!
//! let config = PQConfig::new(Interval::unit(), 0.7, 3.0, 0.5, 2.0)?;
//! let grid = Arc::new(build_grid(Interval::unit(), 16)?);
//! let ctx = build_context(config, grid, &SolverOptions::default())?;
//! let sample = lambda_star(&ctx, ctx.theta_star_plus + 1.0, &CurveOptions::default())?;
//! assert!((sample.lambda_star - ctx.lambda1_q).abs() < 2.0 * ctx.default_tolerance());
//! # Ok::<(), fracpq_core::FracPqError>(())
//! ```

// Negated comparisons are how NaN inputs get rejected.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod domain;
pub mod eigen;
pub mod energy;
pub mod error;
pub mod inequalities;
pub mod optimize;
pub mod pq;
pub mod threshold;

pub use domain::{build_grid, exterior_kernel_weight, FractionalParams, Grid, GridFunction, Interval, PQConfig};
pub use eigen::{
    first_eigenpair, li_condition, li_distance, rayleigh_quotient, simplicity_check, Eigenpair, SimplicityReport,
    SolverOptions,
};
pub use energy::{assemble, lp_norm_pow, EnergyAssembly};
pub use error::{FracPqError, Result};
pub use inequalities::{
    elementary_inequality_check, picone_check, random_suites, ElementaryVariant, MarginReport, PiconeArgs,
    PiconeReport, PiconeVariant, SuiteResult,
};
pub use pq::{
    g_beta, h_alpha, i_plus, nehari_scale, solve, solve_by_truncation, solve_from, solve_global_min, solve_nehari_min,
    truncated_force, Functionals, NehariDiagnostics, PqOptions, SolutionReport, SolutionStatus, SolveMethod,
};
pub use threshold::{
    beta_star, build_context, lambda_star, lambda_star_upper_bound, region_classify, theta_grid, trace_curve,
    trace_curve_with, BetaStar, BetaStarOptions, CurveOptions, CurveSample, CurveTrace, MonotonicityReport,
    RegionVerdict, ThresholdContext, Verdict,
};
