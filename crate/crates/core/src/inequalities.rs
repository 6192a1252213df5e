//! Pointwise checkers for the elementary power inequalities and the discrete
//! Picone inequalities used by the existence theory.
//!
//! Each checker returns the slack `rhs - lhs` together with a scale
//! `max(|lhs|, |rhs|, 1)`; a case counts as violated when
//! `slack < -1e-12 * scale`.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::domain::GridFunction;
use crate::energy::{abs_pow, signed_pow};
use crate::error::{FracPqError, Result};

pub const SLACK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ElementaryVariant {
    /// Positive and negative part monotonicity, `gamma > 1`.
    I,
    /// Lower bound of `|a|^{g-2}a - |b|^{g-2}b`, `gamma >= 2`.
    II,
    /// Mean-value bound on `| |a|^g - |b|^g |`.
    III,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PiconeVariant {
    I,
    II,
    III,
    IV,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarginReport {
    pub lhs: f64,
    pub rhs: f64,
    pub slack: f64,
    pub scale: f64,
    pub violated: bool,
}

impl MarginReport {
    fn new(lhs: f64, rhs: f64) -> Self {
        let slack = rhs - lhs;
        let scale = lhs.abs().max(rhs.abs()).max(1.0);
        Self { lhs, rhs, slack, scale, violated: slack < -SLACK_TOL * scale }
    }

    pub fn relative_slack(&self) -> f64 {
        self.slack / self.scale
    }

    fn worse(self, other: Self) -> Self {
        if other.relative_slack() < self.relative_slack() {
            other
        } else {
            self
        }
    }
}

/// Constant of the elementary inequality (ii): with it the bound is sharp at
/// `a = -b`.
pub fn elementary_ii_constant(gamma: f64) -> f64 {
    2f64.powf(gamma - 2.0)
}

/// Evaluates one elementary inequality at `(a, b)`.
///
/// Variant (ii) is checked in its directional form
/// `C sign(a-b) (J(a) - J(b)) >= |a-b|^{gamma-1}` with `J(t) = |t|^{gamma-2} t`
/// and `C = 2^{gamma-2}`.
pub fn elementary_inequality_check(a: f64, b: f64, gamma: f64, variant: ElementaryVariant) -> Result<MarginReport> {
    let bad = |msg: &str| Err(FracPqError::InvalidArgument(format!("{msg}, got gamma = {gamma}")));
    match variant {
        ElementaryVariant::I => {
            if !(gamma > 1.0) {
                return bad("variant (i) needs gamma > 1");
            }
            let lead = signed_pow(a - b, gamma);
            let (ap, bp) = (a.max(0.0), b.max(0.0));
            let (am, bm) = ((-a).max(0.0), (-b).max(0.0));
            let plus = MarginReport::new(abs_pow(ap - bp, gamma), lead * (ap - bp));
            let minus = MarginReport::new(abs_pow(am - bm, gamma), lead * (bm - am));
            Ok(plus.worse(minus))
        }
        ElementaryVariant::II => {
            if !(gamma >= 2.0) {
                return bad("variant (ii) needs gamma >= 2");
            }
            let c = elementary_ii_constant(gamma);
            let diff = signed_pow(a, gamma) - signed_pow(b, gamma);
            let sign = if a >= b { 1.0 } else { -1.0 };
            Ok(MarginReport::new(abs_pow(a - b, gamma - 1.0), c * sign * diff))
        }
        ElementaryVariant::III => {
            if !(gamma > 0.0) {
                return bad("variant (iii) needs gamma > 0");
            }
            let lhs = (abs_pow(a, gamma) - abs_pow(b, gamma)).abs();
            let rhs = gamma * (abs_pow(a, gamma - 1.0) + abs_pow(b, gamma - 1.0)) * (a - b).abs();
            Ok(MarginReport::new(lhs, rhs))
        }
    }
}

/// Worst pair found by [`picone_check`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PiconeReport {
    pub worst: MarginReport,
    pub pair: (usize, usize),
    /// Largest `|slack| / scale` over all pairs.
    pub max_abs_relative_slack: f64,
    pub pairs_checked: usize,
    pub violations: usize,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PiconeArgs {
    pub r1: f64,
    pub r2: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Pointwise value of one Picone variant on the node pair `(fx, gx)`, `(fy, gy)`.
pub fn picone_pointwise(fx: f64, fy: f64, gx: f64, gy: f64, args: PiconeArgs, variant: PiconeVariant) -> MarginReport {
    let PiconeArgs { r1, r2, alpha, beta } = args;
    let df = fx - fy;
    let dg = gx - gy;
    let mixed = |f: f64, g: f64| g.powf(r1) / (alpha * f.powf(r1 - 1.0) + beta * f.powf(r2 - 1.0));
    match variant {
        PiconeVariant::I => {
            let q = |f: f64, g: f64| g.powf(r2) / f.powf(r2 - 1.0);
            let lhs = signed_pow(df, r1) * (q(fx, gx) - q(fy, gy));
            let rhs = abs_pow(dg, r2) * abs_pow(df, r1 - r2);
            MarginReport::new(lhs, rhs)
        }
        PiconeVariant::II => {
            let q = |f: f64, g: f64| g.powf(r1) / f.powf(r1 - 1.0);
            let e = |f: f64, g: f64| g.powf(r1 - r2 + 1.0) / f.powf(r1 - r2);
            let lhs = signed_pow(df, r2) * (q(fx, gx) - q(fy, gy));
            let rhs = signed_pow(dg, r2) * (e(fx, gx) - e(fy, gy));
            MarginReport::new(lhs, rhs)
        }
        PiconeVariant::III => {
            let lhs = signed_pow(df, r1) * (mixed(fx, gx) - mixed(fy, gy));
            MarginReport::new(lhs, abs_pow(dg, r1))
        }
        PiconeVariant::IV => {
            let lhs = signed_pow(df, r2) * (mixed(fx, gx) - mixed(fy, gy));
            let k = r1 / r2;
            MarginReport::new(lhs, abs_pow(gx.powf(k) - gy.powf(k), r2))
        }
    }
}

/// Evaluates a Picone variant on every ordered node pair `i != j`.
pub fn picone_check(
    f: &GridFunction,
    g: &GridFunction,
    args: PiconeArgs,
    variant: PiconeVariant,
) -> Result<PiconeReport> {
    let PiconeArgs { r1, r2, alpha, beta } = args;
    if !(r1 > 1.0 && r2 > 1.0 && r2 <= r1) {
        return Err(FracPqError::InvalidArgument(format!("need 1 < r2 <= r1, got r1 = {r1}, r2 = {r2}")));
    }
    if matches!(variant, PiconeVariant::III | PiconeVariant::IV) && !(alpha >= 1.0 && beta >= 1.0) {
        return Err(FracPqError::InvalidArgument(format!(
            "variants (iii) and (iv) need alpha, beta >= 1, got {alpha}, {beta}"
        )));
    }
    f.check_same_grid(g.grid())?;
    let (fv, gv) = (f.values(), g.values());
    if let Some((index, &value)) = fv.iter().enumerate().find(|(_, v)| !(**v > 0.0)) {
        return Err(FracPqError::NonPositive { index, value });
    }
    if let Some((index, &value)) = gv.iter().enumerate().find(|(_, v)| !(**v >= 0.0)) {
        return Err(FracPqError::InvalidArgument(format!("g must be nonnegative, found {value} at node {index}")));
    }
    let n = fv.len();
    let mut worst = None::<(MarginReport, (usize, usize))>;
    let mut max_abs = 0.0f64;
    let mut violations = 0;
    let mut checked = 0;
    for i in 0..n {
        for j in 0..n {
            if i == j {
                continue;
            }
            let m = picone_pointwise(fv[i], fv[j], gv[i], gv[j], args, variant);
            checked += 1;
            violations += usize::from(m.violated);
            max_abs = max_abs.max(m.relative_slack().abs());
            if worst.is_none_or(|(w, _)| m.relative_slack() < w.relative_slack()) {
                worst = Some((m, (i, j)));
            }
        }
    }
    let (worst, pair) = worst.unwrap_or((MarginReport::new(0.0, 0.0), (0, 0)));
    Ok(PiconeReport { worst, pair, max_abs_relative_slack: max_abs, pairs_checked: checked, violations })
}

/// Pass/fail counts of one randomized suite.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteResult {
    pub suite: String,
    pub variant: String,
    pub cases: usize,
    pub violations: usize,
    /// Smallest `slack / scale` seen.
    pub worst_relative_slack: f64,
}

/// Runs every elementary and pointwise Picone variant on `cases` seeded
/// random inputs. The Picone variants use exponents `(r1, r2)` with
/// `alpha, beta` drawn from `[1, 10)` and positive values spread over three
/// decades.
pub fn random_suites(cases: usize, seed: u64, r1: f64, r2: f64) -> Vec<SuiteResult> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut out = Vec::new();
    let tally = |suite: &str, variant: &str, reports: &[MarginReport]| SuiteResult {
        suite: suite.to_string(),
        variant: variant.to_string(),
        cases: reports.len(),
        violations: reports.iter().filter(|r| r.violated).count(),
        worst_relative_slack: reports.iter().map(MarginReport::relative_slack).fold(f64::INFINITY, f64::min),
    };
    let elementary = [
        (ElementaryVariant::I, "i", 1.0001, 6.0),
        (ElementaryVariant::II, "ii", 2.0, 6.0),
        (ElementaryVariant::III, "iii", 0.05, 6.0),
    ];
    for (variant, name, lo, hi) in elementary {
        let reports: Vec<MarginReport> = (0..cases)
            .map(|_| {
                let a = rng.random_range(-5.0..5.0);
                let b = rng.random_range(-5.0..5.0);
                let gamma = rng.random_range(lo..hi);
                elementary_inequality_check(a, b, gamma, variant).expect("gamma drawn inside the valid range")
            })
            .collect();
        out.push(tally("elementary", name, &reports));
    }
    let picone =
        [(PiconeVariant::I, "i"), (PiconeVariant::II, "ii"), (PiconeVariant::III, "iii"), (PiconeVariant::IV, "iv")];
    for (variant, name) in picone {
        let reports: Vec<MarginReport> = (0..cases)
            .map(|_| {
                let args = PiconeArgs { r1, r2, alpha: rng.random_range(1.0..10.0), beta: rng.random_range(1.0..10.0) };
                let mut positive = || 10f64.powf(rng.random_range(-2.0..1.0));
                let (fx, fy, gx, gy) = (positive(), positive(), positive(), positive());
                picone_pointwise(fx, fy, gx, gy, args, variant)
            })
            .collect();
        out.push(tally("picone", name, &reports));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::domain::{build_grid, Interval};
    use std::sync::Arc;

    #[test]
    fn elementary_examples() {
        let m = elementary_inequality_check(1.0, -1.0, 2.0, ElementaryVariant::I).unwrap();
        assert!(!m.violated);
        let plus = MarginReport::new(1.0, 2.0);
        assert!(m.relative_slack() <= plus.relative_slack());

        let m = elementary_inequality_check(0.7, 0.7, 3.0, ElementaryVariant::I).unwrap();
        assert_eq!((m.lhs, m.rhs), (0.0, 0.0));

        let m = elementary_inequality_check(2.0, 1.0, 2.0, ElementaryVariant::III).unwrap();
        assert_eq!((m.lhs, m.rhs), (3.0, 6.0));
    }

    #[test]
    fn elementary_ii_sharp_at_antipodes() {
        for gamma in [2.0, 2.5, 3.0, 5.0] {
            let m = elementary_inequality_check(1.0, -1.0, gamma, ElementaryVariant::II).unwrap();
            assert!(m.relative_slack().abs() < 1e-14);
        }
    }

    #[test]
    fn variant_preconditions() {
        assert!(elementary_inequality_check(1.0, 0.0, 1.0, ElementaryVariant::I).is_err());
        assert!(elementary_inequality_check(1.0, 0.0, 1.5, ElementaryVariant::II).is_err());
        assert!(elementary_inequality_check(1.0, 0.0, 0.0, ElementaryVariant::III).is_err());
    }

    fn grid_fn(v: Vec<f64>) -> GridFunction {
        let g = Arc::new(build_grid(Interval::unit(), v.len()).unwrap());
        GridFunction::new(g, v).unwrap()
    }

    #[test]
    fn picone_equality_for_multiples() {
        let g = grid_fn(vec![0.3, 1.2, 2.0, 0.9, 0.1]);
        let args = PiconeArgs { r1: 3.0, r2: 2.0, alpha: 1.0, beta: 1.0 };
        for c in [1.0, 3.0] {
            let f = g.scaled(c);
            for v in [PiconeVariant::I, PiconeVariant::II] {
                let rep = picone_check(&f, &g, args, v).unwrap();
                assert!(rep.max_abs_relative_slack < 1e-12, "{v:?} {rep:?}");
            }
        }
    }

    #[test]
    fn picone_rejects_nonpositive_f() {
        let f = grid_fn(vec![1.0, 0.0, 2.0]);
        let g = grid_fn(vec![1.0, 1.0, 1.0]);
        let args = PiconeArgs { r1: 3.0, r2: 2.0, alpha: 1.0, beta: 1.0 };
        assert_eq!(
            picone_check(&f, &g, args, PiconeVariant::I).unwrap_err(),
            FracPqError::NonPositive { index: 1, value: 0.0 }
        );
        let bad = PiconeArgs { alpha: 0.5, ..args };
        assert!(picone_check(&g, &g, bad, PiconeVariant::III).is_err());
    }

    #[test]
    fn picone_variant_iii_random_positive() {
        let f = grid_fn(vec![0.5, 1.7, 0.2, 3.1, 0.9, 1.1]);
        let g = grid_fn(vec![2.2, 0.4, 1.0, 0.05, 1.4, 0.0]);
        let args = PiconeArgs { r1: 3.0, r2: 2.0, alpha: 1.0, beta: 1.0 };
        let rep = picone_check(&f, &g, args, PiconeVariant::III).unwrap();
        assert_eq!(rep.violations, 0);
        assert_eq!(rep.pairs_checked, 30);
    }

    #[test]
    fn random_suites_are_seeded() {
        let a = random_suites(200, 42, 3.0, 2.0);
        assert_eq!(a, random_suites(200, 42, 3.0, 2.0));
        assert_eq!(a.len(), 7);
        assert!(a.iter().all(|r| r.cases == 200 && r.violations == 0));
        assert_ne!(a, random_suites(200, 43, 3.0, 2.0));
    }
}
