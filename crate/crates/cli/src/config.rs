//! Flag parsing and the flat `key = value` configuration file.
//!
//! Flags override file values. Every key is validated when the command's
//! [`RunConfig`] is built, so problems surface before any computation.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use fracpq_core::{FractionalParams, Interval, PQConfig};
use serde::{Deserialize, Serialize};

use crate::error::CliError;

#[derive(Debug, Parser)]
#[command(
    name = "fracpq",
    version,
    about = "Fractional (p,q)-Laplacian eigenvalue, solver and threshold-curve toolkit"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// First eigenpair of a single fractional r-Laplacian.
    Eigen {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        s: Option<f64>,
        #[arg(long)]
        r: Option<f64>,
    },
    /// Positive solution at one (alpha, beta).
    Solve {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        alpha: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        beta: Option<f64>,
    },
    /// Threshold curve lambda*(theta) on an even theta grid.
    Curve {
        #[command(flatten)]
        common: Common,
        #[arg(long, allow_hyphen_values = true)]
        theta_min: Option<f64>,
        #[arg(long, allow_hyphen_values = true)]
        theta_max: Option<f64>,
        #[arg(long)]
        steps: Option<usize>,
        /// Compute samples independently and in parallel.
        #[arg(long)]
        no_warm_start: bool,
    },
    /// Existence verdicts on an (alpha, beta) lattice.
    Region {
        #[command(flatten)]
        common: Common,
        /// `lo:hi:count` or a comma-separated list.
        #[arg(long, allow_hyphen_values = true)]
        alpha_grid: Option<String>,
        #[arg(long, allow_hyphen_values = true)]
        beta_grid: Option<String>,
        /// Grid values are offsets from the first eigenvalues.
        #[arg(long)]
        relative: bool,
    },
    /// Seeded random checks of the elementary and Picone inequalities.
    Proptest {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        cases: Option<usize>,
    },
    /// Linear independence of the two first eigenfunctions.
    LiCheck {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        li_threshold: Option<f64>,
    },
}

#[derive(Debug, Clone, Default, Args)]
pub struct Common {
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub s1: Option<f64>,
    #[arg(long)]
    pub p: Option<f64>,
    #[arg(long)]
    pub s2: Option<f64>,
    #[arg(long)]
    pub q: Option<f64>,
    #[arg(long, num_args = 2, value_names = ["A", "B"], allow_hyphen_values = true)]
    pub interval: Option<Vec<f64>>,
    #[arg(long)]
    pub n: Option<usize>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long, value_enum)]
    pub emit: Option<Emit>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Residual tolerance for eigen/solve, bracket tolerance for curve/region.
    #[arg(long)]
    pub tol: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    Csv,
    Json,
}

/// Values from the configuration file, keyed by normalized name, with the
/// line each came from.
#[derive(Debug, Default)]
pub struct FileValues {
    path: PathBuf,
    values: BTreeMap<String, (usize, String)>,
}

const KNOWN_KEYS: &[&str] = &[
    "s1",
    "p",
    "s2",
    "q",
    "s",
    "r",
    "interval",
    "n",
    "seed",
    "emit",
    "out",
    "tol",
    "alpha",
    "beta",
    "theta_min",
    "theta_max",
    "steps",
    "warm_start",
    "alpha_grid",
    "beta_grid",
    "relative",
    "cases",
    "li_threshold",
];

impl FileValues {
    pub fn parse(path: &Path, text: &str) -> Result<Self, CliError> {
        let mut values = BTreeMap::new();
        for (k, raw) in text.lines().enumerate() {
            let line = k + 1;
            let body = raw.split('#').next().unwrap_or("").trim();
            if body.is_empty() {
                continue;
            }
            let err = |key: &str, message: String| CliError::Config {
                path: path.to_path_buf(),
                line,
                key: key.to_string(),
                message,
            };
            let Some((key, value)) = body.split_once('=') else {
                return Err(err("", format!("expected `key = value`, found `{body}`")));
            };
            let key = key.trim().replace('-', "_");
            if !KNOWN_KEYS.contains(&key.as_str()) {
                return Err(err(&key, "unknown key".into()));
            }
            if values.insert(key.clone(), (line, value.trim().to_string())).is_some() {
                return Err(err(&key, "duplicate key".into()));
            }
        }
        Ok(Self { path: path.to_path_buf(), values })
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            fs::read_to_string(path).map_err(|source| CliError::ConfigRead { path: path.to_path_buf(), source })?;
        Self::parse(path, &text)
    }

    fn get<T>(&self, key: &str, parse: impl Fn(&str) -> Option<T>, expected: &str) -> Result<Option<T>, CliError> {
        let Some((line, raw)) = self.values.get(key) else {
            return Ok(None);
        };
        parse(raw).map(Some).ok_or_else(|| CliError::Config {
            path: self.path.clone(),
            line: *line,
            key: key.to_string(),
            message: format!("expected {expected}, found `{raw}`"),
        })
    }

    fn number(&self, key: &str) -> Result<Option<f64>, CliError> {
        self.get(key, |s| s.parse().ok(), "a number")
    }

    fn integer<T: std::str::FromStr>(&self, key: &str) -> Result<Option<T>, CliError> {
        self.get(key, |s| s.parse().ok(), "a non-negative integer")
    }

    fn flag(&self, key: &str) -> Result<Option<bool>, CliError> {
        self.get(key, |s| s.parse().ok(), "true or false")
    }

    fn text(&self, key: &str) -> Option<String> {
        self.values.get(key).map(|(_, v)| v.clone())
    }
}

/// A lattice axis: `lo:hi:count` (inclusive, even spacing) or a list.
pub fn parse_axis(spec: &str) -> Result<Vec<f64>, CliError> {
    let bad = || CliError::Invalid(format!("bad grid `{spec}`: use lo:hi:count or v1,v2,..."));
    let parts: Vec<&str> = spec.split(':').collect();
    if parts.len() == 3 {
        let lo: f64 = parts[0].trim().parse().map_err(|_| bad())?;
        let hi: f64 = parts[1].trim().parse().map_err(|_| bad())?;
        let count: usize = parts[2].trim().parse().map_err(|_| bad())?;
        if count == 0 || !lo.is_finite() || !hi.is_finite() || (count > 1 && !(lo < hi)) {
            return Err(bad());
        }
        if count == 1 {
            return Ok(vec![lo]);
        }
        return Ok((0..count).map(|k| lo + (hi - lo) * k as f64 / (count - 1) as f64).collect());
    }
    let values = spec
        .split(',')
        .map(|v| v.trim().parse::<f64>().ok().filter(|x| x.is_finite()))
        .collect::<Option<Vec<f64>>>()
        .ok_or_else(bad)?;
    if values.is_empty() {
        return Err(bad());
    }
    Ok(values)
}

#[derive(Debug, Clone, PartialEq)]
pub enum Task {
    Eigen { params: FractionalParams },
    Solve { problem: PQConfig, alpha: f64, beta: f64 },
    Curve { problem: PQConfig, theta_min: Option<f64>, theta_max: Option<f64>, steps: usize, warm_start: bool },
    Region { problem: PQConfig, alpha_grid: Vec<f64>, beta_grid: Vec<f64>, relative: bool },
    Proptest { p: f64, q: f64, cases: usize },
    LiCheck { problem: PQConfig, threshold: f64 },
}

impl Task {
    pub fn name(&self) -> &'static str {
        match self {
            Task::Eigen { .. } => "eigen",
            Task::Solve { .. } => "solve",
            Task::Curve { .. } => "curve",
            Task::Region { .. } => "region",
            Task::Proptest { .. } => "proptest",
            Task::LiCheck { .. } => "li-check",
        }
    }
}

/// Fully resolved and validated invocation.
#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub interval: Interval,
    pub n: usize,
    pub seed: u64,
    pub tol: Option<f64>,
    pub emit: Option<Emit>,
    pub out: Option<PathBuf>,
    pub task: Task,
}

pub const DEFAULT_N: usize = 32;
pub const DEFAULT_STEPS: usize = 33;
pub const DEFAULT_CASES: usize = 1000;

fn require<T>(value: Option<T>, name: &str) -> Result<T, CliError> {
    value.ok_or_else(|| CliError::Missing(name.to_string()))
}

impl RunConfig {
    pub fn from_command(command: Command) -> Result<Self, CliError> {
        let common = match &command {
            Command::Eigen { common, .. }
            | Command::Solve { common, .. }
            | Command::Curve { common, .. }
            | Command::Region { common, .. }
            | Command::Proptest { common, .. }
            | Command::LiCheck { common, .. } => common.clone(),
        };
        let file = match &common.config {
            Some(path) => FileValues::load(path)?,
            None => FileValues::default(),
        };
        let or = |flag: Option<f64>, key: &str| -> Result<Option<f64>, CliError> {
            match flag {
                Some(v) => Ok(Some(v)),
                None => file.number(key),
            }
        };

        let interval = match &common.interval {
            Some(ab) => Some((ab[0], ab[1])),
            None => file.get(
                "interval",
                |s| {
                    let v: Vec<f64> = s
                        .split(|c: char| c == ',' || c.is_whitespace())
                        .filter(|t| !t.is_empty())
                        .map(str::parse)
                        .collect::<Result<_, _>>()
                        .ok()?;
                    (v.len() == 2).then(|| (v[0], v[1]))
                },
                "two numbers `a b`",
            )?,
        };
        let interval = match interval {
            Some((a, b)) => Interval::new(a, b)?,
            None => Interval::unit(),
        };
        let n = match common.n {
            Some(n) => n,
            None => file.integer("n")?.unwrap_or(DEFAULT_N),
        };
        if n == 0 {
            return Err(CliError::Invalid("--n must be at least 1".into()));
        }
        let seed = match common.seed {
            Some(s) => s,
            None => file.integer("seed")?.unwrap_or(0),
        };
        let tol = or(common.tol, "tol")?;
        if let Some(t) = tol {
            if !(t > 0.0 && t.is_finite()) {
                return Err(CliError::Invalid(format!("--tol must be positive, got {t}")));
            }
        }
        let emit = match common.emit {
            Some(e) => Some(e),
            None => file.get(
                "emit",
                |s| match s {
                    "csv" => Some(Emit::Csv),
                    "json" => Some(Emit::Json),
                    _ => None,
                },
                "csv or json",
            )?,
        };
        let out = common.out.clone().or_else(|| file.text("out").map(PathBuf::from));
        // An output path without --emit picks the format from its extension.
        let emit = emit.or_else(|| {
            out.as_ref().map(|p| if p.extension().is_some_and(|e| e == "json") { Emit::Json } else { Emit::Csv })
        });

        let problem = |interval: Interval| -> Result<PQConfig, CliError> {
            let s1 = require(or(common.s1, "s1")?, "s1")?;
            let p = require(or(common.p, "p")?, "p")?;
            let s2 = require(or(common.s2, "s2")?, "s2")?;
            let q = require(or(common.q, "q")?, "q")?;
            Ok(PQConfig::new(interval, s1, p, s2, q)?)
        };

        let task = match command {
            Command::Eigen { s, r, .. } => {
                let s = require(or(s, "s")?, "s")?;
                let r = require(or(r, "r")?, "r")?;
                Task::Eigen { params: FractionalParams::new(s, r)? }
            }
            Command::Solve { alpha, beta, .. } => Task::Solve {
                problem: problem(interval)?,
                alpha: require(or(alpha, "alpha")?, "alpha")?,
                beta: require(or(beta, "beta")?, "beta")?,
            },
            Command::Curve { theta_min, theta_max, steps, no_warm_start, .. } => {
                let steps = match steps {
                    Some(s) => s,
                    None => file.integer("steps")?.unwrap_or(DEFAULT_STEPS),
                };
                let theta_min = or(theta_min, "theta_min")?;
                let theta_max = or(theta_max, "theta_max")?;
                if steps < 2 {
                    return Err(CliError::Invalid("--steps must be at least 2".into()));
                }
                if let (Some(lo), Some(hi)) = (theta_min, theta_max) {
                    if !(lo < hi) {
                        return Err(CliError::Invalid(format!("need --theta-min < --theta-max, got {lo} and {hi}")));
                    }
                }
                let warm_start = if no_warm_start { false } else { file.flag("warm_start")?.unwrap_or(true) };
                Task::Curve { problem: problem(interval)?, theta_min, theta_max, steps, warm_start }
            }
            Command::Region { alpha_grid, beta_grid, relative, .. } => {
                let alpha_grid = require(alpha_grid.or_else(|| file.text("alpha_grid")), "alpha-grid")?;
                let beta_grid = require(beta_grid.or_else(|| file.text("beta_grid")), "beta-grid")?;
                let relative = relative || file.flag("relative")?.unwrap_or(false);
                Task::Region {
                    problem: problem(interval)?,
                    alpha_grid: parse_axis(&alpha_grid)?,
                    beta_grid: parse_axis(&beta_grid)?,
                    relative,
                }
            }
            Command::Proptest { cases, .. } => {
                let cases = match cases {
                    Some(c) => c,
                    None => file.integer("cases")?.unwrap_or(DEFAULT_CASES),
                };
                let p = or(common.p, "p")?.unwrap_or(3.0);
                let q = or(common.q, "q")?.unwrap_or(2.0);
                if !(1.0 < q && q <= p && p.is_finite()) {
                    return Err(CliError::Invalid(format!("need 1 < q <= p, got p = {p}, q = {q}")));
                }
                Task::Proptest { p, q, cases }
            }
            Command::LiCheck { li_threshold, .. } => {
                let threshold = or(li_threshold, "li_threshold")?.unwrap_or(fracpq_core::eigen::LI_THRESHOLD);
                if !(threshold > 0.0) {
                    return Err(CliError::Invalid(format!("--li-threshold must be positive, got {threshold}")));
                }
                Task::LiCheck { problem: problem(interval)?, threshold }
            }
        };
        Ok(Self { interval, n, seed, tol, emit, out, task })
    }
}
