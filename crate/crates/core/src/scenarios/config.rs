//! Flat `key = value` experiment configuration.
//!
//! ```text
//! # comment
//! operation = minimize
//! scenario = heisenberg(1)
//! resolution = 33
//! seed = 7
//! out = runs/min
//! ```

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use crate::error::{Error, Result};
use crate::horizontal::DEFAULT_TAU;
use crate::integrability::DEFAULT_ETA;
use crate::reconstruction::Integrator;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Operation {
    Evaluate,
    Minimize,
    CheckIntegrability,
    Reconstruct,
    RankAnalysis,
    AuditUniqueness,
    Scenario,
    VariationProfile,
}

impl Operation {
    pub const ALL: [Operation; 8] = [
        Operation::Evaluate,
        Operation::Minimize,
        Operation::CheckIntegrability,
        Operation::Reconstruct,
        Operation::RankAnalysis,
        Operation::AuditUniqueness,
        Operation::Scenario,
        Operation::VariationProfile,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Operation::Evaluate => "evaluate",
            Operation::Minimize => "minimize",
            Operation::CheckIntegrability => "check-integrability",
            Operation::Reconstruct => "reconstruct",
            Operation::RankAnalysis => "rank-analysis",
            Operation::AuditUniqueness => "audit-uniqueness",
            Operation::Scenario => "scenario",
            Operation::VariationProfile => "variation-profile",
        }
    }
}

impl fmt::Display for Operation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Operation {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let norm = s.trim().replace('_', "-");
        Operation::ALL
            .into_iter()
            .find(|op| op.as_str() == norm)
            .ok_or_else(|| Error::Config(format!("unknown operation `{s}`")))
    }
}

/// Where a field comes from when it is not taken from the scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum FieldSource {
    File(PathBuf),
    Zero,
    Heisenberg,
}

impl FieldSource {
    fn parse(value: &str) -> Self {
        match value {
            "zero" => FieldSource::Zero,
            "heisenberg" => FieldSource::Heisenberg,
            path => FieldSource::File(PathBuf::from(path)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ExperimentConfig {
    pub operation: Operation,
    pub scenario: Option<String>,
    pub out: PathBuf,
    pub seed: u64,
    pub resolution: Option<Vec<usize>>,
    /// Operation tolerance; `None` uses the operation default.
    pub tol: Option<f64>,
    pub tau: f64,
    pub eta: f64,
    pub u: Option<PathBuf>,
    pub v: Option<PathBuf>,
    pub f: Option<FieldSource>,
    pub h: Option<FieldSource>,
    pub nu: Option<PathBuf>,
    pub d: Option<PathBuf>,
    pub matrix: Option<PathBuf>,
    /// Dirichlet data for `minimize`; defaults to `u`.
    pub boundary: Option<PathBuf>,
    /// Starting iterate for `minimize`; defaults to a seeded perturbation
    /// of the boundary data.
    pub init: Option<PathBuf>,
    pub base: Option<usize>,
    pub integrator: Integrator,
    pub eps: Vec<f64>,
    pub schedule: Option<Vec<f64>>,
    pub max_iterations: Option<usize>,
    /// Frequency band of the random initial perturbation.
    pub band: usize,
    /// Amplitude of the random initial perturbation.
    pub amplitude: f64,
}

impl ExperimentConfig {
    pub fn new(operation: Operation) -> Self {
        Self {
            operation,
            scenario: None,
            out: PathBuf::from("out"),
            seed: 0,
            resolution: None,
            tol: None,
            tau: DEFAULT_TAU,
            eta: DEFAULT_ETA,
            u: None,
            v: None,
            f: None,
            h: None,
            nu: None,
            d: None,
            matrix: None,
            boundary: None,
            init: None,
            base: None,
            integrator: Integrator::Staircase,
            eps: (0..=20).map(|i| i as f64 / 20.0).collect(),
            schedule: None,
            max_iterations: None,
            band: 3,
            amplitude: 0.5,
        }
    }

    /// Parses a config file body. `operation` must be present unless
    /// `fallback` supplies it.
    pub fn parse(text: &str, fallback: Option<Operation>) -> Result<Self> {
        let mut pairs = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (k, v) = line.split_once('=').ok_or_else(|| {
                Error::Config(format!("line {}: expected key = value", lineno + 1))
            })?;
            pairs.push((k.trim().to_string(), v.trim().to_string()));
        }
        let op = match pairs.iter().find(|(k, _)| k == "operation") {
            Some((_, v)) => v.parse()?,
            None => fallback.ok_or_else(|| Error::Config("no operation given".into()))?,
        };
        let mut cfg = Self::new(op);
        for (k, v) in pairs {
            cfg.set(&k, &v)?;
        }
        Ok(cfg)
    }

    pub fn load(path: &Path, fallback: Option<Operation>) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text, fallback)
    }

    /// Applies one `key = value` setting.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let bad = |what: &str| Error::Config(format!("{key}: invalid {what} `{value}`"));
        let real = || value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad("number"));
        let list = || -> Result<Vec<f64>> {
            value
                .split(',')
                .map(|s| s.trim().parse::<f64>().map_err(|_| bad("number list")))
                .collect()
        };
        match key {
            "operation" => self.operation = value.parse()?,
            "scenario" => self.scenario = Some(value.to_string()),
            "out" => self.out = PathBuf::from(value),
            "seed" => self.seed = value.parse().map_err(|_| bad("seed"))?,
            "resolution" => self.resolution = Some(parse_resolution(value)?),
            "tol" => self.tol = Some(positive(real()?, key)?),
            "tau" => self.tau = positive(real()?, key)?,
            "eta" => self.eta = positive(real()?, key)?,
            "u" => self.u = Some(PathBuf::from(value)),
            "v" => self.v = Some(PathBuf::from(value)),
            "f" => self.f = Some(FieldSource::parse(value)),
            "h" => self.h = Some(FieldSource::parse(value)),
            "nu" => self.nu = Some(PathBuf::from(value)),
            "d" => self.d = Some(PathBuf::from(value)),
            "matrix" => self.matrix = Some(PathBuf::from(value)),
            "boundary" => self.boundary = Some(PathBuf::from(value)),
            "init" => self.init = Some(PathBuf::from(value)),
            "base" => self.base = Some(value.parse().map_err(|_| bad("node index"))?),
            "integrator" => {
                self.integrator = match value {
                    "staircase" => Integrator::Staircase,
                    "least-squares" | "least_squares" => Integrator::LeastSquares,
                    _ => return Err(bad("integrator")),
                }
            }
            "eps" => self.eps = parse_eps(value).ok_or_else(|| bad("epsilon grid"))?,
            "schedule" => self.schedule = Some(list()?),
            "max_iterations" => {
                self.max_iterations = Some(value.parse().map_err(|_| bad("count"))?)
            }
            "band" => self.band = value.parse().map_err(|_| bad("band"))?,
            "amplitude" => self.amplitude = real()?,
            _ => return Err(Error::Config(format!("unknown key `{key}`"))),
        }
        Ok(())
    }
}

fn positive(v: f64, key: &str) -> Result<f64> {
    if v > 0.0 {
        Ok(v)
    } else {
        Err(Error::Config(format!("{key} must be positive, got {v}")))
    }
}

/// `33` or `33,65`.
pub fn parse_resolution(value: &str) -> Result<Vec<usize>> {
    let r: Option<Vec<usize>> = value.split(',').map(|s| s.trim().parse().ok()).collect();
    match r {
        Some(r) if !r.is_empty() => Ok(r),
        _ => Err(Error::Config(format!("invalid resolution `{value}`"))),
    }
}

/// Either a comma list or `start:stop:count`.
fn parse_eps(value: &str) -> Option<Vec<f64>> {
    let parts: Vec<&str> = value.split(':').collect();
    if parts.len() == 3 {
        let a: f64 = parts[0].trim().parse().ok()?;
        let b: f64 = parts[1].trim().parse().ok()?;
        let n: usize = parts[2].trim().parse().ok()?;
        if n < 2 || !(b > a) {
            return None;
        }
        return Some(
            (0..n)
                .map(|i| a + (b - a) * i as f64 / (n - 1) as f64)
                .collect(),
        );
    }
    value.split(',').map(|s| s.trim().parse().ok()).collect()
}
