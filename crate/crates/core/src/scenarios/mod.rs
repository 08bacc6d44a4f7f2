//! Built-in scenarios, seeded random fields, experiment configuration and
//! the runner behind the command-line tool.

mod assertions;
pub mod config;
mod random;
pub mod runner;

use std::sync::Arc;

pub use assertions::{Assertion, Outcome};
pub use config::{ExperimentConfig, Operation};
pub use random::{random_smooth_field, random_smooth_scalar};
pub use runner::{run, RunReport};

use crate::error::{Error, Result};
use crate::grid::{GridDomain, ScalarField, VectorField};
use crate::variational::BCoefficients;

/// A fully sampled test case with its expected outcomes.
#[derive(Debug, Clone)]
pub struct Scenario {
    pub name: String,
    pub description: &'static str,
    pub domain: Arc<GridDomain>,
    pub f: VectorField,
    pub h: ScalarField,
    pub u: Option<ScalarField>,
    pub v: Option<ScalarField>,
    pub nu: Option<VectorField>,
    pub d: Option<ScalarField>,
    pub b: BCoefficients,
    pub assertions: Vec<Assertion>,
}

impl Scenario {
    pub fn check(&self) -> Vec<Outcome> {
        self.assertions.iter().map(|a| a.check(self)).collect()
    }

    pub(crate) fn require_u(&self) -> Result<&ScalarField> {
        self.u
            .as_ref()
            .ok_or_else(|| Error::Config(format!("scenario `{}` has no potential u", self.name)))
    }

    pub(crate) fn require_v(&self) -> Result<&ScalarField> {
        self.v
            .as_ref()
            .ok_or_else(|| Error::Config(format!("scenario `{}` has no second potential v", self.name)))
    }

    pub(crate) fn require_normal_pair(&self) -> Result<(&VectorField, &ScalarField)> {
        match (&self.nu, &self.d) {
            (Some(nu), Some(d)) => Ok((nu, d)),
            _ => Err(Error::Config(format!(
                "scenario `{}` has no prescribed normal and weight",
                self.name
            ))),
        }
    }
}

/// Names accepted by [`builtin_scenario`]; `heisenberg(n)` takes `n` in 1..=3.
pub const SCENARIO_NAMES: [&str; 7] = [
    "twin_normals",
    "flat_normal",
    "constant_normal",
    "round_trip",
    "heisenberg(1)",
    "heisenberg(2)",
    "heisenberg(3)",
];

/// `(-y¹, x¹, -y², x², ...)` on coordinates `(x¹, y¹, x², y², ...)`.
pub fn heisenberg_field(domain: Arc<GridDomain>) -> Result<VectorField> {
    if domain.dim() % 2 != 0 {
        return Err(Error::InvalidArgument(format!(
            "Heisenberg field needs even dimension, got {}",
            domain.dim()
        )));
    }
    VectorField::sample(domain, |x, o| {
        for j in 0..x.len() / 2 {
            o[2 * j] = -x[2 * j + 1];
            o[2 * j + 1] = x[2 * j];
        }
    })
}

/// `Π 4 t_a (1 - t_a)` on coordinates rescaled to `[0, 1]`; one at the
/// center, zero on the faces.
pub fn bump(domain: Arc<GridDomain>) -> Result<ScalarField> {
    let (lo, hi) = (domain.lower().to_vec(), domain.upper().to_vec());
    ScalarField::sample(domain, |x| {
        x.iter()
            .enumerate()
            .map(|(a, xa)| {
                let t = (xa - lo[a]) / (hi[a] - lo[a]);
                4.0 * t * (1.0 - t)
            })
            .product()
    })
}

/// Starting iterate for `minimize`: the boundary data plus a seeded smooth
/// perturbation that vanishes on the faces, scaled by
/// `amplitude · field_scale(boundary)`.
pub fn perturbed_init(boundary: &ScalarField, seed: u64, band: usize, amplitude: f64) -> Result<ScalarField> {
    let domain = boundary.domain_arc().clone();
    let noise = random_smooth_scalar(domain.clone(), seed, band)?;
    let pert = noise.mul(&bump(domain)?)?.scaled(amplitude * boundary.scale());
    boundary.add(&pert)
}

fn counts_for(m: usize, default: usize, resolution: Option<&[usize]>) -> Result<Vec<usize>> {
    match resolution {
        None => Ok(vec![default; m]),
        Some([n]) => Ok(vec![*n; m]),
        Some(r) if r.len() == m => Ok(r.to_vec()),
        Some(r) => Err(Error::Config(format!(
            "resolution has {} entries, scenario dimension is {m}",
            r.len()
        ))),
    }
}

fn parse_heisenberg(name: &str) -> Option<usize> {
    let inner = name.strip_prefix("heisenberg(")?.strip_suffix(')')?;
    inner.trim().parse().ok()
}

pub fn builtin_scenario(name: &str) -> Result<Scenario> {
    builtin_scenario_with(name, None)
}

/// Builds a scenario at a custom resolution (one count for every axis or
/// one per axis).
pub fn builtin_scenario_with(name: &str, resolution: Option<&[usize]>) -> Result<Scenario> {
    if let Some(n) = parse_heisenberg(name) {
        return heisenberg(n, resolution);
    }
    match name {
        "twin_normals" => twin_normals(resolution),
        "flat_normal" => flat_normal(resolution),
        "constant_normal" => constant_normal(resolution),
        "round_trip" => round_trip(resolution),
        _ => Err(Error::UnknownScenario(name.to_string())),
    }
}

/// `u = xy` and `v = xy + y` share the horizontal normal `(0, 1)` for the
/// planar Heisenberg field although `∇u - ∇v` never vanishes.
fn twin_normals(resolution: Option<&[usize]>) -> Result<Scenario> {
    let counts = counts_for(2, 65, resolution)?;
    let domain = Arc::new(GridDomain::new(&[0.1, 0.0], &[1.0, 1.0], &counts)?);
    let f = heisenberg_field(domain.clone())?;
    Ok(Scenario {
        name: "twin_normals".into(),
        description: "u = xy and v = xy + y on [0.1,1]x[0,1] with F = (-y, x): equal normals, distinct gradients",
        h: ScalarField::zeros(domain.clone()),
        u: Some(ScalarField::sample(domain.clone(), |x| x[0] * x[1])?),
        v: Some(ScalarField::sample(domain.clone(), |x| x[0] * x[1] + x[1])?),
        nu: None,
        d: None,
        b: BCoefficients::heisenberg(1),
        f,
        assertions: vec![
            Assertion::NormalsAgree { tol: 1e-12 },
            Assertion::GradientGap {
                value: 1.0,
                tol: 1e-12,
            },
            Assertion::RankNowhere,
            Assertion::NonintegrableNowhere,
        ],
        domain,
    })
}

/// `ν = e_1`, `D = -2y¹` with the Heisenberg field in `R⁴`: satisfies the
/// closure condition, but `U = Dν - F` is not closed.
fn flat_normal(resolution: Option<&[usize]>) -> Result<Scenario> {
    let counts = counts_for(4, 9, resolution)?;
    let domain = Arc::new(GridDomain::new(
        &[0.0, -1.25, 0.0, 0.0],
        &[1.0, -0.25, 1.0, 1.0],
        &counts,
    )?);
    let f = heisenberg_field(domain.clone())?;
    Ok(Scenario {
        name: "flat_normal".into(),
        description: "nu = e1, D = -2 y1 in R^4 with the Heisenberg field: closure condition holds, U is not closed",
        h: ScalarField::zeros(domain.clone()),
        u: None,
        v: None,
        nu: Some(VectorField::constant(domain.clone(), &[1.0, 0.0, 0.0, 0.0])?),
        d: Some(ScalarField::sample(domain.clone(), |x| -2.0 * x[1])?),
        b: BCoefficients::heisenberg(2),
        f,
        assertions: vec![
            Assertion::ClosureResidual { tol: 1e-12 },
            Assertion::ClosedEntry {
                i: 2,
                j: 3,
                value: -2.0,
                tol: 1e-12,
            },
            Assertion::RefusesReconstruction,
        ],
        domain,
    })
}

/// `F = 0`, constant `ν`, `D = ν_⊥·x`: the structure identity holds but the
/// closure residual is `-ν_⊥`.
fn constant_normal(resolution: Option<&[usize]>) -> Result<Scenario> {
    let counts = counts_for(2, 65, resolution)?;
    let domain = Arc::new(GridDomain::new(&[0.1, 0.1], &[1.0, 1.0], &counts)?);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    Ok(Scenario {
        name: "constant_normal".into(),
        description: "F = 0, nu = (1,-1)/sqrt2, D = (x+y)/sqrt2: structure identity holds, closure fails with norm 1",
        f: VectorField::zeros(domain.clone()),
        h: ScalarField::zeros(domain.clone()),
        u: None,
        v: None,
        nu: Some(VectorField::constant(domain.clone(), &[s, -s])?),
        d: Some(ScalarField::sample(domain.clone(), |x| s * (x[0] + x[1]))?),
        b: BCoefficients::heisenberg(1),
        assertions: vec![
            Assertion::StructureResidual { tol: 1e-12 },
            Assertion::ClosureNorm {
                value: 1.0,
                tol: 1e-10,
            },
            Assertion::RefusesReconstruction,
        ],
        domain,
    })
}

/// Normal and weight of `u* = sin x + xy` for the planar Heisenberg field,
/// reconstructed back to `u*`.
fn round_trip(resolution: Option<&[usize]>) -> Result<Scenario> {
    let counts = counts_for(2, 65, resolution)?;
    let domain = Arc::new(GridDomain::new(&[0.2, 0.2], &[1.2, 1.2], &counts)?);
    let f = heisenberg_field(domain.clone())?;
    let u = ScalarField::sample(domain.clone(), |x| x[0].sin() + x[0] * x[1])?;
    let (nu, _) = crate::horizontal::horizontal_normal(&u, &f, crate::horizontal::DEFAULT_TAU)?;
    let d = crate::horizontal::weight(&u, &f)?;
    Ok(Scenario {
        name: "round_trip".into(),
        description: "normal and weight of u* = sin x + xy with F = (-y, x) on [0.2,1.2]^2, integrated back to u*",
        h: ScalarField::zeros(domain.clone()),
        u: Some(u),
        v: None,
        nu: Some(nu),
        d: Some(d),
        b: BCoefficients::heisenberg(1),
        f,
        assertions: vec![
            Assertion::RoundTrip { tol: 1e-3 },
            Assertion::NormalRecovered { tol: 1e-3 },
        ],
        domain,
    })
}

/// Heisenberg field on `[0.25, 1.25] × [0, 1]` in every plane, with the
/// potential `u = Σ x^j y^j` as boundary data.
fn heisenberg(n: usize, resolution: Option<&[usize]>) -> Result<Scenario> {
    if !(1..=3).contains(&n) {
        return Err(Error::UnknownScenario(format!("heisenberg({n})")));
    }
    let m = 2 * n;
    let default = [65, 17, 5][n - 1];
    let counts = counts_for(m, default, resolution)?;
    let lower: Vec<f64> = (0..m).map(|a| if a % 2 == 0 { 0.25 } else { 0.0 }).collect();
    let upper: Vec<f64> = (0..m).map(|a| if a % 2 == 0 { 1.25 } else { 1.0 }).collect();
    let domain = Arc::new(GridDomain::new(&lower, &upper, &counts)?);
    let f = heisenberg_field(domain.clone())?;
    let u = ScalarField::sample(domain.clone(), |x| {
        (0..n).map(|j| x[2 * j] * x[2 * j + 1]).sum()
    })?;
    let mut assertions = vec![
        Assertion::CurlBlocks { value: 2.0 },
        Assertion::DivB { value: 2.0 * n as f64 },
        Assertion::RankEverywhere { rank: m },
    ];
    if n > 1 {
        assertions.push(Assertion::NonintegrableEverywhere);
    }
    Ok(Scenario {
        name: format!("heisenberg({n})"),
        description: "Heisenberg field F = (-y1, x1, ..., -yn, xn) with potential sum x_j y_j",
        h: ScalarField::zeros(domain.clone()),
        u: Some(u),
        v: None,
        nu: None,
        d: None,
        b: BCoefficients::heisenberg(n),
        f,
        assertions,
        domain,
    })
}
