use crate::error::{Error, Result};
use crate::grid::field_scale;
use crate::horizontal::{curl_matrix, pairs, DEFAULT_TAU};
use crate::integrability::{closure_condition_residual, structure_condition_residual, DEFAULT_ETA};
use crate::reconstruction::{integrate_potential, u_candidate_field, verify_normal, DEFAULT_CLOSED_TOL};
use crate::skew::{skew_rank, DEFAULT_RANK_TOL};
use crate::variational::{div_b, uniqueness_audit, UniquenessReport};

use super::Scenario;

/// Machine-checkable expectation attached to a scenario.
#[derive(Debug, Clone, PartialEq)]
pub enum Assertion {
    /// `max |ν^u - ν^v|` off the joint singular set.
    NormalsAgree { tol: f64 },
    /// `max |∇u - ∇v| = value`.
    GradientGap { value: f64, tol: f64 },
    /// No node has curl rank at least three.
    RankNowhere,
    /// No node has a nonintegrable contact form.
    NonintegrableNowhere,
    /// Every regular node has a nonintegrable contact form of `u`.
    NonintegrableEverywhere,
    /// Closure residual of `(ν, D, F)` below `tol` everywhere.
    ClosureResidual { tol: f64 },
    /// Pointwise norm of the closure residual equals `value`.
    ClosureNorm { value: f64, tol: f64 },
    /// Structure residual of `(ν, D, F)` below `tol` everywhere.
    StructureResidual { tol: f64 },
    /// Entry `(i, j)` (zero-based) of the curl of `U = Dν - F` is `value`
    /// at every node.
    ClosedEntry { i: usize, j: usize, value: f64, tol: f64 },
    /// Reconstruction from `(ν, D, F)` fails with a closedness error.
    RefusesReconstruction,
    /// Reconstructed potential matches `u - u(base)`.
    RoundTrip { tol: f64 },
    /// Reconstructed potential reproduces `ν` and `D`.
    NormalRecovered { tol: f64 },
    /// Curl of `F` is `value` on each coordinate plane `(2j, 2j+1)` and
    /// exactly zero elsewhere.
    CurlBlocks { value: f64 },
    /// `div F^b ≡ value` exactly.
    DivB { value: f64 },
    /// Numerical skew rank of the curl at every node.
    RankEverywhere { rank: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub label: String,
    pub expected: String,
    pub measured: f64,
    pub passed: bool,
}

fn outcome(label: &str, expected: String, measured: f64, passed: bool) -> Outcome {
    Outcome {
        label: label.to_string(),
        expected,
        measured,
        passed,
    }
}

fn audit(sc: &Scenario) -> Result<UniquenessReport> {
    let u = sc.require_u()?;
    let v = sc.require_v()?;
    uniqueness_audit(u, v, &sc.f, &sc.h, &sc.b, DEFAULT_TAU, DEFAULT_ETA)
}

impl Assertion {
    pub fn label(&self) -> &'static str {
        match self {
            Assertion::NormalsAgree { .. } => "normals_agree",
            Assertion::GradientGap { .. } => "gradient_gap",
            Assertion::RankNowhere => "rank_below_three",
            Assertion::NonintegrableNowhere => "integrable_everywhere",
            Assertion::NonintegrableEverywhere => "nonintegrable_everywhere",
            Assertion::ClosureResidual { .. } => "closure_residual",
            Assertion::ClosureNorm { .. } => "closure_norm",
            Assertion::StructureResidual { .. } => "structure_residual",
            Assertion::ClosedEntry { .. } => "closedness_entry",
            Assertion::RefusesReconstruction => "refuses_reconstruction",
            Assertion::RoundTrip { .. } => "round_trip",
            Assertion::NormalRecovered { .. } => "normal_recovered",
            Assertion::CurlBlocks { .. } => "curl_blocks",
            Assertion::DivB { .. } => "div_b",
            Assertion::RankEverywhere { .. } => "curl_rank",
        }
    }

    /// Evaluates the assertion; evaluation errors count as failures.
    pub fn check(&self, sc: &Scenario) -> Outcome {
        match self.measure(sc) {
            Ok(o) => o,
            Err(e) => outcome(self.label(), format!("error: {e}"), f64::NAN, false),
        }
    }

    fn measure(&self, sc: &Scenario) -> Result<Outcome> {
        let label = self.label();
        Ok(match *self {
            Assertion::NormalsAgree { tol } => {
                let r = audit(sc)?;
                outcome(label, format!("<= {tol:e}"), r.normal_max, r.normal_max <= tol)
            }
            Assertion::GradientGap { value, tol } => {
                let r = audit(sc)?;
                let ok = (r.gradient_gap - value).abs() <= tol;
                outcome(label, format!("{value} +- {tol:e}"), r.gradient_gap, ok)
            }
            Assertion::RankNowhere => {
                let r = audit(sc)?;
                let n = r.rank_flags.iter().filter(|f| **f).count();
                outcome(label, "0 flagged nodes".into(), n as f64, n == 0)
            }
            Assertion::NonintegrableNowhere => {
                let r = audit(sc)?;
                let n = r.nonintegrable_flags.iter().filter(|f| **f).count();
                outcome(label, "0 flagged nodes".into(), n as f64, n == 0)
            }
            Assertion::NonintegrableEverywhere => {
                let u = sc.require_u()?;
                let map = crate::integrability::classify_integrability(u, &sc.f, DEFAULT_TAU, DEFAULT_ETA)?;
                let bad = map.count(crate::integrability::NodeClass::Integrable);
                outcome(label, "0 integrable nodes".into(), bad as f64, bad == 0)
            }
            Assertion::ClosureResidual { tol } => {
                let (nu, d) = sc.require_normal_pair()?;
                let r = closure_condition_residual(nu, d, &sc.f)?.norm().max_abs();
                outcome(label, format!("<= {tol:e}"), r, r <= tol)
            }
            Assertion::ClosureNorm { value, tol } => {
                let (nu, d) = sc.require_normal_pair()?;
                let norms = closure_condition_residual(nu, d, &sc.f)?.norm();
                let dev = norms
                    .values()
                    .iter()
                    .fold(0.0_f64, |a, v| a.max((v - value).abs()));
                outcome(label, format!("{value} +- {tol:e} (max deviation)"), dev, dev <= tol)
            }
            Assertion::StructureResidual { tol } => {
                let (nu, d) = sc.require_normal_pair()?;
                let r = structure_condition_residual(nu, d, &sc.f)?.max_abs();
                outcome(label, format!("<= {tol:e}"), r, r <= tol)
            }
            Assertion::ClosedEntry { i, j, value, tol } => {
                let (nu, d) = sc.require_normal_pair()?;
                let curl = curl_matrix(&u_candidate_field(nu, d, &sc.f)?);
                let dev = curl
                    .entry(i, j)
                    .iter()
                    .fold(0.0_f64, |a, v| a.max((v - value).abs()));
                outcome(
                    label,
                    format!("U_{}{} = {value} +- {tol:e} (max deviation)", i + 1, j + 1),
                    dev,
                    dev <= tol,
                )
            }
            Assertion::RefusesReconstruction => {
                let (nu, d) = sc.require_normal_pair()?;
                let u = u_candidate_field(nu, d, &sc.f)?;
                match integrate_potential(&u, sc.domain.lowest_corner(), DEFAULT_CLOSED_TOL) {
                    Err(Error::NotClosed { max, .. }) => {
                        outcome(label, "closedness error".into(), max, true)
                    }
                    Err(e) => return Err(e),
                    Ok(p) => outcome(label, "closedness error".into(), p.closedness, false),
                }
            }
            Assertion::RoundTrip { tol } => {
                let (err, _) = round_trip_errors(sc)?;
                outcome(label, format!("<= {tol:e}"), err, err <= tol)
            }
            Assertion::NormalRecovered { tol } => {
                let (_, nerr) = round_trip_errors(sc)?;
                outcome(label, format!("<= {tol:e}"), nerr, nerr <= tol)
            }
            Assertion::CurlBlocks { value } => {
                let curl = curl_matrix(&sc.f);
                let m = sc.domain.dim();
                let mut dev: f64 = 0.0;
                for (i, j) in pairs(m) {
                    let expect = if i % 2 == 0 && j == i + 1 { value } else { 0.0 };
                    for v in curl.entry(i, j) {
                        dev = dev.max((v - expect).abs());
                    }
                }
                outcome(label, format!("h = {value} on planes, exact"), dev, dev == 0.0)
            }
            Assertion::DivB { value } => {
                let db = div_b(&sc.f, &sc.b)?;
                let dev = db.values().iter().fold(0.0_f64, |a, v| a.max((v - value).abs()));
                outcome(label, format!("{value}, exact"), dev, dev == 0.0)
            }
            Assertion::RankEverywhere { rank } => {
                let curl = curl_matrix(&sc.f);
                let bad = (0..sc.domain.len())
                    .filter(|&k| skew_rank(&curl.matrix_at(k), DEFAULT_RANK_TOL) != rank)
                    .count();
                outcome(label, format!("rank {rank} at every node"), bad as f64, bad == 0)
            }
        })
    }
}

/// Max potential error and max of the normal and weight errors.
pub(crate) fn round_trip_errors(sc: &Scenario) -> Result<(f64, f64)> {
    let (nu, d) = sc.require_normal_pair()?;
    let truth = sc.require_u()?;
    let base = sc.domain.lowest_corner();
    let p = crate::reconstruction::reconstruct(
        nu,
        d,
        &sc.f,
        base,
        DEFAULT_CLOSED_TOL,
        crate::reconstruction::Integrator::Staircase,
    )?;
    let expect = truth.shifted(-truth.get(base));
    let err = p.field.sub(&expect)?.max_abs() / field_scale(expect.values());
    let chk = verify_normal(&p.field, nu, d, &sc.f, DEFAULT_TAU)?;
    Ok((err, chk.normal_error.max(chk.weight_error)))
}
