//! Recovering a potential `u` with `ν = (∇u + F)/D` from `(ν, D, F)`.
//!
//! The candidate one-form is `U = Dν - F`; when it is closed (`∂_I U_J =
//! ∂_J U_I`) it is the gradient of the wanted potential, which is then
//! recovered by line integration.

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::calculus::{partial_adjoint_values, partial_values, quadrature_weights};
use crate::grid::{ensure_same_domain, field_scale, GridDomain, ScalarField, VectorField};
use crate::horizontal::{curl_matrix, pairs, SkewField};

/// Default relative closedness tolerance.
pub const DEFAULT_CLOSED_TOL: f64 = 1e-3;

/// `U_I = D ν_I - F_I`.
pub fn u_candidate_field(nu: &VectorField, d: &ScalarField, f: &VectorField) -> Result<VectorField> {
    ensure_same_domain(nu.domain(), d.domain())?;
    ensure_same_domain(nu.domain(), f.domain())?;
    nu.scale_by(d)?.sub(f)
}

/// `U_IJ = ∂_I U_J - ∂_J U_I`.
pub fn closedness_residual(u: &VectorField) -> SkewField {
    curl_matrix(u)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum Integrator {
    /// Trapezoid rule along the axis-ordered staircase from the base node.
    #[default]
    Staircase,
    /// Least-squares fit of `∇u ≈ U` in the trapezoid-weighted norm.
    LeastSquares,
}

#[derive(Debug, Clone)]
pub struct Potential {
    pub field: ScalarField,
    pub base: usize,
    /// Max `|U_IJ|` from [`closedness_residual`].
    pub closedness: f64,
    /// Max difference between the forward and reversed axis-order
    /// staircase integrals.
    pub path_discrepancy: f64,
    /// Max over grid plaquettes of the trapezoid circulation of `U` divided
    /// by the plaquette area. Bounds the path discrepancy by discrete Stokes.
    pub plaquette_circulation: f64,
    /// Conjugate-gradient iterations, least-squares mode only.
    pub iterations: usize,
}

fn check_base(domain: &GridDomain, base: usize) -> Result<()> {
    if base < domain.len() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!(
            "base node {base} outside grid of {} nodes",
            domain.len()
        )))
    }
}

fn require_closed(u: &VectorField, tol: f64) -> Result<f64> {
    let curl = closedness_residual(u);
    let scale = u.scale();
    let m = u.dim();
    let mut worst = (0.0, 0, 0, 0);
    for (i, j) in pairs(m) {
        for (k, v) in curl.entry(i, j).iter().enumerate() {
            if v.abs() > worst.0 {
                worst = (v.abs(), k, i, j);
            }
        }
    }
    if worst.0 > tol * scale {
        return Err(Error::NotClosed {
            max: worst.0,
            node: worst.1,
            i: worst.2 + 1,
            j: worst.3 + 1,
            tol: tol * scale,
        });
    }
    Ok(worst.0)
}

/// Trapezoid line integral of `U` along the staircase visiting axes in
/// `order`, starting from `u(base) = 0`.
pub fn staircase(u: &VectorField, base: usize, order: &[usize]) -> Vec<f64> {
    let domain = u.domain();
    let n = domain.len();
    let base_idx = domain.multi_index(base);
    let mut vals = vec![0.0; n];
    for (t, &a) in order.iter().enumerate() {
        let later = &order[t + 1..];
        let s = domain.stride(a);
        let len = domain.counts()[a];
        let half_h = 0.5 * domain.spacing()[a];
        let ua = u.component(a).values();
        // lines along axis a through nodes already reached
        let starts: Vec<usize> = (0..n)
            .filter(|&k| {
                domain.axis_index(k, a) == base_idx[a]
                    && later.iter().all(|&b| domain.axis_index(k, b) == base_idx[b])
            })
            .collect();
        for k0 in starts {
            let i0 = base_idx[a];
            for i in i0 + 1..len {
                let k = k0 + (i - i0) * s;
                vals[k] = vals[k - s] + half_h * (ua[k - s] + ua[k]);
            }
            for i in (0..i0).rev() {
                let k = k0 - (i0 - i) * s;
                vals[k] = vals[k + s] - half_h * (ua[k + s] + ua[k]);
            }
        }
    }
    vals
}

/// Max over all grid plaquettes of `|∮ U| / area`, edges by trapezoid.
pub fn plaquette_circulation(u: &VectorField) -> f64 {
    let domain = u.domain();
    let m = domain.dim();
    let mut worst: f64 = 0.0;
    for (a, b) in pairs(m) {
        let (sa, sb) = (domain.stride(a), domain.stride(b));
        let (ha, hb) = (domain.spacing()[a], domain.spacing()[b]);
        let (ua, ub) = (u.component(a).values(), u.component(b).values());
        let local = exec::max_nodes(domain.len(), |k| {
            if domain.axis_index(k, a) + 1 >= domain.counts()[a]
                || domain.axis_index(k, b) + 1 >= domain.counts()[b]
            {
                return 0.0;
            }
            let (k10, k01, k11) = (k + sa, k + sb, k + sa + sb);
            let circ = 0.5 * ha * (ua[k] + ua[k10]) + 0.5 * hb * (ub[k10] + ub[k11])
                - 0.5 * ha * (ua[k01] + ua[k11])
                - 0.5 * hb * (ub[k] + ub[k01]);
            (circ / (ha * hb)).abs()
        });
        worst = worst.max(local);
    }
    worst
}

/// Integrates a closed `U` to a potential with `u(base) = 0`.
///
/// Fails with [`Error::NotClosed`] when `max |U_IJ| > tol · field_scale(U)`.
pub fn integrate_potential(u: &VectorField, base: usize, tol: f64) -> Result<Potential> {
    integrate_potential_with(u, base, tol, Integrator::Staircase)
}

pub fn integrate_potential_with(
    u: &VectorField,
    base: usize,
    tol: f64,
    integrator: Integrator,
) -> Result<Potential> {
    let domain = u.domain_arc().clone();
    check_base(&domain, base)?;
    let m = domain.dim();
    let forward: Vec<usize> = (0..m).collect();
    let reverse: Vec<usize> = (0..m).rev().collect();
    match integrator {
        Integrator::Staircase => {
            let closedness = require_closed(u, tol)?;
            let fwd = staircase(u, base, &forward);
            let rev = staircase(u, base, &reverse);
            let path_discrepancy = fwd
                .iter()
                .zip(&rev)
                .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
            Ok(Potential {
                field: ScalarField::from_raw(domain, fwd),
                base,
                closedness,
                path_discrepancy,
                plaquette_circulation: plaquette_circulation(u),
                iterations: 0,
            })
        }
        Integrator::LeastSquares => {
            let closedness = closedness_residual(u).max_abs();
            let (vals, iterations) = least_squares(u, base, &forward);
            let rev = staircase(u, base, &reverse);
            let fwd = staircase(u, base, &forward);
            let path_discrepancy = fwd
                .iter()
                .zip(&rev)
                .fold(0.0_f64, |acc, (a, b)| acc.max((a - b).abs()));
            Ok(Potential {
                field: ScalarField::from_raw(domain, vals),
                base,
                closedness,
                path_discrepancy,
                plaquette_circulation: plaquette_circulation(u),
                iterations,
            })
        }
    }
}

/// Conjugate gradients on `Σ_a D_aᵀ W D_a u = Σ_a D_aᵀ W U_a`, started from
/// the staircase potential. The system is singular only along constants,
/// which the right-hand side is orthogonal to.
fn least_squares(u: &VectorField, base: usize, order: &[usize]) -> (Vec<f64>, usize) {
    let domain = u.domain();
    let n = domain.len();
    let m = domain.dim();
    let w = quadrature_weights(domain);
    let apply = |x: &[f64]| -> Vec<f64> {
        let mut out = vec![0.0; n];
        for a in 0..m {
            let dx = partial_values(domain, x, a);
            let wdx: Vec<f64> = dx.iter().zip(&w).map(|(d, w)| d * w).collect();
            let back = partial_adjoint_values(domain, &wdx, a);
            out.iter_mut().zip(back).for_each(|(o, b)| *o += b);
        }
        out
    };
    let mut rhs = vec![0.0; n];
    for a in 0..m {
        let wu: Vec<f64> = u.component(a).values().iter().zip(&w).map(|(v, w)| v * w).collect();
        let back = partial_adjoint_values(domain, &wu, a);
        rhs.iter_mut().zip(back).for_each(|(o, b)| *o += b);
    }
    let dot = |a: &[f64], b: &[f64]| exec::sum_nodes(a.len(), |k| a[k] * b[k]);

    let mut x = staircase(u, base, order);
    let ax = apply(&x);
    let mut r: Vec<f64> = rhs.iter().zip(&ax).map(|(b, a)| b - a).collect();
    let mut p = r.clone();
    let mut rr = dot(&r, &r);
    let target = 1e-24 * dot(&rhs, &rhs).max(f64::MIN_POSITIVE);
    let max_iter = 20 * n;
    let mut it = 0;
    while rr > target && it < max_iter {
        let ap = apply(&p);
        let pap = dot(&p, &ap);
        if pap <= 0.0 {
            break;
        }
        let alpha = rr / pap;
        x.iter_mut().zip(&p).for_each(|(x, p)| *x += alpha * p);
        r.iter_mut().zip(&ap).for_each(|(r, a)| *r -= alpha * a);
        let rr_new = dot(&r, &r);
        let beta = rr_new / rr;
        p.iter_mut().zip(&r).for_each(|(p, r)| *p = r + beta * *p);
        rr = rr_new;
        it += 1;
    }
    let shift = x[base];
    x.iter_mut().for_each(|v| *v -= shift);
    (x, it)
}

/// How well `u` reproduces a prescribed normal and weight.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalCheck {
    /// `max |(∇u + F)/|∇u + F| - ν|` off the singular set of `u`.
    pub normal_error: f64,
    /// `max ||∇u + F| - D| / field_scale(D)` off the singular set.
    pub weight_error: f64,
    pub singular_nodes: usize,
}

pub fn verify_normal(
    u: &ScalarField,
    nu: &VectorField,
    d: &ScalarField,
    f: &VectorField,
    tau: f64,
) -> Result<NormalCheck> {
    ensure_same_domain(u.domain(), nu.domain())?;
    ensure_same_domain(u.domain(), d.domain())?;
    let (own_nu, mask) = crate::horizontal::horizontal_normal(u, f, tau)?;
    let own_d = crate::horizontal::weight(u, f)?;
    let m = u.domain().dim();
    let flags = mask.flags();
    let normal_error = exec::max_nodes(u.domain().len(), |k| {
        if flags[k] {
            return 0.0;
        }
        (0..m)
            .map(|a| (own_nu.component(a).values()[k] - nu.component(a).values()[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    let scale = field_scale(d.values());
    let weight_error = exec::max_nodes(u.domain().len(), |k| {
        if flags[k] {
            0.0
        } else {
            (own_d.values()[k] - d.values()[k]).abs() / scale
        }
    });
    Ok(NormalCheck {
        normal_error,
        weight_error,
        singular_nodes: mask.count(),
    })
}

/// Whole pipeline: `U = Dν - F`, closedness check, integration.
pub fn reconstruct(
    nu: &VectorField,
    d: &ScalarField,
    f: &VectorField,
    base: usize,
    tol: f64,
    integrator: Integrator,
) -> Result<Potential> {
    let u = u_candidate_field(nu, d, f)?;
    integrate_potential_with(&u, base, tol, integrator)
}
