//! The functional `F_H(u) = ∫ |∇u + F| + H u` on the grid: evaluation,
//! first variation, line profiles, Dirichlet minimization and the
//! uniqueness audit.

mod minimize;

pub use minimize::{minimize, LogEntry, MinimizeOptions, Minimization, StageSummary};

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::calculus::quadrature_weights;
use crate::grid::{
    divergence, ensure_same_domain, field_scale, gradient, ScalarField, VectorField,
};
use crate::horizontal::{curl_matrix, horizontal_normal, singular_set, weight};
use crate::integrability::classify_integrability;
use crate::skew::{rank_with_floor, DEFAULT_RANK_TOL};

/// Antisymmetric constant coefficients `a^{jk}` of the map `G ↦ G^b`,
/// `(G^b)_j = Σ_k a^{jk} G_k`.
#[derive(Debug, Clone, PartialEq)]
pub struct BCoefficients {
    m: usize,
    a: Vec<f64>,
}

impl BCoefficients {
    /// Row-major `m × m` matrix; must satisfy `a^{jk} + a^{kj} = 0` exactly.
    pub fn new(m: usize, a: Vec<f64>) -> Result<Self> {
        if a.len() != m * m {
            return Err(Error::Length {
                expected: m * m,
                got: a.len(),
            });
        }
        if let Some(bad) = a.iter().position(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "non-finite coefficient at position {bad}"
            )));
        }
        for j in 0..m {
            for k in j..m {
                if a[j * m + k] + a[k * m + j] != 0.0 {
                    return Err(Error::InvalidArgument(format!(
                        "coefficients not antisymmetric at ({}, {})",
                        j + 1,
                        k + 1
                    )));
                }
            }
        }
        Ok(Self { m, a })
    }

    pub fn zeros(m: usize) -> Self {
        Self {
            m,
            a: vec![0.0; m * m],
        }
    }

    /// Builds from upper-triangle entries `((j, k), a^{jk})` with `j < k`,
    /// zero-based.
    pub fn from_pairs(m: usize, entries: &[((usize, usize), f64)]) -> Result<Self> {
        let mut a = vec![0.0; m * m];
        for &((j, k), v) in entries {
            if j >= k || k >= m {
                return Err(Error::InvalidArgument(format!(
                    "pair ({j}, {k}) is not an upper-triangle index for m = {m}"
                )));
            }
            a[j * m + k] = v;
            a[k * m + j] = -v;
        }
        Self::new(m, a)
    }

    /// `a^{2j-1, 2j} = 1` for each coordinate pair, i.e. the rotation
    /// `(G_1, G_2, ...) ↦ (G_2, -G_1, ...)` on every plane.
    pub fn heisenberg(n: usize) -> Self {
        let m = 2 * n;
        let entries: Vec<_> = (0..n).map(|j| ((2 * j, 2 * j + 1), 1.0)).collect();
        Self::from_pairs(m, &entries).expect("valid pairs")
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn get(&self, j: usize, k: usize) -> f64 {
        self.a[j * self.m + k]
    }

    pub fn apply(&self, g: &[f64], out: &mut [f64]) {
        for (j, o) in out.iter_mut().enumerate() {
            *o = (0..self.m).map(|k| self.get(j, k) * g[k]).sum();
        }
    }
}

/// `∫ |∇u + F| + H u` by the trapezoid rule.
pub fn functional(u: &ScalarField, f: &VectorField, h: &ScalarField) -> Result<f64> {
    ensure_same_domain(u.domain(), h.domain())?;
    let d = weight(u, f)?;
    let dv = d.values();
    let (hv, uv) = (h.values(), u.values());
    let domain = u.domain();
    Ok(exec::sum_nodes(domain.len(), |k| {
        domain.quadrature_weight(k) * (dv[k] + hv[k] * uv[k])
    }))
}

fn check_dim(g: &VectorField, a: &BCoefficients) -> Result<()> {
    if g.dim() == a.dim() {
        Ok(())
    } else {
        Err(Error::Length {
            expected: g.dim(),
            got: a.dim(),
        })
    }
}

/// `(G^b)_j = Σ_k a^{jk} G_k` pointwise.
pub fn b_transform(g: &VectorField, a: &BCoefficients) -> Result<VectorField> {
    check_dim(g, a)?;
    let m = g.dim();
    let domain = g.domain_arc().clone();
    let blocks = (0..m)
        .map(|j| {
            exec::map_nodes(domain.len(), |k| {
                (0..m)
                    .map(|c| a.get(j, c) * g.component(c).values()[k])
                    .sum()
            })
        })
        .collect();
    Ok(VectorField::from_raw(domain, blocks))
}

/// `div F^b = Σ a^{jk} ∂_j F_k`.
pub fn div_b(f: &VectorField, a: &BCoefficients) -> Result<ScalarField> {
    Ok(divergence(&b_transform(f, a)?))
}

/// One-sided first variations of `F_H` at `u` in direction `φ`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Variation {
    pub right: f64,
    pub left: f64,
    /// `∫_S |∇φ|` over the singular set of `u`.
    pub singular_part: f64,
    pub singular_nodes: usize,
}

/// `±∫_S |∇φ| + ∫_{Ω∖S} ν·∇φ + ∫ H φ`, `+` for the right derivative.
pub fn first_variation(
    u: &ScalarField,
    phi: &ScalarField,
    f: &VectorField,
    h: &ScalarField,
    tau: f64,
) -> Result<Variation> {
    ensure_same_domain(u.domain(), phi.domain())?;
    ensure_same_domain(u.domain(), h.domain())?;
    let (nu, mask) = horizontal_normal(u, f, tau)?;
    let dphi = gradient(phi);
    let flags = mask.flags();
    let domain = u.domain();
    let m = domain.dim();
    let comp = |v: &VectorField, a: usize, k: usize| v.component(a).values()[k];
    let singular_part = exec::sum_nodes(domain.len(), |k| {
        if flags[k] {
            let n2: f64 = (0..m).map(|a| comp(&dphi, a, k).powi(2)).sum();
            domain.quadrature_weight(k) * n2.sqrt()
        } else {
            0.0
        }
    });
    let regular = exec::sum_nodes(domain.len(), |k| {
        let wk = domain.quadrature_weight(k);
        let hphi = h.values()[k] * phi.values()[k];
        if flags[k] {
            wk * hphi
        } else {
            let dot: f64 = (0..m).map(|a| comp(&nu, a, k) * comp(&dphi, a, k)).sum();
            wk * (dot + hphi)
        }
    });
    Ok(Variation {
        right: regular + singular_part,
        left: regular - singular_part,
        singular_part,
        singular_nodes: mask.count(),
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct LineProfile {
    /// `(ε, F_H(u + ε (v - u)))`.
    pub points: Vec<(f64, f64)>,
    /// Smallest second difference; `+∞` with fewer than three points.
    pub min_second_difference: f64,
    pub scale: f64,
}

/// Second difference at interior sample `i`. On a uniform grid this is the
/// plain `f[i-1] - 2 f[i] + f[i+1]`; otherwise the slope jump times the mean
/// local spacing.
fn second_difference(e: &[f64], f: &[f64], i: usize) -> f64 {
    let (hm, hp) = (e[i] - e[i - 1], e[i + 1] - e[i]);
    ((f[i + 1] - f[i]) / hp - (f[i] - f[i - 1]) / hm) * 0.5 * (hm + hp)
}

pub fn line_profile(
    u: &ScalarField,
    v: &ScalarField,
    f: &VectorField,
    h: &ScalarField,
    eps: &[f64],
) -> Result<LineProfile> {
    ensure_same_domain(u.domain(), v.domain())?;
    if eps.is_empty() || eps.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidArgument(
            "epsilon grid must be non-empty and strictly increasing".into(),
        ));
    }
    let diff = v.sub(u)?;
    let values = eps
        .iter()
        .map(|&e| functional(&u.add(&diff.scaled(e))?, f, h))
        .collect::<Result<Vec<_>>>()?;
    let min_second_difference = (1..eps.len().saturating_sub(1))
        .map(|i| second_difference(eps, &values, i))
        .fold(f64::INFINITY, f64::min);
    Ok(LineProfile {
        points: eps.iter().copied().zip(values.iter().copied()).collect(),
        min_second_difference,
        scale: field_scale(&values),
    })
}

/// Measurements comparing two candidates `u`, `v` with the same data.
#[derive(Debug, Clone)]
pub struct UniquenessReport {
    /// `max |ν^u - ν^v|` off the joint singular mask.
    pub normal_max: f64,
    /// `∫ |ν^u - ν^v|` off the joint singular mask.
    pub normal_l1: f64,
    /// `max |∇u - ∇v|`.
    pub gradient_gap: f64,
    /// Joint singular mask.
    pub joint_mask: Vec<bool>,
    /// `rank h ≥ 3`, off the joint mask.
    pub rank_flags: Vec<bool>,
    /// Either contact form nonintegrable, off the joint mask.
    pub nonintegrable_flags: Vec<bool>,
    /// `div F^b > 0`, off the joint mask.
    pub positive_div_flags: Vec<bool>,
    /// `max_ε max |⟨(∇u_ε + F)^b, ∇v - ∇u⟩|`, `u_ε = u + ε (v - u)`.
    pub orthogonality_residual: f64,
    /// `(ε, singular node count of u_ε)` for each sampled `ε`.
    pub mask_sizes: Vec<(f64, usize)>,
    pub functional_u: f64,
    pub functional_v: f64,
}

impl UniquenessReport {
    fn all(flags: &[bool], mask: &[bool]) -> bool {
        flags.iter().zip(mask).all(|(f, m)| *m || *f)
    }

    fn none(flags: &[bool]) -> bool {
        !flags.iter().any(|f| *f)
    }

    pub fn rank_everywhere(&self) -> bool {
        Self::all(&self.rank_flags, &self.joint_mask)
    }

    pub fn rank_nowhere(&self) -> bool {
        Self::none(&self.rank_flags)
    }

    pub fn nonintegrable_everywhere(&self) -> bool {
        Self::all(&self.nonintegrable_flags, &self.joint_mask)
    }

    pub fn nonintegrable_nowhere(&self) -> bool {
        Self::none(&self.nonintegrable_flags)
    }

    pub fn positive_div_everywhere(&self) -> bool {
        Self::all(&self.positive_div_flags, &self.joint_mask)
    }

    pub fn regular_nodes(&self) -> usize {
        self.joint_mask.iter().filter(|m| !**m).count()
    }
}

/// Sample points for the orthogonality residual.
pub const AUDIT_EPS: [f64; 3] = [0.0, 0.5, 1.0];

#[allow(clippy::too_many_arguments)]
pub fn uniqueness_audit(
    u: &ScalarField,
    v: &ScalarField,
    f: &VectorField,
    h: &ScalarField,
    a: &BCoefficients,
    tau: f64,
    eta: f64,
) -> Result<UniquenessReport> {
    ensure_same_domain(u.domain(), v.domain())?;
    check_dim(f, a)?;
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "threshold must be positive, got {eta}"
        )));
    }
    let domain = u.domain_arc().clone();
    let n = domain.len();
    let m = domain.dim();
    let (nu_u, mask_u) = horizontal_normal(u, f, tau)?;
    let (nu_v, mask_v) = horizontal_normal(v, f, tau)?;
    let joint = mask_u.union(&mask_v)?;
    let jflags = joint.flags().to_vec();

    let normal_gap = exec::map_nodes(n, |k| {
        if jflags[k] {
            return 0.0;
        }
        (0..m)
            .map(|c| (nu_u.component(c).values()[k] - nu_v.component(c).values()[k]).powi(2))
            .sum::<f64>()
            .sqrt()
    });
    let normal_max = normal_gap.iter().copied().fold(0.0, f64::max);
    let w = quadrature_weights(&domain);
    let normal_l1 = exec::sum_nodes(n, |k| w[k] * normal_gap[k]);

    let du = gradient(u);
    let dv = gradient(v);
    let dd = dv.sub(&du)?;
    let gradient_gap = dd.norm().max_abs();

    let curl = curl_matrix(f);
    let floor = eta * field_scale(&curl.magnitudes());
    let rank_flags = exec::map_nodes_with(n, |k| {
        !jflags[k] && rank_with_floor(&curl.matrix_at(k), DEFAULT_RANK_TOL, floor) >= 3
    });

    let cu = classify_integrability(u, f, tau, eta)?;
    let cv = classify_integrability(v, f, tau, eta)?;
    let nonintegrable_flags = (0..n)
        .map(|k| !jflags[k] && (cu.is_nonintegrable(k) || cv.is_nonintegrable(k)))
        .collect();

    let divb = div_b(f, a)?;
    let div_cut = eta * divb.scale();
    let positive_div_flags = (0..n)
        .map(|k| !jflags[k] && divb.values()[k] > div_cut)
        .collect();

    let diff = v.sub(u)?;
    let mut orthogonality_residual: f64 = 0.0;
    let mut mask_sizes = Vec::with_capacity(AUDIT_EPS.len());
    for &e in &AUDIT_EPS {
        let ue = u.add(&diff.scaled(e))?;
        mask_sizes.push((e, singular_set(&ue, f, tau)?.count()));
        let g = gradient(&ue).add(f)?;
        let gb = b_transform(&g, a)?;
        let r = gb.dot(&dd)?.max_abs();
        orthogonality_residual = orthogonality_residual.max(r);
    }

    Ok(UniquenessReport {
        normal_max,
        normal_l1,
        gradient_gap,
        joint_mask: jflags,
        rank_flags,
        nonintegrable_flags,
        positive_div_flags,
        orthogonality_residual,
        mask_sizes,
        functional_u: functional(u, f, h)?,
        functional_v: functional(v, f, h)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::grid::integrate;
    use crate::grid::GridDomain;
    use std::sync::Arc;

    fn dom(lo: &[f64], hi: &[f64], n: &[usize]) -> Arc<GridDomain> {
        Arc::new(GridDomain::new(lo, hi, n).unwrap())
    }

    fn heis(d: &Arc<GridDomain>) -> VectorField {
        VectorField::sample(d.clone(), |x, o| {
            for j in 0..x.len() / 2 {
                o[2 * j] = -x[2 * j + 1];
                o[2 * j + 1] = x[2 * j];
            }
        })
        .unwrap()
    }

    fn twin(d: &Arc<GridDomain>) -> (ScalarField, ScalarField) {
        (
            ScalarField::sample(d.clone(), |x| x[0] * x[1]).unwrap(),
            ScalarField::sample(d.clone(), |x| x[0] * x[1] + x[1]).unwrap(),
        )
    }

    #[test]
    fn coefficients_validate() {
        assert!(BCoefficients::new(2, vec![0.0, 1.0, -1.0, 0.0]).is_ok());
        assert!(BCoefficients::new(2, vec![0.0, 1.0, 1.0, 0.0]).is_err());
        assert!(BCoefficients::new(2, vec![1.0, 0.0, 0.0, 0.0]).is_err());
        assert!(BCoefficients::new(3, vec![0.0; 4]).is_err());
        let h = BCoefficients::heisenberg(2);
        assert_eq!(h.get(0, 1), 1.0);
        assert_eq!(h.get(3, 2), -1.0);
        assert_eq!(h.get(0, 2), 0.0);
    }

    #[test]
    fn functional_values() {
        let d = dom(&[0.0, 0.0], &[1.0, 1.0], &[17, 17]);
        let f = heis(&d);
        let zero = ScalarField::zeros(d.clone());
        let (u, v) = twin(&d);
        assert!((functional(&u, &f, &zero).unwrap() - 1.0).abs() < 1e-12);
        assert!((functional(&v, &f, &zero).unwrap() - 2.0).abs() < 1e-12);
        let hh = ScalarField::sample(d.clone(), |x| x[0] - 3.0 * x[1]).unwrap();
        let z = VectorField::zeros(d.clone());
        assert_eq!(functional(&zero, &z, &hh).unwrap(), 0.0);
        let shifted = functional(&u.shifted(2.5), &f, &hh).unwrap();
        let expect = functional(&u, &f, &hh).unwrap() + 2.5 * integrate(&hh);
        assert!((shifted - expect).abs() < 1e-10);
    }

    #[test]
    fn b_transform_examples() {
        let d = dom(&[-1.0, -1.0], &[1.0, 1.0], &[9, 9]);
        let a = BCoefficients::heisenberg(1);
        let g = VectorField::sample(d.clone(), |x, o| o.copy_from_slice(x)).unwrap();
        let gb = b_transform(&g, &a).unwrap();
        for k in 0..d.len() {
            let x = d.coords(k);
            assert_eq!(gb.at(k), vec![x[1], -x[0]]);
        }
        assert_eq!(gb.dot(&g).unwrap().max_abs(), 0.0);
        let z = b_transform(&VectorField::zeros(d.clone()), &a).unwrap();
        assert_eq!(z.components()[0].max_abs() + z.components()[1].max_abs(), 0.0);
        let fb = b_transform(&heis(&d), &a).unwrap();
        for k in 0..d.len() {
            let x = d.coords(k);
            assert_eq!(fb.at(k), x);
        }
    }

    #[test]
    fn div_b_examples() {
        let d = dom(&[-1.0, -1.0], &[1.0, 1.0], &[9, 9]);
        let a = BCoefficients::heisenberg(1);
        let db = div_b(&heis(&d), &a).unwrap();
        assert!(db.values().iter().all(|v| *v == 2.0));
        let phi = ScalarField::sample(d.clone(), |x| (x[0] * x[1]).sin() + x[0].powi(2)).unwrap();
        let g = gradient(&phi);
        assert!(div_b(&g, &a).unwrap().max_abs() < 1e-12);
        let zero = div_b(&heis(&d), &BCoefficients::zeros(2)).unwrap();
        assert_eq!(zero.max_abs(), 0.0);
    }

    #[test]
    fn first_variation_cases() {
        let d = dom(&[0.1, 0.0], &[1.0, 1.0], &[37, 33]);
        let f = heis(&d);
        let zero = ScalarField::zeros(d.clone());
        let (u, _) = twin(&d);
        let phi = ScalarField::sample(d.clone(), |x| x[1]).unwrap();
        let var = first_variation(&u, &phi, &f, &zero, 1e-6).unwrap();
        assert_eq!(var.right, var.left);
        assert!((var.right - 0.9).abs() < 1e-12);

        // ∇u + F ≡ 0
        let g = ScalarField::sample(d.clone(), |x| x[0] * x[0] + x[1]).unwrap();
        let full = gradient(&g).scaled(-1.0);
        let psi = ScalarField::sample(d.clone(), |x| x[0] * x[1] * x[1]).unwrap();
        let var = first_variation(&g, &psi, &full, &zero, 1e-6).unwrap();
        let tv = integrate(&gradient(&psi).norm());
        assert_eq!(var.singular_nodes, d.len());
        assert!((var.right - tv).abs() < 1e-12 && (var.left + tv).abs() < 1e-12);
    }

    #[test]
    fn line_profile_twin_pair_is_affine() {
        let d = dom(&[0.1, 0.0], &[1.0, 1.0], &[65, 65]);
        let f = heis(&d);
        let zero = ScalarField::zeros(d.clone());
        let (u, v) = twin(&d);
        let eps: Vec<f64> = (0..=10).map(|i| i as f64 / 10.0).collect();
        let p = line_profile(&u, &v, &f, &zero, &eps).unwrap();
        assert!(p.min_second_difference.abs() < 1e-10);
        for (e, val) in &p.points {
            // ∫ 2x + ε over [0.1, 1] × [0, 1]
            assert!((val - (0.99 + 0.9 * e)).abs() < 1e-12);
        }
        let same = line_profile(&u, &u, &f, &zero, &eps).unwrap();
        assert!(same.points.iter().all(|p| p.1 == same.points[0].1));
        assert!(line_profile(&u, &v, &f, &zero, &[0.0, 0.0]).is_err());
    }

    #[test]
    fn audit_of_twin_pair() {
        let d = dom(&[0.1, 0.0], &[1.0, 1.0], &[65, 65]);
        let f = heis(&d);
        let zero = ScalarField::zeros(d.clone());
        let (u, v) = twin(&d);
        let a = BCoefficients::heisenberg(1);
        let r = uniqueness_audit(&u, &v, &f, &zero, &a, 1e-6, 1e-4).unwrap();
        assert!(r.normal_max <= 1e-12);
        assert!((r.gradient_gap - 1.0).abs() <= 1e-12);
        assert!(r.rank_nowhere() && r.nonintegrable_nowhere());
        assert!(r.positive_div_everywhere());
        assert!(r.orthogonality_residual <= 1e-12);

        let same = uniqueness_audit(&u, &u, &f, &zero, &a, 1e-6, 1e-4).unwrap();
        assert_eq!(same.normal_max, 0.0);
        assert_eq!(same.normal_l1, 0.0);
        assert_eq!(same.gradient_gap, 0.0);
    }

    #[test]
    fn audit_flags_full_rank_in_four_dimensions() {
        let d = dom(&[0.0; 4], &[1.0; 4], &[5; 4]);
        let f = heis(&d);
        let zero = ScalarField::zeros(d.clone());
        let u = ScalarField::sample(d.clone(), |x| x[0] + 2.0 * x[3]).unwrap();
        let a = BCoefficients::heisenberg(2);
        let r = uniqueness_audit(&u, &u, &f, &zero, &a, 1e-6, 1e-4).unwrap();
        assert!(r.rank_everywhere());
        assert!(r.nonintegrable_everywhere());
        assert!(r.positive_div_everywhere());
    }
}
