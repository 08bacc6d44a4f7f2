//! Integrability of the contact form `Θ_w = dw + F_I dx^I` and the
//! compatibility system for a prescribed pair `(ν, D)`.
//!
//! Off the singular set `Θ_w ∧ dΘ_w` is a positive multiple of the 3-form
//! with coefficients
//!
//! ```text
//! T_KIJ = ν_K h_IJ + ν_I h_JK + ν_J h_KI,
//! ```
//!
//! so the distribution `Θ_w = 0` is integrable exactly where `T` vanishes.
//! For a prescribed unit field `ν`, weight `D > 0` and `F`, a potential `u`
//! with `ν = (∇u + F)/D` requires the structure identity (checked by
//! [`structure_condition_residual`]) together with `ν ⌟ d(Dν - F) = 0`, whose
//! components are
//!
//! ```text
//! ν_K ν_I ∂_I D - ∂_K D + ν_J (∂_J ν_K - ∂_K ν_J) D - ν_I h_IK = 0,
//! ```
//!
//! or equivalently, for `|ν| = 1`, `δ_K D = ν_J (∂_J ν_K) D - ν_J h_JK`.

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec;
use crate::grid::calculus::partial_values;
use crate::grid::{ensure_same_domain, field_scale, GridDomain, ScalarField, VectorField};
use crate::horizontal::{
    curl_matrix, horizontal_normal, jacobian, structure_residual_from_parts, ResidualNorms,
    SingularMask, SkewField,
};

/// Default relative threshold below which `T` counts as zero.
pub const DEFAULT_ETA: f64 = 1e-4;

/// Strictly increasing index triples in lexicographic order.
pub fn triples(m: usize) -> Vec<(usize, usize, usize)> {
    let mut out = Vec::new();
    for a in 0..m {
        for b in a + 1..m {
            for c in b + 1..m {
                out.push((a, b, c));
            }
        }
    }
    out
}

/// Fully antisymmetric 3-tensor at every node, stored on `K < I < J`.
#[derive(Debug, Clone, PartialEq)]
pub struct Alternating3Field {
    domain: Arc<GridDomain>,
    triples: Vec<(usize, usize, usize)>,
    entries: Vec<Vec<f64>>,
}

impl Alternating3Field {
    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.entries
    }

    /// Entry for any index order; repeated indices read zero.
    pub fn get(&self, a: usize, b: usize, c: usize, k: usize) -> f64 {
        if a == b || b == c || a == c {
            return 0.0;
        }
        let mut idx = [a, b, c];
        // parity of the sorting permutation
        let mut sign = 1.0;
        for i in 0..3 {
            for j in 0..2 - i {
                if idx[j] > idx[j + 1] {
                    idx.swap(j, j + 1);
                    sign = -sign;
                }
            }
        }
        let pos = self
            .triples
            .iter()
            .position(|t| *t == (idx[0], idx[1], idx[2]))
            .expect("sorted triple is stored");
        sign * self.entries[pos][k]
    }

    pub fn node_magnitude(&self, k: usize) -> f64 {
        self.entries.iter().fold(0.0, |a, b| a.max(b[k].abs()))
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        exec::map_nodes(self.domain.len(), |k| self.node_magnitude(k))
    }

    pub fn max_abs(&self) -> f64 {
        exec::max_nodes(self.domain.len(), |k| self.node_magnitude(k))
    }

    /// `max(1, max |T|)`.
    pub fn scale(&self) -> f64 {
        self.max_abs().max(1.0)
    }
}

/// `T_KIJ = ν_K h_IJ + ν_I h_JK + ν_J h_KI` with `h = curl_matrix(F)`.
///
/// The positive factor `D/2` relating `T` to `Θ ∧ dΘ` is left out.
pub fn frobenius_tensor(nu: &VectorField, f: &VectorField) -> Result<Alternating3Field> {
    ensure_same_domain(nu.domain(), f.domain())?;
    let h = curl_matrix(f);
    Ok(frobenius_from_curl(nu, &h))
}

pub(crate) fn frobenius_from_curl(nu: &VectorField, h: &SkewField) -> Alternating3Field {
    let domain = nu.domain_arc().clone();
    let trip = triples(domain.dim());
    let entries = trip
        .iter()
        .map(|&(a, b, c)| {
            let (na, nb, nc) = (
                nu.component(a).values(),
                nu.component(b).values(),
                nu.component(c).values(),
            );
            exec::map_nodes(domain.len(), |k| {
                na[k] * h.get(b, c, k) + nb[k] * h.get(c, a, k) + nc[k] * h.get(a, b, k)
            })
        })
        .collect();
    Alternating3Field {
        domain,
        triples: trip,
        entries,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum NodeClass {
    Singular,
    Integrable,
    Nonintegrable,
}

impl NodeClass {
    pub fn as_str(self) -> &'static str {
        match self {
            NodeClass::Singular => "singular",
            NodeClass::Integrable => "integrable",
            NodeClass::Nonintegrable => "nonintegrable",
        }
    }
}

#[derive(Debug, Clone)]
pub struct IntegrabilityMap {
    pub labels: Vec<NodeClass>,
    pub tensor: Alternating3Field,
    pub mask: SingularMask,
    /// Absolute cut applied to `max |T_KIJ|` at each node.
    pub cut: f64,
}

impl IntegrabilityMap {
    pub fn count(&self, class: NodeClass) -> usize {
        self.labels.iter().filter(|l| **l == class).count()
    }

    pub fn is_nonintegrable(&self, k: usize) -> bool {
        self.labels[k] == NodeClass::Nonintegrable
    }
}

/// Labels every node singular, integrable or nonintegrable.
pub fn classify_integrability(
    w: &ScalarField,
    f: &VectorField,
    tau: f64,
    eta: f64,
) -> Result<IntegrabilityMap> {
    if !(eta > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "integrability threshold must be positive, got {eta}"
        )));
    }
    let (nu, mask) = horizontal_normal(w, f, tau)?;
    let h = curl_matrix(f);
    Ok(classify_with_normal(&nu, &mask, &h, eta))
}

pub(crate) fn classify_with_normal(
    nu: &VectorField,
    mask: &SingularMask,
    h: &SkewField,
    eta: f64,
) -> IntegrabilityMap {
    let tensor = frobenius_from_curl(nu, h);
    let mags = tensor.magnitudes();
    let cut = eta * field_scale(&mags);
    let labels = mags
        .iter()
        .zip(mask.flags())
        .map(|(&t, &singular)| {
            if singular {
                NodeClass::Singular
            } else if t < cut {
                NodeClass::Integrable
            } else {
                NodeClass::Nonintegrable
            }
        })
        .collect();
    IntegrabilityMap {
        labels,
        tensor,
        mask: mask.clone(),
        cut,
    }
}

fn ensure_positive(d: &ScalarField) -> Result<()> {
    match d.values().iter().position(|v| !(*v > 0.0)) {
        Some(k) => Err(Error::Precondition(format!(
            "weight D must be positive; D = {} at node {k}",
            d.get(k)
        ))),
        None => Ok(()),
    }
}

fn check_triple(nu: &VectorField, d: &ScalarField, f: &VectorField) -> Result<()> {
    ensure_same_domain(nu.domain(), d.domain())?;
    ensure_same_domain(nu.domain(), f.domain())?;
    ensure_positive(d)
}

/// `(δ_I ν_J - δ_J ν_I) - (1/D)(h_IJ - ν_J ν_K h_IK - ν_I ν_K h_KJ)`.
pub fn structure_condition_residual(
    nu: &VectorField,
    d: &ScalarField,
    f: &VectorField,
) -> Result<SkewField> {
    check_triple(nu, d, f)?;
    let h = curl_matrix(f);
    Ok(structure_residual_from_parts(nu, d.values(), &h, None))
}

/// Components of `ν ⌟ d(Dν - F)`.
pub fn closure_condition_residual(
    nu: &VectorField,
    d: &ScalarField,
    f: &VectorField,
) -> Result<VectorField> {
    check_triple(nu, d, f)?;
    let domain = nu.domain_arc().clone();
    let m = domain.dim();
    let h = curl_matrix(f);
    let jac = jacobian(nu);
    let dd: Vec<Vec<f64>> = (0..m).map(|a| partial_values(&domain, d.values(), a)).collect();
    let blocks = (0..m)
        .map(|kc| {
            exec::map_nodes(domain.len(), |k| {
                let n = |a: usize| nu.component(a).values()[k];
                let nu_grad_d: f64 = (0..m).map(|i| n(i) * dd[i][k]).sum();
                let rot: f64 = (0..m)
                    .map(|j| n(j) * (jac[j][kc][k] - jac[kc][j][k]))
                    .sum();
                let h_term: f64 = (0..m).map(|i| n(i) * h.get(i, kc, k)).sum();
                n(kc) * nu_grad_d - dd[kc][k] + rot * d.values()[k] - h_term
            })
        })
        .collect();
    Ok(VectorField::from_raw(domain, blocks))
}

/// `δ_K D - ν_J (∂_J ν_K) D + ν_J h_JK`.
pub fn tangential_condition_residual(
    nu: &VectorField,
    d: &ScalarField,
    f: &VectorField,
) -> Result<VectorField> {
    check_triple(nu, d, f)?;
    let domain = nu.domain_arc().clone();
    let m = domain.dim();
    let h = curl_matrix(f);
    let jac = jacobian(nu);
    let dd: Vec<Vec<f64>> = (0..m).map(|a| partial_values(&domain, d.values(), a)).collect();
    let blocks = (0..m)
        .map(|kc| {
            exec::map_nodes(domain.len(), |k| {
                let n = |a: usize| nu.component(a).values()[k];
                let nu_grad_d: f64 = (0..m).map(|i| n(i) * dd[i][k]).sum();
                let along: f64 = (0..m).map(|j| n(j) * jac[j][kc][k]).sum();
                let h_term: f64 = (0..m).map(|j| n(j) * h.get(j, kc, k)).sum();
                (dd[kc][k] - n(kc) * nu_grad_d) - along * d.values()[k] + h_term
            })
        })
        .collect();
    Ok(VectorField::from_raw(domain, blocks))
}

/// `div(D ν_⊥) - 2` with `ν_⊥ = (ν_2, -ν_1)`, the planar form of the
/// `ν ⌟ d(Dν - F) = 0` condition for `F = (-y, x)`.
pub fn codazzi_2d_residual(nu: &VectorField, d: &ScalarField) -> Result<ScalarField> {
    ensure_same_domain(nu.domain(), d.domain())?;
    if nu.dim() != 2 {
        return Err(Error::Precondition(format!(
            "planar residual needs m = 2, got m = {}",
            nu.dim()
        )));
    }
    let domain = nu.domain_arc().clone();
    let dv = d.values();
    let (n1, n2) = (nu.component(0).values(), nu.component(1).values());
    let a: Vec<f64> = (0..domain.len()).map(|k| dv[k] * n2[k]).collect();
    let b: Vec<f64> = (0..domain.len()).map(|k| -dv[k] * n1[k]).collect();
    let da = partial_values(&domain, &a, 0);
    let db = partial_values(&domain, &b, 1);
    let values = da.iter().zip(&db).map(|(x, y)| x + y - 2.0).collect();
    Ok(ScalarField::from_raw(domain, values))
}

/// Rescales `ν` to unit length at every node; fails if `|ν| < 0.5` anywhere.
pub fn renormalize(nu: &VectorField) -> Result<VectorField> {
    let norm = nu.norm();
    if let Some(k) = norm.values().iter().position(|v| *v < 0.5) {
        return Err(Error::Precondition(format!(
            "|ν| = {:.3e} < 0.5 at node {k}; not a unit field",
            norm.get(k)
        )));
    }
    let domain = nu.domain_arc().clone();
    let blocks = nu
        .components()
        .iter()
        .map(|c| {
            c.values()
                .iter()
                .zip(norm.values())
                .map(|(v, n)| v / n)
                .collect()
        })
        .collect();
    Ok(VectorField::from_raw(domain, blocks))
}

/// Norms of the pointwise Euclidean length of a vector residual.
pub fn vector_residual_norms(v: &VectorField) -> ResidualNorms {
    ResidualNorms::of(v.domain(), v.norm().values())
}
