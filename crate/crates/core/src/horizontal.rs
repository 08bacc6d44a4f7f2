//! Pointwise horizontal geometry of `w` relative to a field `F`.
//!
//! The weight `D = |∇w + F|`, the horizontal normal `ν = (∇w + F) / D`, the
//! singular set where `∇w + F` vanishes, the curl matrix
//! `h_IJ = ∂_I F_J - ∂_J F_I`, the tangential operator
//! `δ_K = ∂_K - ν_K ν_J ∂_J`, and the residual of the structure identity
//!
//! ```text
//! δ_I ν_J - δ_J ν_I = (1/D) (h_IJ - ν_J ν_K h_IK - ν_I ν_K h_KJ).
//! ```
//!
//! Nodes in the singular set carry zeros in every derived field; consumers
//! receive the [`SingularMask`] alongside.

use std::sync::Arc;

use crate::error::Result;
use crate::exec;
use crate::grid::calculus::{integrate_values, partial_values};
use crate::grid::{ensure_same_domain, field_scale, gradient, GridDomain, ScalarField, VectorField};
use crate::skew::SkewMatrix;

/// Default relative singular-set threshold.
pub const DEFAULT_TAU: f64 = 1e-6;

/// Position of the pair `(i, j)`, `i < j`, in lexicographic order.
#[inline]
pub fn pair_index(m: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < m);
    i * (2 * m - i - 1) / 2 + (j - i - 1)
}

/// All pairs `i < j` in lexicographic order.
pub fn pairs(m: usize) -> Vec<(usize, usize)> {
    (0..m)
        .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
        .collect()
}

/// Max-norm and area-weighted L¹ norm of a residual field.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualNorms {
    pub max: f64,
    pub l1: f64,
}

impl ResidualNorms {
    /// Norms of per-node magnitudes.
    pub fn of(domain: &GridDomain, magnitude: &[f64]) -> Self {
        ResidualNorms {
            max: exec::max_nodes(magnitude.len(), |k| magnitude[k]),
            l1: integrate_values(domain, magnitude),
        }
    }
}

/// Skew-symmetric `m×m` matrix at every node, stored as its upper triangle.
#[derive(Debug, Clone, PartialEq)]
pub struct SkewField {
    domain: Arc<GridDomain>,
    entries: Vec<Vec<f64>>,
}

impl SkewField {
    /// `blocks` holds one node-value vector per pair `I < J`, lexicographic.
    pub fn new(domain: Arc<GridDomain>, blocks: Vec<Vec<f64>>) -> Result<Self> {
        let m = domain.dim();
        let expected = m * (m - 1) / 2;
        if blocks.len() != expected {
            return Err(crate::Error::Length {
                expected,
                got: blocks.len(),
            });
        }
        for b in &blocks {
            ScalarField::new(domain.clone(), b.clone())?;
        }
        Ok(SkewField {
            domain,
            entries: blocks,
        })
    }

    pub(crate) fn from_raw(domain: Arc<GridDomain>, entries: Vec<Vec<f64>>) -> Self {
        SkewField { domain, entries }
    }

    /// Builds the field from a per-node kernel writing the upper triangle.
    pub(crate) fn from_node_fn<F>(domain: Arc<GridDomain>, f: F) -> Self
    where
        F: Fn(usize, &mut [f64]) + Sync + Send,
    {
        let m = domain.dim();
        let p = m * (m - 1) / 2;
        let n = domain.len();
        let mut rows = vec![0.0; n * p];
        exec::fill_rows(&mut rows, p, f);
        let entries = (0..p)
            .map(|c| (0..n).map(|k| rows[k * p + c]).collect())
            .collect();
        SkewField { domain, entries }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn dim(&self) -> usize {
        self.domain.dim()
    }

    /// Entry `(i, j)` at node `k`; antisymmetric, zero on the diagonal.
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.entries[pair_index(self.dim(), i, j)][k],
            Greater => -self.entries[pair_index(self.dim(), j, i)][k],
            Equal => 0.0,
        }
    }

    /// Node values of the stored entry `(i, j)`, `i < j`.
    pub fn entry(&self, i: usize, j: usize) -> &[f64] {
        &self.entries[pair_index(self.dim(), i, j)]
    }

    pub fn blocks(&self) -> &[Vec<f64>] {
        &self.entries
    }

    pub fn matrix_at(&self, k: usize) -> SkewMatrix {
        SkewMatrix::from_upper(self.dim(), self.entries.iter().map(|b| b[k]).collect())
            .expect("upper triangle length matches dimension")
    }

    /// Largest absolute entry at node `k`.
    pub fn node_magnitude(&self, k: usize) -> f64 {
        self.entries.iter().fold(0.0, |a, b| a.max(b[k].abs()))
    }

    pub fn magnitudes(&self) -> Vec<f64> {
        exec::map_nodes(self.domain.len(), |k| self.node_magnitude(k))
    }

    pub fn max_abs(&self) -> f64 {
        exec::max_nodes(self.domain.len(), |k| self.node_magnitude(k))
    }

    pub fn norms(&self) -> ResidualNorms {
        ResidualNorms::of(&self.domain, &self.magnitudes())
    }

    /// Norms restricted to nodes where `keep[k]` holds.
    pub fn norms_where(&self, keep: &[bool]) -> ResidualNorms {
        let mags: Vec<f64> = self
            .magnitudes()
            .into_iter()
            .zip(keep)
            .map(|(v, &k)| if k { v } else { 0.0 })
            .collect();
        ResidualNorms::of(&self.domain, &mags)
    }
}

/// Nodes of the discrete singular set.
#[derive(Debug, Clone, PartialEq)]
pub struct SingularMask {
    domain: Arc<GridDomain>,
    flags: Vec<bool>,
    threshold: f64,
}

impl SingularMask {
    /// Flags nodes where `magnitude < tau · field_scale(magnitude)`.
    pub fn from_magnitude(domain: Arc<GridDomain>, magnitude: &[f64], tau: f64) -> Self {
        let cut = tau * field_scale(magnitude);
        let flags = magnitude.iter().map(|&d| d < cut).collect();
        SingularMask {
            domain,
            flags,
            threshold: tau,
        }
    }

    pub fn empty(domain: Arc<GridDomain>, tau: f64) -> Self {
        let n = domain.len();
        SingularMask {
            domain,
            flags: vec![false; n],
            threshold: tau,
        }
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn flags(&self) -> &[bool] {
        &self.flags
    }

    pub fn threshold(&self) -> f64 {
        self.threshold
    }

    pub fn is_flagged(&self, k: usize) -> bool {
        self.flags[k]
    }

    pub fn count(&self) -> usize {
        self.flags.iter().filter(|f| **f).count()
    }

    pub fn is_empty(&self) -> bool {
        !self.flags.iter().any(|f| *f)
    }

    /// Union of two masks on the same domain.
    pub fn union(&self, other: &SingularMask) -> Result<SingularMask> {
        ensure_same_domain(&self.domain, &other.domain)?;
        Ok(SingularMask {
            domain: self.domain.clone(),
            flags: self
                .flags
                .iter()
                .zip(&other.flags)
                .map(|(a, b)| *a || *b)
                .collect(),
            threshold: self.threshold.max(other.threshold),
        })
    }

    /// Complement of the flags, i.e. the nodes where the normal is defined.
    pub fn regular(&self) -> Vec<bool> {
        self.flags.iter().map(|f| !f).collect()
    }
}

/// `D = |∇w + F|`.
pub fn weight(w: &ScalarField, f: &VectorField) -> Result<ScalarField> {
    ensure_same_domain(w.domain(), f.domain())?;
    Ok(gradient(w).add(f)?.norm())
}

/// Nodes where `weight(w, F) < tau · field_scale(weight)`.
pub fn singular_set(w: &ScalarField, f: &VectorField, tau: f64) -> Result<SingularMask> {
    check_tau(tau)?;
    let d = weight(w, f)?;
    Ok(SingularMask::from_magnitude(
        w.domain_arc().clone(),
        d.values(),
        tau,
    ))
}

fn check_tau(tau: f64) -> Result<()> {
    if tau > 0.0 && tau.is_finite() {
        Ok(())
    } else {
        Err(crate::Error::InvalidArgument(format!(
            "threshold must be positive, got {tau}"
        )))
    }
}

/// Unit normal `(∇w + F)/|∇w + F|` off the singular set, zero on it.
pub fn horizontal_normal(
    w: &ScalarField,
    f: &VectorField,
    tau: f64,
) -> Result<(VectorField, SingularMask)> {
    check_tau(tau)?;
    let g = gradient(w).add(f)?;
    let d = g.norm();
    let mask = SingularMask::from_magnitude(w.domain_arc().clone(), d.values(), tau);
    let nu = normalize_with_mask(&g, d.values(), mask.flags());
    Ok((nu, mask))
}

pub(crate) fn normalize_with_mask(g: &VectorField, norm: &[f64], flags: &[bool]) -> VectorField {
    let domain = g.domain_arc().clone();
    let components = g
        .components()
        .iter()
        .map(|c| {
            let values = exec::map_nodes(domain.len(), |k| {
                if flags[k] {
                    0.0
                } else {
                    c.values()[k] / norm[k]
                }
            });
            ScalarField::from_raw(domain.clone(), values)
        })
        .collect();
    VectorField::from_components(components)
}

/// `h_IJ = ∂_I F_J - ∂_J F_I`.
pub fn curl_matrix(f: &VectorField) -> SkewField {
    let domain = f.domain_arc().clone();
    let m = domain.dim();
    let entries = pairs(m)
        .into_iter()
        .map(|(i, j)| {
            let dfj = partial_values(&domain, f.component(j).values(), i);
            let dfi = partial_values(&domain, f.component(i).values(), j);
            dfj.into_iter().zip(dfi).map(|(a, b)| a - b).collect()
        })
        .collect();
    SkewField::from_raw(domain, entries)
}

/// `jac[K][J][node] = ∂_K v_J`.
pub(crate) fn jacobian(v: &VectorField) -> Vec<Vec<Vec<f64>>> {
    let domain = v.domain();
    (0..domain.dim())
        .map(|axis| {
            v.components()
                .iter()
                .map(|c| partial_values(domain, c.values(), axis))
                .collect()
        })
        .collect()
}

/// `δ_K f = ∂_K f - ν_K ν_J ∂_J f`.
pub fn tangential_derivative(nu: &VectorField, f: &ScalarField) -> Result<VectorField> {
    ensure_same_domain(nu.domain(), f.domain())?;
    let grad = gradient(f);
    let domain = f.domain_arc().clone();
    let m = domain.dim();
    let normal_part = exec::map_nodes(domain.len(), |k| {
        (0..m)
            .map(|j| nu.component(j).values()[k] * grad.component(j).values()[k])
            .sum()
    });
    let components = (0..m)
        .map(|c| {
            let values = exec::map_nodes(domain.len(), |k| {
                grad.component(c).values()[k] - nu.component(c).values()[k] * normal_part[k]
            });
            ScalarField::from_raw(domain.clone(), values)
        })
        .collect();
    Ok(VectorField::from_components(components))
}

/// Per-node `(δ_I ν_J - δ_J ν_I) - (1/D)(h_IJ - ν_J ν_K h_IK - ν_I ν_K h_KJ)`.
///
/// `skip[k]` nodes are set to zero.
pub(crate) fn structure_residual_from_parts(
    nu: &VectorField,
    d: &[f64],
    h: &SkewField,
    skip: Option<&[bool]>,
) -> SkewField {
    let domain = nu.domain_arc().clone();
    let m = domain.dim();
    let jac = jacobian(nu);
    let pairs = pairs(m);
    SkewField::from_node_fn(domain, |k, out| {
        if skip.is_some_and(|s| s[k]) {
            out.fill(0.0);
            return;
        }
        let n: Vec<f64> = (0..m).map(|a| nu.component(a).values()[k]).collect();
        // (ν·∂) ν_J
        let along: Vec<f64> = (0..m)
            .map(|j| (0..m).map(|kk| n[kk] * jac[kk][j][k]).sum())
            .collect();
        // (hν)_I = h_IK ν_K
        let h_nu: Vec<f64> = (0..m)
            .map(|i| (0..m).map(|kk| h.get(i, kk, k) * n[kk]).sum())
            .collect();
        for (slot, &(i, j)) in out.iter_mut().zip(&pairs) {
            // δ_I ν_J - δ_J ν_I
            let lhs = (jac[i][j][k] - n[i] * along[j]) - (jac[j][i][k] - n[j] * along[i]);
            // ν_K h_KJ = -(hν)_J
            let rhs = (h.get(i, j, k) - n[j] * h_nu[i] + n[i] * h_nu[j]) / d[k];
            *slot = lhs - rhs;
        }
    })
}

/// Residual of the structure identity for the normal of `u`, zero on the
/// singular set.
pub fn structure_identity_residual(
    u: &ScalarField,
    f: &VectorField,
    tau: f64,
) -> Result<(SkewField, SingularMask)> {
    let d = weight(u, f)?;
    let (nu, mask) = horizontal_normal(u, f, tau)?;
    let h = curl_matrix(f);
    let res = structure_residual_from_parts(&nu, d.values(), &h, Some(mask.flags()));
    Ok((res, mask))
}

/// Size and thickness of a singular set.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SingularStats {
    /// Flagged nodes over all nodes.
    pub fraction: f64,
    /// Largest `r` such that some cube of half-width `r` nodes lies inside
    /// the grid and is entirely flagged; `0` when no such cube with `r ≥ 1`
    /// exists.
    pub radius: usize,
}

pub fn singular_stats(mask: &SingularMask) -> SingularStats {
    let domain = mask.domain();
    let n = domain.len();
    let fraction = mask.count() as f64 / n as f64;
    let mut current = mask.flags().to_vec();
    let mut radius = 0;
    loop {
        // erosion by the unit cube as a sequence of per-axis erosions
        for axis in 0..domain.dim() {
            let s = domain.stride(axis);
            let len = domain.counts()[axis];
            let prev = current.clone();
            current = (0..n)
                .map(|k| {
                    let i = domain.axis_index(k, axis);
                    prev[k] && i > 0 && i + 1 < len && prev[k - s] && prev[k + s]
                })
                .collect();
        }
        if !current.iter().any(|f| *f) {
            break;
        }
        radius += 1;
    }
    SingularStats { fraction, radius }
}
