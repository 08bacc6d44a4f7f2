use std::sync::Arc;

use crate::error::{Error, Result};
use crate::exec;

use super::GridDomain;

/// `max(1, max |v|)`; the reference magnitude for every relative tolerance.
pub fn field_scale(values: &[f64]) -> f64 {
    values.iter().fold(1.0_f64, |acc, v| acc.max(v.abs()))
}

/// Real function sampled at every node of a [`GridDomain`].
#[derive(Debug, Clone)]
pub struct ScalarField {
    domain: Arc<GridDomain>,
    values: Vec<f64>,
}

impl ScalarField {
    pub fn new(domain: Arc<GridDomain>, values: Vec<f64>) -> Result<Self> {
        if values.len() != domain.len() {
            return Err(Error::Length {
                expected: domain.len(),
                got: values.len(),
            });
        }
        if let Some(node) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite { node });
        }
        Ok(ScalarField { domain, values })
    }

    /// Skips the finiteness scan; only for values produced by the crate's
    /// own kernels from finite inputs.
    pub(crate) fn from_raw(domain: Arc<GridDomain>, values: Vec<f64>) -> Self {
        debug_assert_eq!(values.len(), domain.len());
        ScalarField { domain, values }
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let n = domain.len();
        ScalarField::from_raw(domain, vec![0.0; n])
    }

    pub fn constant(domain: Arc<GridDomain>, c: f64) -> Self {
        let n = domain.len();
        ScalarField::from_raw(domain, vec![c; n])
    }

    /// `values[k] = f(coordinates of node k)`.
    pub fn sample<F>(domain: Arc<GridDomain>, f: F) -> Result<Self>
    where
        F: Fn(&[f64]) -> f64 + Sync + Send,
    {
        let d = domain.clone();
        let values = exec::map_nodes(domain.len(), |k| f(&d.coords(k)));
        ScalarField::new(domain, values)
    }

    pub fn domain(&self) -> &GridDomain {
        &self.domain
    }

    pub fn domain_arc(&self) -> &Arc<GridDomain> {
        &self.domain
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn into_values(self) -> Vec<f64> {
        self.values
    }

    pub fn get(&self, k: usize) -> f64 {
        self.values[k]
    }

    pub fn scale(&self) -> f64 {
        field_scale(&self.values)
    }

    pub fn max_abs(&self) -> f64 {
        exec::max_nodes(self.values.len(), |k| self.values[k].abs())
    }

    /// Pointwise `f(self[k])`.
    pub fn map<F>(&self, f: F) -> ScalarField
    where
        F: Fn(f64) -> f64 + Sync + Send,
    {
        let values = exec::map_nodes(self.values.len(), |k| f(self.values[k]));
        ScalarField::from_raw(self.domain.clone(), values)
    }

    /// Pointwise `f(self[k], other[k])`.
    pub fn zip_map<F>(&self, other: &ScalarField, f: F) -> Result<ScalarField>
    where
        F: Fn(f64, f64) -> f64 + Sync + Send,
    {
        ensure_same_domain(self.domain(), other.domain())?;
        let values = exec::map_nodes(self.values.len(), |k| f(self.values[k], other.values[k]));
        Ok(ScalarField::from_raw(self.domain.clone(), values))
    }

    pub fn add(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn mul(&self, other: &ScalarField) -> Result<ScalarField> {
        self.zip_map(other, |a, b| a * b)
    }

    pub fn scaled(&self, c: f64) -> ScalarField {
        self.map(|a| c * a)
    }

    pub fn shifted(&self, c: f64) -> ScalarField {
        self.map(|a| a + c)
    }
}

impl PartialEq for ScalarField {
    fn eq(&self, other: &Self) -> bool {
        self.domain == other.domain && self.values == other.values
    }
}

/// `m` scalar components on one domain.
#[derive(Debug, Clone, PartialEq)]
pub struct VectorField {
    components: Vec<ScalarField>,
}

impl VectorField {
    pub fn new(components: Vec<ScalarField>) -> Result<Self> {
        let Some(first) = components.first() else {
            return Err(Error::InvalidArgument("vector field without components".into()));
        };
        let domain = first.domain();
        if components.len() != domain.dim() {
            return Err(Error::Length {
                expected: domain.dim(),
                got: components.len(),
            });
        }
        for c in &components[1..] {
            ensure_same_domain(domain, c.domain())?;
        }
        Ok(VectorField { components })
    }

    pub(crate) fn from_components(components: Vec<ScalarField>) -> Self {
        debug_assert!(!components.is_empty());
        VectorField { components }
    }

    /// Builds components from flat per-component value vectors.
    pub(crate) fn from_raw(domain: Arc<GridDomain>, blocks: Vec<Vec<f64>>) -> Self {
        VectorField {
            components: blocks
                .into_iter()
                .map(|v| ScalarField::from_raw(domain.clone(), v))
                .collect(),
        }
    }

    pub fn zeros(domain: Arc<GridDomain>) -> Self {
        let m = domain.dim();
        VectorField::from_raw(domain.clone(), vec![vec![0.0; domain.len()]; m])
    }

    /// Same vector `c` at every node.
    pub fn constant(domain: Arc<GridDomain>, c: &[f64]) -> Result<Self> {
        if c.len() != domain.dim() {
            return Err(Error::Length {
                expected: domain.dim(),
                got: c.len(),
            });
        }
        let n = domain.len();
        Ok(VectorField::from_raw(
            domain,
            c.iter().map(|&ci| vec![ci; n]).collect(),
        ))
    }

    /// Samples `f(x, out)`, which writes the `m` components at `x` into `out`.
    pub fn sample<F>(domain: Arc<GridDomain>, f: F) -> Result<Self>
    where
        F: Fn(&[f64], &mut [f64]) + Sync + Send,
    {
        let m = domain.dim();
        let n = domain.len();
        let mut rows = vec![0.0; n * m];
        let d = domain.clone();
        exec::fill_rows(&mut rows, m, |k, row| f(&d.coords(k), row));
        let blocks = (0..m)
            .map(|c| (0..n).map(|k| rows[k * m + c]).collect())
            .collect::<Vec<Vec<f64>>>();
        let components = blocks
            .into_iter()
            .map(|v| ScalarField::new(domain.clone(), v))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField { components })
    }

    pub fn domain(&self) -> &GridDomain {
        self.components[0].domain()
    }

    pub fn domain_arc(&self) -> &Arc<GridDomain> {
        self.components[0].domain_arc()
    }

    pub fn dim(&self) -> usize {
        self.components.len()
    }

    pub fn components(&self) -> &[ScalarField] {
        &self.components
    }

    pub fn component(&self, i: usize) -> &ScalarField {
        &self.components[i]
    }

    pub fn into_components(self) -> Vec<ScalarField> {
        self.components
    }

    /// Component values at node `k`.
    pub fn at(&self, k: usize) -> Vec<f64> {
        self.components.iter().map(|c| c.values[k]).collect()
    }

    pub fn at_into(&self, k: usize, out: &mut [f64]) {
        for (o, c) in out.iter_mut().zip(&self.components) {
            *o = c.values[k];
        }
    }

    /// Euclidean norm at every node.
    pub fn norm(&self) -> ScalarField {
        let values = exec::map_nodes(self.domain().len(), |k| {
            self.components
                .iter()
                .map(|c| c.values[k] * c.values[k])
                .sum::<f64>()
                .sqrt()
        });
        ScalarField::from_raw(self.domain_arc().clone(), values)
    }

    /// `max(1, max over nodes and components of |v|)`.
    pub fn scale(&self) -> f64 {
        self.components
            .iter()
            .map(ScalarField::scale)
            .fold(1.0, f64::max)
    }

    pub fn zip_map<F>(&self, other: &VectorField, f: F) -> Result<VectorField>
    where
        F: Fn(f64, f64) -> f64 + Sync + Send + Copy,
    {
        ensure_same_domain(self.domain(), other.domain())?;
        let components = self
            .components
            .iter()
            .zip(&other.components)
            .map(|(a, b)| a.zip_map(b, f))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField { components })
    }

    pub fn add(&self, other: &VectorField) -> Result<VectorField> {
        self.zip_map(other, |a, b| a + b)
    }

    pub fn sub(&self, other: &VectorField) -> Result<VectorField> {
        self.zip_map(other, |a, b| a - b)
    }

    pub fn scaled(&self, c: f64) -> VectorField {
        VectorField {
            components: self.components.iter().map(|f| f.scaled(c)).collect(),
        }
    }

    /// Pointwise inner product.
    pub fn dot(&self, other: &VectorField) -> Result<ScalarField> {
        ensure_same_domain(self.domain(), other.domain())?;
        let values = exec::map_nodes(self.domain().len(), |k| {
            self.components
                .iter()
                .zip(&other.components)
                .map(|(a, b)| a.values[k] * b.values[k])
                .sum()
        });
        Ok(ScalarField::from_raw(self.domain_arc().clone(), values))
    }

    /// Pointwise `s[k] * v[k]`.
    pub fn scale_by(&self, s: &ScalarField) -> Result<VectorField> {
        let components = self
            .components
            .iter()
            .map(|c| c.mul(s))
            .collect::<Result<Vec<_>>>()?;
        Ok(VectorField { components })
    }
}

pub(crate) fn ensure_same_domain(a: &GridDomain, b: &GridDomain) -> Result<()> {
    if std::ptr::eq(a, b) || a == b {
        Ok(())
    } else {
        Err(Error::DomainMismatch)
    }
}
