use crate::error::{Error, Result};

pub const MIN_DIM: usize = 2;
pub const MAX_DIM: usize = 6;
pub const MIN_NODES: usize = 5;

/// Node-centered rectangular grid on a box in `R^m`.
///
/// Nodes include the box faces. Flat node order has the last axis varying
/// fastest.
#[derive(Debug, Clone, PartialEq)]
pub struct GridDomain {
    lower: Vec<f64>,
    upper: Vec<f64>,
    counts: Vec<usize>,
    spacing: Vec<f64>,
    strides: Vec<usize>,
    len: usize,
}

impl GridDomain {
    pub fn new(lower: &[f64], upper: &[f64], counts: &[usize]) -> Result<Self> {
        let m = lower.len();
        if !(MIN_DIM..=MAX_DIM).contains(&m) {
            return Err(Error::Dimension(m));
        }
        if upper.len() != m || counts.len() != m {
            return Err(Error::InvalidArgument(format!(
                "lower/upper/counts lengths {}/{}/{} disagree",
                m,
                upper.len(),
                counts.len()
            )));
        }
        for axis in 0..m {
            if counts[axis] < MIN_NODES {
                return Err(Error::TooFewNodes {
                    axis,
                    count: counts[axis],
                });
            }
            let (lo, hi) = (lower[axis], upper[axis]);
            if !(lo.is_finite() && hi.is_finite() && hi > lo) {
                return Err(Error::DegenerateBox {
                    axis,
                    lower: lo,
                    upper: hi,
                });
            }
        }
        let spacing: Vec<f64> = (0..m)
            .map(|a| (upper[a] - lower[a]) / (counts[a] - 1) as f64)
            .collect();
        if let Some(axis) = spacing.iter().position(|h| !(*h > 0.0)) {
            return Err(Error::DegenerateBox {
                axis,
                lower: lower[axis],
                upper: upper[axis],
            });
        }
        let mut strides = vec![1; m];
        for a in (0..m - 1).rev() {
            strides[a] = strides[a + 1] * counts[a + 1];
        }
        let len = strides[0] * counts[0];
        Ok(GridDomain {
            lower: lower.to_vec(),
            upper: upper.to_vec(),
            counts: counts.to_vec(),
            spacing,
            strides,
            len,
        })
    }

    /// Same box and resolution on every axis.
    pub fn cube(m: usize, lower: f64, upper: f64, count: usize) -> Result<Self> {
        GridDomain::new(&vec![lower; m], &vec![upper; m], &vec![count; m])
    }

    /// Same box with new per-axis node counts.
    pub fn with_counts(&self, counts: &[usize]) -> Result<Self> {
        GridDomain::new(&self.lower, &self.upper, counts)
    }

    pub fn dim(&self) -> usize {
        self.lower.len()
    }

    /// Total number of nodes.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn lower(&self) -> &[f64] {
        &self.lower
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn spacing(&self) -> &[f64] {
        &self.spacing
    }

    /// Flat-index distance between neighbours along `axis`.
    pub fn stride(&self, axis: usize) -> usize {
        self.strides[axis]
    }

    /// Position of node `k` along `axis`.
    #[inline]
    pub fn axis_index(&self, k: usize, axis: usize) -> usize {
        (k / self.strides[axis]) % self.counts[axis]
    }

    pub fn multi_index(&self, k: usize) -> Vec<usize> {
        (0..self.dim()).map(|a| self.axis_index(k, a)).collect()
    }

    pub fn flat_index(&self, idx: &[usize]) -> usize {
        idx.iter().zip(&self.strides).map(|(i, s)| i * s).sum()
    }

    #[inline]
    pub fn coord(&self, k: usize, axis: usize) -> f64 {
        self.lower[axis] + self.axis_index(k, axis) as f64 * self.spacing[axis]
    }

    pub fn coords(&self, k: usize) -> Vec<f64> {
        (0..self.dim()).map(|a| self.coord(k, a)).collect()
    }

    pub fn coords_into(&self, k: usize, out: &mut [f64]) {
        for (a, x) in out.iter_mut().enumerate() {
            *x = self.coord(k, a);
        }
    }

    pub fn is_boundary(&self, k: usize) -> bool {
        (0..self.dim()).any(|a| {
            let i = self.axis_index(k, a);
            i == 0 || i + 1 == self.counts[a]
        })
    }

    /// Tensor-product trapezoid weight of node `k`.
    pub fn quadrature_weight(&self, k: usize) -> f64 {
        (0..self.dim())
            .map(|a| {
                let i = self.axis_index(k, a);
                if i == 0 || i + 1 == self.counts[a] {
                    0.5 * self.spacing[a]
                } else {
                    self.spacing[a]
                }
            })
            .product()
    }

    pub fn volume(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| hi - lo)
            .product()
    }

    pub fn diameter(&self) -> f64 {
        self.lower
            .iter()
            .zip(&self.upper)
            .map(|(lo, hi)| (hi - lo) * (hi - lo))
            .sum::<f64>()
            .sqrt()
    }

    /// Node with every coordinate at the lower corner (flat index 0).
    pub fn lowest_corner(&self) -> usize {
        0
    }

    /// Node nearest to the point `x`, clamped to the box.
    pub fn nearest_node(&self, x: &[f64]) -> usize {
        let idx: Vec<usize> = (0..self.dim())
            .map(|a| {
                let t = ((x[a] - self.lower[a]) / self.spacing[a]).round();
                t.clamp(0.0, (self.counts[a] - 1) as f64) as usize
            })
            .collect();
        self.flat_index(&idx)
    }
}
