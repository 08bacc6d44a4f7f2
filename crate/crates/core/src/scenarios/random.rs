//! Seeded smooth random fields: truncated trigonometric series
//!
//! ```text
//! f(x) = Σ_{k ∈ {0..band}^m} (a_k cos(π k·t) + b_k sin(π k·t)) / (1 + |k|²)
//! ```
//!
//! with `t` the coordinates rescaled to `[0, 1]^m` and `a_k, b_k` uniform in
//! `[-1, 1]` from a ChaCha8 stream.

use std::f64::consts::PI;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::Result;
use crate::exec;
use crate::grid::{GridDomain, ScalarField, VectorField};

struct Series {
    freqs: Vec<Vec<f64>>,
    cos: Vec<f64>,
    sin: Vec<f64>,
}

fn frequencies(m: usize, band: usize) -> Vec<Vec<f64>> {
    let per = band + 1;
    let total = per.pow(m as u32);
    (0..total)
        .map(|mut idx| {
            let mut k = vec![0.0; m];
            for slot in k.iter_mut().rev() {
                *slot = (idx % per) as f64;
                idx /= per;
            }
            k
        })
        .collect()
}

impl Series {
    fn draw(m: usize, band: usize, rng: &mut ChaCha8Rng) -> Self {
        let freqs = frequencies(m, band);
        let mut cos = Vec::with_capacity(freqs.len());
        let mut sin = Vec::with_capacity(freqs.len());
        for k in &freqs {
            let damp = 1.0 / (1.0 + k.iter().map(|v| v * v).sum::<f64>());
            cos.push(rng.random_range(-1.0..=1.0) * damp);
            sin.push(rng.random_range(-1.0..=1.0) * damp);
        }
        Self { freqs, cos, sin }
    }

    fn eval(&self, t: &[f64]) -> f64 {
        let mut acc = 0.0;
        for ((k, c), s) in self.freqs.iter().zip(&self.cos).zip(&self.sin) {
            let phase = PI * k.iter().zip(t).map(|(a, b)| a * b).sum::<f64>();
            acc += c * phase.cos() + s * phase.sin();
        }
        acc
    }
}

fn sample_series(domain: &Arc<GridDomain>, series: &Series) -> Vec<f64> {
    let m = domain.dim();
    exec::map_nodes(domain.len(), |k| {
        let mut t = vec![0.0; m];
        for (a, slot) in t.iter_mut().enumerate() {
            let (lo, hi) = (domain.lower()[a], domain.upper()[a]);
            *slot = (domain.coord(k, a) - lo) / (hi - lo);
        }
        series.eval(&t)
    })
}

/// Scalar field from the seeded series; `band = 0` gives a constant.
pub fn random_smooth_scalar(domain: Arc<GridDomain>, seed: u64, band: usize) -> Result<ScalarField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let series = Series::draw(domain.dim(), band, &mut rng);
    let values = sample_series(&domain, &series);
    ScalarField::new(domain, values)
}

/// Vector field whose components are consecutive draws from one stream.
pub fn random_smooth_field(domain: Arc<GridDomain>, seed: u64, band: usize) -> Result<VectorField> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let m = domain.dim();
    let components = (0..m)
        .map(|_| {
            let series = Series::draw(m, band, &mut rng);
            ScalarField::new(domain.clone(), sample_series(&domain, &series))
        })
        .collect::<Result<Vec<_>>>()?;
    VectorField::new(components)
}
