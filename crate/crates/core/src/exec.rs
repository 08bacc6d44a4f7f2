//! Node-loop execution policy.
//!
//! Every per-node kernel in the crate goes through the helpers here. With the
//! `parallel` feature they run on the rayon pool unless sequential execution
//! has been requested with [`set_parallel`]; without it they are plain loops.
//!
//! Reductions are computed over fixed-size chunks whose partial sums are
//! combined in index order, so results are bit-identical between the two
//! modes and across thread counts.

use std::sync::atomic::{AtomicBool, Ordering};

const CHUNK: usize = 4096;

static PARALLEL: AtomicBool = AtomicBool::new(cfg!(feature = "parallel"));

/// Enables or disables parallel node loops. A no-op without the `parallel`
/// feature.
pub fn set_parallel(enabled: bool) {
    PARALLEL.store(enabled && cfg!(feature = "parallel"), Ordering::Relaxed);
}

pub fn is_parallel() -> bool {
    PARALLEL.load(Ordering::Relaxed)
}

/// `out[k] = f(k)` for `k in 0..n`.
pub fn map_nodes<F>(n: usize, f: F) -> Vec<f64>
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Generic variant of [`map_nodes`].
pub fn map_nodes_with<T, F>(n: usize, f: F) -> Vec<T>
where
    T: Send,
    F: Fn(usize) -> T + Sync + Send,
{
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        return (0..n).into_par_iter().map(f).collect();
    }
    (0..n).map(f).collect()
}

/// Fills `out` with `f(k, &mut out[k*width..(k+1)*width])`.
pub fn fill_rows<F>(out: &mut [f64], width: usize, f: F)
where
    F: Fn(usize, &mut [f64]) + Sync + Send,
{
    if width == 0 {
        return;
    }
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        out.par_chunks_mut(width)
            .enumerate()
            .for_each(|(k, row)| f(k, row));
        return;
    }
    out.chunks_mut(width).enumerate().for_each(|(k, row)| f(k, row));
}

/// Deterministic `Σ_k f(k)`.
pub fn sum_nodes<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let chunk_sum = |c: usize| {
        let end = ((c + 1) * CHUNK).min(n);
        (c * CHUNK..end).map(&f).sum::<f64>()
    };
    let chunks = n.div_ceil(CHUNK);
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        let parts: Vec<f64> = (0..chunks).into_par_iter().map(chunk_sum).collect();
        return parts.iter().sum();
    }
    (0..chunks).map(chunk_sum).sum()
}

/// `max(0, max_k f(k))`; meant for magnitudes. NaN is ignored.
pub fn max_nodes<F>(n: usize, f: F) -> f64
where
    F: Fn(usize) -> f64 + Sync + Send,
{
    let fold = |a: f64, b: f64| if b > a { b } else { a };
    #[cfg(feature = "parallel")]
    if is_parallel() {
        use rayon::prelude::*;
        // max is order-independent, no chunking needed
        return (0..n)
            .into_par_iter()
            .map(f)
            .reduce(|| 0.0_f64, fold);
    }
    (0..n).map(f).fold(0.0, fold)
}
