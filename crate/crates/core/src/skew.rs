//! Pointwise linear algebra of real skew-symmetric matrices.
//!
//! The eigenvalues of `S` come in pairs `±iλ_j`. The magnitudes `λ_j` are
//! the singular values of `S`, each appearing twice, and ranks are read off
//! those pairs, so they are even by construction. Directions come from the
//! eigenvectors of the symmetric matrix `-S²`.

use nalgebra::{DMatrix, SymmetricEigen};
use rand_distr::StandardNormal;

use crate::error::{Error, Result};

/// Default relative tolerance for numerical rank.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq)]
pub struct SkewMatrix {
    m: usize,
    upper: Vec<f64>,
}

impl SkewMatrix {
    /// `upper` lists entries `(i, j)`, `i < j`, in lexicographic order.
    pub fn from_upper(m: usize, upper: Vec<f64>) -> Result<Self> {
        if m == 0 {
            return Err(Error::InvalidArgument("empty matrix".into()));
        }
        let expected = m * (m - 1) / 2;
        if upper.len() != expected {
            return Err(Error::Length {
                expected,
                got: upper.len(),
            });
        }
        Ok(SkewMatrix { m, upper })
    }

    pub fn zeros(m: usize) -> Self {
        SkewMatrix {
            m,
            upper: vec![0.0; m * (m - 1) / 2],
        }
    }

    /// Skew part `(A - Aᵀ)/2` of a square matrix.
    pub fn from_dense_skew_part(a: &DMatrix<f64>) -> Result<Self> {
        if !a.is_square() {
            return Err(Error::InvalidArgument("matrix is not square".into()));
        }
        let m = a.nrows();
        let upper = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .map(|(i, j)| 0.5 * (a[(i, j)] - a[(j, i)]))
            .collect();
        SkewMatrix::from_upper(m, upper)
    }

    /// `a bᵀ - b aᵀ`, a matrix of rank at most two.
    pub fn wedge(a: &[f64], b: &[f64]) -> Result<Self> {
        if a.len() != b.len() {
            return Err(Error::InvalidArgument("wedge of vectors of different length".into()));
        }
        let m = a.len();
        let upper = (0..m)
            .flat_map(|i| (i + 1..m).map(move |j| (i, j)))
            .map(|(i, j)| a[i] * b[j] - b[i] * a[j])
            .collect();
        SkewMatrix::from_upper(m, upper)
    }

    /// Block diagonal matrix with 2×2 blocks `[[0, c], [-c, 0]]`.
    pub fn block_diagonal(blocks: &[f64]) -> Self {
        let m = 2 * blocks.len();
        let mut s = SkewMatrix::zeros(m);
        for (b, &c) in blocks.iter().enumerate() {
            s.set(2 * b, 2 * b + 1, c);
        }
        s
    }

    pub fn dim(&self) -> usize {
        self.m
    }

    pub fn upper(&self) -> &[f64] {
        &self.upper
    }

    fn index(&self, i: usize, j: usize) -> usize {
        i * (2 * self.m - i - 1) / 2 + (j - i - 1)
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        use std::cmp::Ordering::*;
        match i.cmp(&j) {
            Less => self.upper[self.index(i, j)],
            Greater => -self.upper[self.index(j, i)],
            Equal => 0.0,
        }
    }

    /// Sets `(i, j)` and implicitly `(j, i)`; `i < j` required.
    pub fn set(&mut self, i: usize, j: usize, v: f64) {
        assert!(i < j && j < self.m, "set({i}, {j}) outside the strict upper triangle");
        let idx = self.index(i, j);
        self.upper[idx] = v;
    }

    pub fn to_dense(&self) -> DMatrix<f64> {
        DMatrix::from_fn(self.m, self.m, |i, j| self.get(i, j))
    }

    pub fn frobenius_norm(&self) -> f64 {
        (2.0 * self.upper.iter().map(|v| v * v).sum::<f64>()).sqrt()
    }

    /// `Tr(S²) = -‖S‖_F²`.
    pub fn trace_of_square(&self) -> f64 {
        -2.0 * self.upper.iter().map(|v| v * v).sum::<f64>()
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        (0..self.m)
            .map(|i| (0..self.m).map(|j| self.get(i, j) * v[j]).sum())
            .collect()
    }

    /// Eigenvalues of `-S²` in descending order, clamped at zero, with
    /// the matching eigenvectors as columns.
    fn neg_square_eigen(&self) -> (Vec<f64>, DMatrix<f64>) {
        let s = self.to_dense();
        let mut n = -(&s * &s);
        // symmetrize round-off
        n = (&n + n.transpose()) * 0.5;
        let eig = SymmetricEigen::new(n);
        let mut order: Vec<usize> = (0..self.m).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let values = order.iter().map(|&i| eig.eigenvalues[i].max(0.0)).collect();
        let vectors = DMatrix::from_fn(self.m, self.m, |r, c| eig.eigenvectors[(r, order[c])]);
        (values, vectors)
    }

    /// All `⌊m/2⌋` pair magnitudes `λ_j ≥ 0`, descending, zeros included.
    ///
    /// Read off the singular values, which carry each `λ_j` twice and are
    /// accurate to `ε‖S‖`; square roots of the eigenvalues of `-S²` only
    /// resolve `λ_j` to `sqrt(ε)‖S‖`.
    pub fn pair_magnitudes(&self) -> Vec<f64> {
        let mut sv: Vec<f64> = self.to_dense().singular_values().iter().copied().collect();
        sv.sort_by(|a, b| b.total_cmp(a));
        sv.chunks_exact(2).map(|p| 0.5 * (p[0] + p[1])).collect()
    }
}

/// Numerical rank: twice the number of pairs with `λ_j > tol · λ_max`.
pub fn skew_rank(s: &SkewMatrix, tol: f64) -> usize {
    rank_with_floor(s, tol, 0.0)
}

/// Like [`skew_rank`] but pairs must also exceed the absolute `floor`.
pub fn rank_with_floor(s: &SkewMatrix, tol: f64, floor: f64) -> usize {
    let pairs = s.pair_magnitudes();
    let top = pairs.first().copied().unwrap_or(0.0);
    if top == 0.0 {
        return 0;
    }
    let cut = (tol * top).max(floor);
    2 * pairs.iter().filter(|&&l| l > cut).count()
}

/// Positive imaginary parts `λ_j` of the nonzero eigenvalue pairs `±iλ_j`,
/// descending, repeated by multiplicity.
pub fn spectral_pairs(s: &SkewMatrix) -> Vec<f64> {
    let pairs = s.pair_magnitudes();
    let top = pairs.first().copied().unwrap_or(0.0);
    pairs
        .into_iter()
        .filter(|&l| top > 0.0 && l > DEFAULT_RANK_TOL * top)
        .collect()
}

/// `S - S ν νᵀ - ν νᵀ S`, itself skew-symmetric.
pub fn projection_residual(s: &SkewMatrix, nu: &[f64]) -> Result<SkewMatrix> {
    if nu.len() != s.dim() {
        return Err(Error::Length {
            expected: s.dim(),
            got: nu.len(),
        });
    }
    let s_nu = s.apply(nu);
    let m = s.dim();
    let mut out = s.clone();
    for i in 0..m {
        for j in i + 1..m {
            // (Sν νᵀ)_ij = (Sν)_i ν_j, (ν νᵀ S)_ij = ν_i (νᵀS)_j = -ν_i (Sν)_j
            out.set(i, j, s.get(i, j) - s_nu[i] * nu[j] + nu[i] * s_nu[j]);
        }
    }
    Ok(out)
}

/// `S = λ (ν_⊥ νᵀ - ν ν_⊥ᵀ)` with `ν_⊥ = Sν / ‖Sν‖` and `λ = ‖Sν‖`.
#[derive(Debug, Clone, PartialEq)]
pub struct Rank2Factorization {
    pub nu: Vec<f64>,
    pub nu_perp: Vec<f64>,
    pub lambda: f64,
}

impl Rank2Factorization {
    pub fn reconstruct(&self) -> Result<SkewMatrix> {
        let scaled: Vec<f64> = self.nu_perp.iter().map(|v| v * self.lambda).collect();
        SkewMatrix::wedge(&scaled, &self.nu)
    }
}

pub fn rank2_factorize(s: &SkewMatrix, tol: f64) -> Result<Rank2Factorization> {
    let rank = skew_rank(s, tol);
    if rank != 2 {
        return Err(Error::Rank {
            expected: 2,
            found: rank,
        });
    }
    let (_, vectors) = s.neg_square_eigen();
    let nu: Vec<f64> = vectors.column(0).iter().copied().collect();
    let nrm = nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nu: Vec<f64> = nu.iter().map(|v| v / nrm).collect();
    let s_nu = s.apply(&nu);
    let lambda = s_nu.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nu_perp = s_nu.iter().map(|v| v / lambda).collect();
    Ok(Rank2Factorization {
        nu,
        nu_perp,
        lambda,
    })
}

/// Measured quantities for the rank-two structure of `U` seen from `ν`.
#[derive(Debug, Clone, PartialEq)]
pub struct NormalPairReport {
    /// `ρ = -‖U²ν‖² / ‖Uν‖²`.
    pub rho: f64,
    pub u2nu_norm: f64,
    /// max of the cosines `⟨ν, Uν⟩` and `⟨Uν, U²ν⟩`.
    pub orthogonality: f64,
    /// `‖U - P U‖_F / ‖U‖_F` with `P` the projector onto `span{Uν, U²ν}`.
    pub span_residual: f64,
    /// max relative error of `U²(Uν) = ρ Uν` and `U²(U²ν) = ρ U²ν`.
    pub eigen_residual: f64,
}

impl NormalPairReport {
    pub fn passes(&self) -> bool {
        self.u2nu_norm > 0.0
            && self.orthogonality <= 1e-10
            && self.span_residual <= 1e-9
            && self.eigen_residual <= 1e-9
    }
}

fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn normal_pair_audit(u: &SkewMatrix, nu: &[f64], tol: f64) -> Result<NormalPairReport> {
    if nu.len() != u.dim() {
        return Err(Error::Length {
            expected: u.dim(),
            got: nu.len(),
        });
    }
    let rank = skew_rank(u, tol);
    if rank != 2 {
        return Err(Error::Rank {
            expected: 2,
            found: rank,
        });
    }
    let un = u.apply(nu);
    let scale = u.frobenius_norm() * norm(nu);
    if norm(&un) <= tol * scale {
        return Err(Error::Precondition(format!(
            "‖Uν‖ = {:.3e} is below tolerance; ν lies in the kernel",
            norm(&un)
        )));
    }
    let u2n = u.apply(&un);
    let u3n = u.apply(&u2n);
    let u4n = u.apply(&u3n);
    let (n1, n2) = (norm(&un), norm(&u2n));
    let rho = -(n2 * n2) / (n1 * n1);

    let orthogonality = (dot(nu, &un).abs() / (norm(nu) * n1))
        .max(if n2 > 0.0 { dot(&un, &u2n).abs() / (n1 * n2) } else { 0.0 });

    // U²(Uν) = ρ Uν and U²(U²ν) = ρ U²ν
    let rel = |lhs: &[f64], rhs: &[f64]| {
        let diff: Vec<f64> = lhs.iter().zip(rhs).map(|(a, b)| a - rho * b).collect();
        norm(&diff) / (rho.abs() * norm(rhs)).max(f64::MIN_POSITIVE)
    };
    let eigen_residual = rel(&u3n, &un).max(rel(&u4n, &u2n));

    // orthonormal basis of span{Uν, U²ν}
    let e1: Vec<f64> = un.iter().map(|v| v / n1).collect();
    let mut e2: Vec<f64> = u2n.iter().zip(&e1).map(|(a, b)| a - dot(&u2n, &e1) * b).collect();
    let n_e2 = norm(&e2);
    let span_residual = if n_e2 > 0.0 {
        e2.iter_mut().for_each(|v| *v /= n_e2);
        let dense = u.to_dense();
        let mut resid = 0.0;
        for c in 0..u.dim() {
            let col: Vec<f64> = dense.column(c).iter().copied().collect();
            let (a, b) = (dot(&col, &e1), dot(&col, &e2));
            resid += col
                .iter()
                .enumerate()
                .map(|(i, v)| (v - a * e1[i] - b * e2[i]).powi(2))
                .sum::<f64>();
        }
        resid.sqrt() / u.frobenius_norm()
    } else {
        f64::INFINITY
    };

    Ok(NormalPairReport {
        rho,
        u2nu_norm: n2,
        orthogonality,
        span_residual,
        eigen_residual,
    })
}

/// Minimum of `‖projection_residual(S, ν)‖_F` over random unit `ν`.
pub fn min_projection_residual<R: rand::Rng>(s: &SkewMatrix, probes: usize, rng: &mut R) -> f64 {
    let m = s.dim();
    let mut best = f64::INFINITY;
    for _ in 0..probes {
        let nu = random_unit(m, rng);
        let r = projection_residual(s, &nu).expect("dimension matches").frobenius_norm();
        best = best.min(r);
    }
    best
}

/// Uniform random unit vector (normalized Gaussian).
pub fn random_unit<R: rand::Rng>(m: usize, rng: &mut R) -> Vec<f64> {
    loop {
        let v: Vec<f64> = (0..m).map(|_| rng.sample(StandardNormal)).collect();
        let n = norm(&v);
        if n > 1e-8 {
            return v.into_iter().map(|x| x / n).collect();
        }
    }
}
