//! Numerical laboratory for the generalized p-area functional
//!
//! ```text
//! F_H(u) = ∫_Ω |∇u + F| + H u
//! ```
//!
//! on node-centered rectangular grids in `R^m` (`2 ≤ m ≤ 6`). The crate
//! computes horizontal normals and singular sets, classifies the
//! integrability of the contact form `du + F_I dx^I`, reconstructs a
//! potential from a prescribed horizontal normal and weight, minimizes the
//! functional under Dirichlet data, and measures the hypotheses of the
//! uniqueness theorems (curl rank, nonintegrability, sign of `div F^b`).
//!
//! All fields are immutable values; per-node loops run on rayon when the
//! `parallel` feature is enabled (see [`exec`]).

pub mod error;
pub mod exec;
pub mod grid;
pub mod horizontal;
pub mod integrability;
pub mod reconstruction;
pub mod scenarios;
pub mod skew;
pub mod variational;

pub use error::{Error, Result};
pub use grid::{field_scale, GridDomain, ScalarField, VectorField};
pub use horizontal::{SingularMask, SkewField};
