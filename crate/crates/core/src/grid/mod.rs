//! Grid domains, sampled fields, finite-difference calculus, quadrature and
//! the `.pfld` file format.

pub mod calculus;
mod domain;
mod field;
pub mod io;

pub use calculus::{divergence, gradient, integrate, partial};
pub use domain::{GridDomain, MAX_DIM, MIN_DIM, MIN_NODES};
pub use field::{field_scale, ScalarField, VectorField};
pub(crate) use field::ensure_same_domain;
