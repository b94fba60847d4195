//! Finite-element solver for the surface quasi-geostrophic (SQG) equations
//! on the periodic torus `(0, 2π)²`.
//!
//! The buoyancy is transported by a velocity recovered through a
//! sinc-quadrature inverse half Laplacian, and advanced with SSP-RK3 using a
//! maximum-principle-preserving low-order scheme, an entropy-viscosity
//! high-order scheme, and flux-corrected transport between them.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]
#![allow(clippy::needless_range_loop)]

pub mod assembly;
pub mod diagnostics;
pub mod error;
pub mod fourier;
pub mod fractional;
pub mod linsolve;
pub mod mesh;
pub mod oracle;
pub mod par;
pub mod scenarios;
pub mod sparse;
pub mod system;
pub mod transport;
pub mod velocity;

pub use assembly::{FemOperators, ScalarField, VectorField2};
pub use error::{Result, SqgError};
pub use fractional::{FracPower, SincQuadrature};
pub use mesh::TorusMesh;
pub use sparse::SparseOperator;
pub use system::{FemSystem, MassKind, SolverKind};
pub use velocity::VelocityMode;
