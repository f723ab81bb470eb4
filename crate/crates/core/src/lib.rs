//! Nonconforming finite elements with superconvergent flux recovery.
//!
//! The crate solves `-div(a grad u) + b . grad u + c u = f` with Dirichlet data
//! using the rotated bilinear (Rannacher-Turek) element on axis-aligned
//! rectangular and cubical meshes, and the Crouzeix-Raviart element on
//! uniform-parallel triangulations. On top of the discrete solution it builds
//! a corrected broken Raviart-Thomas flux and recovers a flux field by local
//! weighted averaging at facet midpoints.
//!
//! Module map:
//!
//! - [`mesh`]: tensor-product meshes (refinement, random gridline perturbation)
//!   and uniform-parallel triangulations.
//! - [`quadrature`]: 4-point Gauss rules, tensor products, a degree-5 triangle rule.
//! - [`elements`]: local dual bases and local Raviart-Thomas polynomials.
//! - [`assembly`]: global system assembly with Dirichlet lifting.
//! - [`sparse`]: CSR matrices, BiCGStab, restarted GMRES and dense LU.
//! - [`recovery`]: correction field, element projection, corrected flux,
//!   RT interpolation, midpoint averaging and the normal-jump check.
//! - [`cr`]: the triangular pipeline.
//! - [`problems`]: manufactured solutions.
//! - [`analysis`], [`study`], [`report`]: norms, order fits, the convergence
//!   driver and its output formats.

pub mod analysis;
pub mod assembly;
pub mod cr;
pub mod elements;
pub mod error;
pub mod mesh;
pub mod problems;
pub mod quadrature;
pub mod recovery;
pub mod report;
pub mod sparse;
pub mod study;

pub use error::{Error, Result};

/// A point in physical space. Two-dimensional code leaves the last entry at zero.
pub type Point = [f64; 3];

/// A vector value; unused trailing components are zero.
pub type Vector = [f64; 3];
