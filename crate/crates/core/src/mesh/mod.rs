//! Tensor-product meshes and uniform-parallel triangulations.
//!
//! Meshes are immutable once built; refinement and perturbation return new meshes.

mod tensor;
mod tri;

pub use tensor::{Cell, Facet, TensorMesh, DEFAULT_NONDEGENERACY};
pub use tri::{TriEdge, TriMesh};
