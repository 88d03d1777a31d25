//! High-order finite elements for 3D linear elasticity on structured
//! hexahedral meshes, with three interchangeable operator strategies
//! (full assembly, baseline partial assembly, and a sum-factorized fused
//! kernel) inside a geometric-multigrid-preconditioned CG solver.

pub mod basis;
pub mod error;
pub mod harness;
pub mod material;
pub mod mesh;
pub mod operators;
pub mod output;
pub mod solvers;
pub mod space;
pub mod verify;

pub use basis::{Basis1D, QuadRule1D};
pub use error::Error;
pub use material::{MaterialField, VoigtMaterial};
pub use mesh::{BoundaryFace, CartesianMesh};
pub use operators::{ElasticOperator, LinearOp, Variant};
pub use space::{BcConstraint, FESpace, Prolongation};

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;
