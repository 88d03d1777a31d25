//! Shared setup helpers for the criterion benchmarks.

use std::sync::Arc;

use mfelast::basis::QuadRule1D;
use mfelast::material::{MaterialField, VoigtMaterial};
use mfelast::mesh::CartesianMesh;
use mfelast::operators::{ElasticOperator, PaStage, Variant};
use mfelast::space::FESpace;

/// Mesh with roughly `target_dofs` vector DOFs at order `p`.
pub fn bench_space(p: usize, target_dofs: usize) -> Arc<FESpace> {
    let cells = mfelast::harness::cells_for_budget(p, target_dofs).max(1);
    let mesh = Arc::new(CartesianMesh::unit_cube(cells).unwrap());
    Arc::new(FESpace::new(mesh, p).unwrap())
}

pub fn build_variant(space: &Arc<FESpace>, variant: Variant, stage: PaStage) -> ElasticOperator {
    let rule = QuadRule1D::gauss_legendre(space.order() + 1).unwrap();
    let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
    match variant {
        Variant::Fa => ElasticOperator::fa(space.clone(), mat, &rule).unwrap(),
        Variant::Pa => ElasticOperator::pa(space.clone(), mat, &rule, stage).unwrap(),
        Variant::Paop => ElasticOperator::paop(space.clone(), mat, &rule).unwrap(),
    }
}
