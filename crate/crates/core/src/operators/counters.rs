//! Analytic FLOP and main-memory traffic model for one operator
//! application.
//!
//! Flops are counted at fused multiply-add granularity (2 flops each).
//! The byte model is ideal streaming, not a cache simulation: each global
//! array is charged once per streaming pass at 8 bytes per value, and
//! tables re-read inside the element loop (the dense gradient table, the
//! 1D basis tables, geometry) are charged once per element per kernel
//! pass. Input and output vectors are charged one pass each.

use crate::material::MaterialField;

/// Per-point flop constants shared by the kernels.
/// Physical gradient from reference gradient, 27 FMA.
const PHYS_GRAD: u64 = 54;
/// Voigt strain from a gradient (3 shear sums, add + half-scale each).
const STRAIN: u64 = 6;
/// Full-tensor isotropic stress (Eq.-of-state route).
const STRESS_ISO_FULL: u64 = 13;
/// Full-tensor anisotropic stress, 81 FMA over the 3x3x3x3 contraction.
const STRESS_ANISO_FULL: u64 = 162;
/// w det J and the 3x3 transform plus scaling of the full tensor.
const TRANSFORM_FULL: u64 = 1 + 54 + 9;
/// w det J and scaling the 6 Voigt components.
const SCALE_VOIGT: u64 = 1 + 6;
/// Expanding a stored Voigt stress against Jinv in the output stage.
const EXPAND_VOIGT: u64 = 54;

/// FMA count of one sum-factorized gradient (or its transpose) for one
/// scalar component: all three directions by staged 1D contractions.
pub fn sumfac_grad_fmas(n: u64, q: u64) -> u64 {
    2 * q * n * n * n + 3 * q * q * n * n + 3 * q * q * q * n
}

/// Flops of one application, per element, for each kernel organization.
/// `n = p + 1`, `q` = quadrature points per direction.
pub fn flops_per_element_baseline(n: u64, q: u64, mat: &MaterialField) -> u64 {
    let q3 = q * q * q;
    let stress = match mat.max_stress_flops() {
        x if x <= crate::material::ISO_STRESS_FLOPS => STRESS_ISO_FULL,
        _ => STRESS_ANISO_FULL,
    };
    // kernel 1: dense-table gradients + pointwise stress and transform
    // kernel 2: dense-table contraction (2 * 3 n^3 * 3 q^3 flops, the
    // defining count of the baseline output stage)
    18 * q3 * n * n * n
        + q3 * (PHYS_GRAD + STRAIN + stress + TRANSFORM_FULL)
        + 18 * q3 * n * n * n
}

pub fn flops_per_element_sumfac(n: u64, q: u64, mat: &MaterialField) -> u64 {
    let q3 = q * q * q;
    let stress = match mat.max_stress_flops() {
        x if x <= crate::material::ISO_STRESS_FLOPS => STRESS_ISO_FULL,
        _ => STRESS_ANISO_FULL,
    };
    12 * sumfac_grad_fmas(n, q) + q3 * (PHYS_GRAD + STRAIN + stress + TRANSFORM_FULL)
}

pub fn flops_per_element_voigt(n: u64, q: u64, mat: &MaterialField) -> u64 {
    let q3 = q * q * q;
    12 * sumfac_grad_fmas(n, q)
        + q3 * (PHYS_GRAD + STRAIN + mat.max_stress_flops() + SCALE_VOIGT + EXPAND_VOIGT)
}

/// The fused kernel evaluates the same arithmetic as the Voigt stage;
/// fusion and the slice organization change traffic, not flops.
pub fn flops_per_element_fused(n: u64, q: u64, mat: &MaterialField) -> u64 {
    flops_per_element_voigt(n, q, mat)
}

/// Report of the counters accumulated since the last reset.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CounterReport {
    pub flops: u64,
    pub bytes_model: u64,
    pub applications: u64,
}

impl CounterReport {
    pub fn operational_intensity(&self) -> f64 {
        self.flops as f64 / self.bytes_model as f64
    }
}

/// Fixed per-application cost of an operator instance.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ApplyCost {
    pub flops: u64,
    pub bytes: u64,
}

pub(crate) struct TrafficInputs {
    pub ndof: u64,
    pub nelem: u64,
    pub q3: u64,
    /// Bytes of the 1D basis tables.
    pub basis_bytes: u64,
    /// Bytes of the dense gradient table, if the kernel streams it.
    pub gtable_bytes: u64,
    /// Values of the global stress intermediate per point (0, 6, or 9).
    pub qvec_values: u64,
    /// Kernel passes that stream the geometry factors.
    pub geometry_passes: u64,
    /// Kernel passes that stream the 1D basis tables.
    pub basis_passes: u64,
    pub material_values: u64,
}

/// Cost of one FA application: one CSR sweep.
pub(crate) fn fa_cost(matrix: &super::SparseMatrix) -> ApplyCost {
    let nnz = matrix.nnz() as u64;
    let n = matrix.dim() as u64;
    ApplyCost {
        flops: 2 * nnz,
        bytes: 16 * nnz + 8 * (n + 1) + 16 * n,
    }
}

pub(crate) fn pa_cost(
    space: &crate::space::FESpace,
    basis: &crate::basis::Basis1D,
    geom: &super::GeometryFactors,
    material: &MaterialField,
    stage: super::PaStage,
    data: &super::pa::PaData,
) -> ApplyCost {
    let n = basis.ndof() as u64;
    let q = basis.num_points as u64;
    let nelem = space.num_elements() as u64;
    let flops_per_element = match stage {
        super::PaStage::Baseline => flops_per_element_baseline(n, q, material),
        super::PaStage::SumFactorized => flops_per_element_sumfac(n, q, material),
        super::PaStage::SumFacVoigt => flops_per_element_voigt(n, q, material),
    };
    let gtable_bytes = data.gtable.as_ref().map_or(0, |t| t.bytes());
    let traffic = TrafficInputs {
        ndof: space.vector_ndof() as u64,
        nelem,
        q3: geom.points_per_element() as u64,
        basis_bytes: basis.table_bytes() as u64,
        gtable_bytes,
        qvec_values: stage.qvec_width() as u64,
        // the Voigt stage applies the geometric transform in kernel 2 as
        // well, so it streams the factors twice
        geometry_passes: if stage == super::PaStage::SumFacVoigt { 2 } else { 1 },
        basis_passes: if stage == super::PaStage::Baseline { 0 } else { 2 },
        material_values: material.stored_values() as u64,
    };
    ApplyCost {
        flops: flops_per_element * nelem,
        bytes: streaming_bytes(&traffic),
    }
}

pub(crate) fn paop_cost(
    space: &crate::space::FESpace,
    basis: &crate::basis::Basis1D,
    geom: &super::GeometryFactors,
    material: &MaterialField,
) -> ApplyCost {
    let n = basis.ndof() as u64;
    let q = basis.num_points as u64;
    let nelem = space.num_elements() as u64;
    let traffic = TrafficInputs {
        ndof: space.vector_ndof() as u64,
        nelem,
        q3: geom.points_per_element() as u64,
        basis_bytes: basis.table_bytes() as u64,
        gtable_bytes: 0,
        qvec_values: 0, // el_q stays on chip: no global intermediate
        geometry_passes: 1,
        basis_passes: 1,
        material_values: material.stored_values() as u64,
    };
    ApplyCost {
        flops: flops_per_element_fused(n, q, material) * nelem,
        bytes: streaming_bytes(&traffic),
    }
}

pub(crate) fn streaming_bytes(t: &TrafficInputs) -> u64 {
    let mut bytes = 16 * t.ndof; // one pass over x, one over y
    if t.gtable_bytes > 0 {
        bytes += 2 * t.nelem * t.gtable_bytes; // both kernels per element
    }
    if t.qvec_values > 0 {
        bytes += 2 * 8 * t.nelem * t.q3 * t.qvec_values; // write then read back
    }
    bytes += t.geometry_passes
        * (8 * t.nelem * t.q3 * super::geometry::GeometryFactors::STREAMED_VALUES_PER_POINT
            + 8 * t.q3);
    bytes += t.basis_passes * t.nelem * t.basis_bytes;
    bytes += 8 * t.material_values;
    bytes
}
