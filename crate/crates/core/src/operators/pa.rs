//! Baseline partial assembly: the two-kernel organization with a
//! persistent global stress intermediate (QVec) spanning all elements.
//!
//! Kernel 1 walks every quadrature point, forms physical gradients,
//! full-tensor stress, and the geometrically transformed quantity, and
//! writes it to QVec in main memory. Kernel 2 re-reads the whole of QVec
//! and contracts it against the basis-gradient data into the output.
//! Both inefficiencies of this organization - the QVec round-trip and,
//! at the baseline stage, the dense gradient table - are kept on purpose:
//! this operator is the experimental control.
//!
//! Two intermediate stages bridge to the fused kernel: `SumFactorized`
//! swaps the dense-table contractions for staged 1D contractions, and
//! `SumFacVoigt` additionally stores the stress in 6-component Voigt
//! form, applying the geometric transform in kernel 2.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::basis::Basis1D;
use crate::material::{
    strain_from_grad, stress_full_anisotropic, stress_full_tensor, voigt_stress, voigt_to_matrix,
    VoigtMaterial,
};
use crate::space::FESpace;

use super::geometry::GeometryFactors;
use super::sumfac::{grad_transpose_via_table, grad_via_table, GradTable};
use super::{
    for_elements_colored, physical_gradient, sumfac_grad, sumfac_grad_transpose, transform_stress,
    ElasticOperator, Kind, SendPtr,
};

/// Kernel organization of the PA operator, from the control configuration
/// to the last stop before the fused kernel.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PaStage {
    /// Dense gradient table, 9-component stress intermediate.
    Baseline,
    /// Staged 1D contractions, 9-component stress intermediate.
    SumFactorized,
    /// Staged 1D contractions, 6-component Voigt intermediate.
    SumFacVoigt,
}

impl PaStage {
    pub fn parse(s: &str) -> crate::Result<Self> {
        match s {
            "baseline" => Ok(PaStage::Baseline),
            "sumfac" => Ok(PaStage::SumFactorized),
            "voigt" | "sumfac-voigt" => Ok(PaStage::SumFacVoigt),
            _ => Err(crate::Error::invalid(format!("unknown kernel stage `{s}`"))),
        }
    }

    /// Values stored per quadrature point in the global intermediate.
    pub fn qvec_width(self) -> usize {
        match self {
            PaStage::Baseline | PaStage::SumFactorized => 9,
            PaStage::SumFacVoigt => 6,
        }
    }
}

pub(crate) struct PaData {
    pub stage: PaStage,
    pub gtable: Option<Arc<GradTable>>,
    /// Global intermediate, `nelem * q^3 * width` values, reused across
    /// applications; concurrent applications of one PA instance
    /// serialize on this lock.
    qvec: Mutex<Vec<f64>>,
    width: usize,
}

impl PaData {
    pub fn new(space: &FESpace, basis: &Basis1D, geom: &GeometryFactors, stage: PaStage) -> Self {
        let gtable = match stage {
            PaStage::Baseline => Some(Arc::new(GradTable::build(basis))),
            _ => None,
        };
        let width = stage.qvec_width();
        let len = space.num_elements() * geom.points_per_element() * width;
        PaData {
            stage,
            gtable,
            qvec: Mutex::new(vec![0.0; len]),
            width,
        }
    }

    pub fn qvec_len(&self) -> usize {
        self.qvec.lock().unwrap().len()
    }
}

struct Kernel1Scratch {
    xl: Vec<f64>,
    grads: Vec<f64>,
}

struct Kernel2Scratch {
    yl: Vec<f64>,
    qfields: Vec<f64>,
}

pub(crate) fn apply_add(op: &ElasticOperator, x: &[f64], y: &mut [f64]) {
    let Kind::Pa(data) = &op.kind else { unreachable!() };
    let space = op.space();
    let basis = op.basis();
    let geom = op.geometry();
    let material = op.material();
    let npts = geom.points_per_element();
    let nloc = space.dofs_per_element();
    let q3 = npts;
    let width = data.width;
    let stage = data.stage;
    let gtable = data.gtable.clone();

    let mut qvec_guard = data.qvec.lock().unwrap();
    let qvec: &mut [f64] = &mut qvec_guard;

    // Kernel 1: stress at every quadrature point of every element.
    let kernel1 = |s: &mut Kernel1Scratch, e: usize, chunk: &mut [f64]| {
        space.gather(e, x, &mut s.xl);
        match stage {
            PaStage::Baseline => {
                let table = gtable.as_deref().unwrap();
                for c in 0..3 {
                    let dst = &mut s.grads[3 * q3 * c..3 * q3 * (c + 1)];
                    grad_via_table(table, &s.xl[c * nloc..(c + 1) * nloc], dst);
                }
            }
            _ => {
                for c in 0..3 {
                    let dst = &mut s.grads[3 * q3 * c..3 * q3 * (c + 1)];
                    sumfac_grad(basis, &s.xl[c * nloc..(c + 1) * nloc], dst);
                }
            }
        }
        for pt in 0..npts {
            let mut r = [[0.0; 3]; 3];
            for c in 0..3 {
                for m in 0..3 {
                    r[c][m] = s.grads[3 * q3 * c + m * q3 + pt];
                }
            }
            let jinv = geom.jinv_at(e, pt);
            let wdet = geom.weight(pt) * geom.det_at(e, pt);
            let grad = physical_gradient(&r, jinv);
            let out = &mut chunk[pt * width..(pt + 1) * width];
            match stage {
                PaStage::SumFacVoigt => {
                    let eps = strain_from_grad(&grad);
                    let sigma = voigt_stress(&eps, material.at(e, pt));
                    for k in 0..6 {
                        out[k] = wdet * sigma[k];
                    }
                }
                _ => {
                    let sigma = match material.at(e, pt) {
                        VoigtMaterial::Isotropic { lambda, mu } => {
                            stress_full_tensor(&grad, *lambda, *mu)
                        }
                        VoigtMaterial::Anisotropic { c } => stress_full_anisotropic(&grad, c),
                    };
                    let qm = transform_stress(&sigma, jinv, wdet);
                    for m in 0..3 {
                        for c in 0..3 {
                            out[m * 3 + c] = qm[m][c];
                        }
                    }
                }
            }
        }
    };

    let make_k1_scratch = || Kernel1Scratch {
        xl: vec![0.0; 3 * nloc],
        grads: vec![0.0; 9 * q3],
    };

    match op.pool() {
        None => {
            let mut s = make_k1_scratch();
            for (e, chunk) in qvec.chunks_mut(npts * width).enumerate() {
                kernel1(&mut s, e, chunk);
            }
        }
        Some(p) => p.install(|| {
            qvec.par_chunks_mut(npts * width)
                .enumerate()
                .for_each_init(&make_k1_scratch, |s, (e, chunk)| kernel1(s, e, chunk));
        }),
    }

    // Kernel 2: re-read QVec and contract into the output.
    let qvec_ro: &[f64] = qvec;
    let writer = SendPtr(y.as_mut_ptr());
    let ns = space.scalar_ndof();
    let dof_map = space.dof_map();

    let kernel2 = |s: &mut Kernel2Scratch, e: usize| {
        let chunk = &qvec_ro[e * npts * width..(e + 1) * npts * width];
        s.yl.fill(0.0);
        match stage {
            PaStage::Baseline => {
                let table = gtable.as_deref().unwrap();
                for c in 0..3 {
                    for pt in 0..npts {
                        for m in 0..3 {
                            s.qfields[m * q3 + pt] = chunk[pt * 9 + m * 3 + c];
                        }
                    }
                    grad_transpose_via_table(table, &s.qfields, &mut s.yl[c * nloc..(c + 1) * nloc]);
                }
            }
            PaStage::SumFactorized => {
                for c in 0..3 {
                    for pt in 0..npts {
                        for m in 0..3 {
                            s.qfields[m * q3 + pt] = chunk[pt * 9 + m * 3 + c];
                        }
                    }
                    sumfac_grad_transpose(basis, &s.qfields, &mut s.yl[c * nloc..(c + 1) * nloc]);
                }
            }
            PaStage::SumFacVoigt => {
                // expand the stored Voigt stress against Jinv on the fly
                for pt in 0..npts {
                    let v: &[f64] = &chunk[pt * 6..(pt + 1) * 6];
                    let sig = voigt_to_matrix(&[v[0], v[1], v[2], v[3], v[4], v[5]]);
                    let jinv = geom.jinv_at(e, pt);
                    let qm = transform_stress(&sig, jinv, 1.0);
                    for m in 0..3 {
                        for c in 0..3 {
                            s.qfields[(c * 3 + m) * q3 + pt] = qm[m][c];
                        }
                    }
                }
                for c in 0..3 {
                    let fields = &s.qfields[c * 3 * q3..(c + 1) * 3 * q3];
                    sumfac_grad_transpose(basis, fields, &mut s.yl[c * nloc..(c + 1) * nloc]);
                }
            }
        }
        let map = dof_map.element(e);
        for c in 0..3 {
            for (l, &g) in map.iter().enumerate() {
                // safety: 8-coloring keeps concurrent targets disjoint
                unsafe { writer.add_assign(c * ns + g, s.yl[c * nloc + l]) };
            }
        }
    };

    let qfields_len = match stage {
        PaStage::SumFacVoigt => 9 * q3,
        _ => 3 * q3,
    };
    for_elements_colored(
        op.pool(),
        op.colors(),
        || Kernel2Scratch {
            yl: vec![0.0; 3 * nloc],
            qfields: vec![0.0; qfields_len],
        },
        kernel2,
    );
}
