//! The fused element-centric kernel: interpolation, constitutive
//! evaluation, and the output contraction run in one pass per element,
//! slice by slice, so the only per-element intermediate of volume size is
//! the 6-component Voigt stress buffer (el_q). Everything else lives in
//! 2D panels bounded by max(p+1, q)^2 values, and no cross-element
//! intermediate exists at all.

use crate::material::{strain_from_grad, voigt_stress, voigt_to_matrix};

use super::sumfac::{contract_z, forward_slice, transpose_slice, SliceScratch};
use super::{
    for_elements_colored, physical_gradient, transform_stress, ElasticOperator, SendPtr,
};

struct PaopScratch {
    xl: Vec<f64>,
    yl: Vec<f64>,
    /// Per-element Voigt stress buffer, 6 values per quadrature point.
    elq: Vec<f64>,
    /// One slice pipeline per displacement component.
    slice: [SliceScratch; 3],
}

pub(crate) fn apply_add(op: &ElasticOperator, x: &[f64], y: &mut [f64]) {
    let space = op.space();
    let basis = op.basis();
    let geom = op.geometry();
    let material = op.material();

    let n = basis.ndof();
    let q = basis.num_points;
    let q2 = q * q;
    let q3 = q2 * q;
    let nloc = space.dofs_per_element();
    let ns = space.scalar_ndof();
    let dof_map = space.dof_map();
    let writer = SendPtr(y.as_mut_ptr());

    let make_scratch = || PaopScratch {
        xl: vec![0.0; 3 * nloc],
        yl: vec![0.0; 3 * nloc],
        elq: vec![0.0; 6 * q3],
        slice: [
            SliceScratch::new(n, q),
            SliceScratch::new(n, q),
            SliceScratch::new(n, q),
        ],
    };

    let element_kernel = |s: &mut PaopScratch, e: usize| {
        space.gather(e, x, &mut s.xl);

        // pass A: gradients -> stress, one z-slice at a time
        for qz in 0..q {
            let rz_b = &basis.b[qz * n..(qz + 1) * n];
            let rz_d = &basis.d[qz * n..(qz + 1) * n];
            for c in 0..3 {
                let sc = &mut s.slice[c];
                contract_z(n, rz_b, rz_d, &s.xl[c * nloc..(c + 1) * nloc], &mut sc.su, &mut sc.sd);
                forward_slice(basis, sc);
            }
            let base = qz * q2;
            for idx in 0..q2 {
                let pt = base + idx;
                let r = [
                    [s.slice[0].gx[idx], s.slice[0].gy[idx], s.slice[0].gz[idx]],
                    [s.slice[1].gx[idx], s.slice[1].gy[idx], s.slice[1].gz[idx]],
                    [s.slice[2].gx[idx], s.slice[2].gy[idx], s.slice[2].gz[idx]],
                ];
                let jinv = geom.jinv_at(e, pt);
                let wdet = geom.weight(pt) * geom.det_at(e, pt);
                let grad = physical_gradient(&r, jinv);
                let eps = strain_from_grad(&grad);
                let sigma = voigt_stress(&eps, material.at(e, pt));
                for k in 0..6 {
                    s.elq[k * q3 + pt] = wdet * sigma[k];
                }
            }
        }

        // pass B: transform and contract back, slice by slice
        s.yl.fill(0.0);
        for qz in 0..q {
            let base = qz * q2;
            for idx in 0..q2 {
                let pt = base + idx;
                let v = [
                    s.elq[pt],
                    s.elq[q3 + pt],
                    s.elq[2 * q3 + pt],
                    s.elq[3 * q3 + pt],
                    s.elq[4 * q3 + pt],
                    s.elq[5 * q3 + pt],
                ];
                let sig = voigt_to_matrix(&v);
                let jinv = geom.jinv_at(e, pt);
                let qm = transform_stress(&sig, jinv, 1.0);
                for c in 0..3 {
                    let sc = &mut s.slice[c];
                    sc.gx[idx] = qm[0][c];
                    sc.gy[idx] = qm[1][c];
                    sc.gz[idx] = qm[2][c];
                }
            }
            for c in 0..3 {
                let sc = &mut s.slice[c];
                transpose_slice(basis, sc);
                let ycomp = &mut s.yl[c * nloc..(c + 1) * nloc];
                for i3 in 0..n {
                    let bz = basis.b[qz * n + i3];
                    let dz = basis.d[qz * n + i3];
                    let plane = &mut ycomp[i3 * n * n..(i3 + 1) * n * n];
                    for k in 0..n * n {
                        plane[k] += bz * sc.wxy[k] + dz * sc.wz[k];
                    }
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

    for_elements_colored(op.pool(), op.colors(), make_scratch, element_kernel);
}
