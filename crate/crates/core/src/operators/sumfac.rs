//! Sum-factorized evaluation of reference gradients and its adjoint,
//! plus the dense basis-gradient table they replace.
//!
//! The table route is the reference path: the baseline kernel streams it,
//! and the tests check the factorized kernels against it. The factorized
//! kernels are organized slice by slice so live scratch stays at a few
//! max(p+1, q)^2 panels per stage.
//!
//! Layouts: nodal data is lexicographic, x fastest, `u[(i3*n + i2)*n + i1]`;
//! quadrature data likewise, `pt = (q3*q + q2)*q + q1`; gradients are
//! direction-major, `out[m * q^3 + pt]` with m in {dxi, deta, dzeta}.

use crate::basis::Basis1D;

/// Dense reference-gradient table G[pt][m][i] = d phi_i / d xi_m at pt.
#[derive(Clone, Debug)]
pub struct GradTable {
    pub num_points: usize,
    pub num_dofs: usize,
    /// Flattened (pt, m, i), i fastest.
    pub g: Vec<f64>,
}

impl GradTable {
    pub fn build(basis: &Basis1D) -> GradTable {
        let n = basis.ndof();
        let q = basis.num_points;
        let n3 = n * n * n;
        let q3 = q * q * q;
        let mut g = vec![0.0; q3 * 3 * n3];
        let b = &basis.b;
        let d = &basis.d;
        for q3i in 0..q {
            for q2 in 0..q {
                for q1 in 0..q {
                    let pt = (q3i * q + q2) * q + q1;
                    for i3 in 0..n {
                        for i2 in 0..n {
                            for i1 in 0..n {
                                let i = (i3 * n + i2) * n + i1;
                                let bz = b[q3i * n + i3];
                                let by = b[q2 * n + i2];
                                let bx = b[q1 * n + i1];
                                let dz = d[q3i * n + i3];
                                let dy = d[q2 * n + i2];
                                let dx = d[q1 * n + i1];
                                let base = (pt * 3) * n3;
                                g[base + i] = dx * by * bz;
                                g[base + n3 + i] = bx * dy * bz;
                                g[base + 2 * n3 + i] = bx * by * dz;
                            }
                        }
                    }
                }
            }
        }
        GradTable {
            num_points: q3,
            num_dofs: n3,
            g,
        }
    }

    pub fn bytes(&self) -> u64 {
        (self.g.len() * std::mem::size_of::<f64>()) as u64
    }
}

/// Reference gradients of one scalar field through the dense table.
pub fn grad_via_table(table: &GradTable, u: &[f64], out: &mut [f64]) {
    let n3 = table.num_dofs;
    let q3 = table.num_points;
    debug_assert_eq!(u.len(), n3);
    debug_assert_eq!(out.len(), 3 * q3);
    for pt in 0..q3 {
        for m in 0..3 {
            let row = &table.g[(pt * 3 + m) * n3..(pt * 3 + m + 1) * n3];
            let mut acc = 0.0;
            for i in 0..n3 {
                acc += row[i] * u[i];
            }
            out[m * q3 + pt] = acc;
        }
    }
}

/// Adjoint of [`grad_via_table`], accumulating into `u`.
pub fn grad_transpose_via_table(table: &GradTable, qvals: &[f64], u: &mut [f64]) {
    let n3 = table.num_dofs;
    let q3 = table.num_points;
    debug_assert_eq!(qvals.len(), 3 * q3);
    debug_assert_eq!(u.len(), n3);
    for pt in 0..q3 {
        for m in 0..3 {
            let v = qvals[m * q3 + pt];
            let row = &table.g[(pt * 3 + m) * n3..(pt * 3 + m + 1) * n3];
            for i in 0..n3 {
                u[i] += v * row[i];
            }
        }
    }
}

/// Scratch panels for the slice-wise kernels; all of them are 2D.
#[derive(Clone, Debug)]
pub struct SliceScratch {
    pub su: Vec<f64>,   // n x n
    pub sd: Vec<f64>,   // n x n
    pub ta: Vec<f64>,   // q x n
    pub tb: Vec<f64>,   // q x n
    pub tc: Vec<f64>,   // q x n
    pub gx: Vec<f64>,   // q x q
    pub gy: Vec<f64>,   // q x q
    pub gz: Vec<f64>,   // q x q
    pub wxy: Vec<f64>,  // n x n
    pub wz: Vec<f64>,   // n x n
}

impl SliceScratch {
    pub fn new(n: usize, q: usize) -> Self {
        SliceScratch {
            su: vec![0.0; n * n],
            sd: vec![0.0; n * n],
            ta: vec![0.0; q * n],
            tb: vec![0.0; q * n],
            tc: vec![0.0; q * n],
            gx: vec![0.0; q * q],
            gy: vec![0.0; q * q],
            gz: vec![0.0; q * q],
            wxy: vec![0.0; n * n],
            wz: vec![0.0; n * n],
        }
    }
}

/// z-contraction of a nodal field onto one output slice: for the given
/// 1D row `rz` (length n), su[i2*n+i1] = sum_i3 rz[i3] u[(i3,i2,i1)].
#[inline]
pub(crate) fn contract_z(n: usize, rz_b: &[f64], rz_d: &[f64], u: &[f64], su: &mut [f64], sd: &mut [f64]) {
    su.fill(0.0);
    sd.fill(0.0);
    for i3 in 0..n {
        let bz = rz_b[i3];
        let dz = rz_d[i3];
        let plane = &u[i3 * n * n..(i3 + 1) * n * n];
        for k in 0..n * n {
            su[k] += bz * plane[k];
            sd[k] += dz * plane[k];
        }
    }
}

/// One q3-slice of the forward gradient: given z-contracted panels
/// su (B in z) and sd (D in z), produce the three gradient slices.
#[inline]
pub(crate) fn forward_slice(basis: &Basis1D, s: &mut SliceScratch) {
    let n = basis.ndof();
    let q = basis.num_points;
    let (b, d) = (&basis.b, &basis.d);
    // x stage: ta = B_x su, tb = D_x su, tc = B_x sd  (layout [q1][i2])
    for q1 in 0..q {
        let brow = &b[q1 * n..(q1 + 1) * n];
        let drow = &d[q1 * n..(q1 + 1) * n];
        for i2 in 0..n {
            let row = &s.su[i2 * n..(i2 + 1) * n];
            let rowd = &s.sd[i2 * n..(i2 + 1) * n];
            let mut a = 0.0;
            let mut bb = 0.0;
            let mut c = 0.0;
            for i1 in 0..n {
                a += brow[i1] * row[i1];
                bb += drow[i1] * row[i1];
                c += brow[i1] * rowd[i1];
            }
            s.ta[q1 * n + i2] = a;
            s.tb[q1 * n + i2] = bb;
            s.tc[q1 * n + i2] = c;
        }
    }
    // y stage: gx = B_y tb, gy = D_y ta, gz = B_y tc  (layout [q2][q1])
    for q2 in 0..q {
        let brow = &b[q2 * n..(q2 + 1) * n];
        let drow = &d[q2 * n..(q2 + 1) * n];
        for q1 in 0..q {
            let mut x = 0.0;
            let mut y = 0.0;
            let mut z = 0.0;
            for i2 in 0..n {
                x += brow[i2] * s.tb[q1 * n + i2];
                y += drow[i2] * s.ta[q1 * n + i2];
                z += brow[i2] * s.tc[q1 * n + i2];
            }
            s.gx[q2 * q + q1] = x;
            s.gy[q2 * q + q1] = y;
            s.gz[q2 * q + q1] = z;
        }
    }
}

/// Transpose of [`forward_slice`]: consumes gradient slices gx/gy/gz and
/// produces the two nodal panels to be spread along z (wxy gets B in z,
/// wz gets D in z).
#[inline]
pub(crate) fn transpose_slice(basis: &Basis1D, s: &mut SliceScratch) {
    let n = basis.ndof();
    let q = basis.num_points;
    let (b, d) = (&basis.b, &basis.d);
    // y stage (transposed): ta = B_y^T gx, tb = D_y^T gy, tc = B_y^T gz
    for q1 in 0..q {
        for i2 in 0..n {
            let mut a = 0.0;
            let mut bb = 0.0;
            let mut c = 0.0;
            for q2 in 0..q {
                a += b[q2 * n + i2] * s.gx[q2 * q + q1];
                bb += d[q2 * n + i2] * s.gy[q2 * q + q1];
                c += b[q2 * n + i2] * s.gz[q2 * q + q1];
            }
            s.ta[q1 * n + i2] = a;
            s.tb[q1 * n + i2] = bb;
            s.tc[q1 * n + i2] = c;
        }
    }
    // x stage (transposed): wxy = D_x^T ta + B_x^T tb, wz = B_x^T tc
    s.wxy.fill(0.0);
    s.wz.fill(0.0);
    for q1 in 0..q {
        let brow = &b[q1 * n..(q1 + 1) * n];
        let drow = &d[q1 * n..(q1 + 1) * n];
        for i2 in 0..n {
            let a = s.ta[q1 * n + i2];
            let bb = s.tb[q1 * n + i2];
            let c = s.tc[q1 * n + i2];
            for i1 in 0..n {
                s.wxy[i2 * n + i1] += drow[i1] * a + brow[i1] * bb;
                s.wz[i2 * n + i1] += brow[i1] * c;
            }
        }
    }
}

/// Reference gradients of a scalar nodal field by staged 1D contractions.
/// `out[m * q^3 + pt]`, m in {dxi, deta, dzeta}.
pub fn sumfac_grad(basis: &Basis1D, u: &[f64], out: &mut [f64]) {
    let n = basis.ndof();
    let q = basis.num_points;
    let q3 = q * q * q;
    debug_assert_eq!(u.len(), n * n * n);
    debug_assert_eq!(out.len(), 3 * q3);
    let mut s = SliceScratch::new(n, q);
    for qz in 0..q {
        contract_z(
            n,
            &basis.b[qz * n..(qz + 1) * n],
            &basis.d[qz * n..(qz + 1) * n],
            u,
            &mut s.su,
            &mut s.sd,
        );
        forward_slice(basis, &mut s);
        let base = qz * q * q;
        for k in 0..q * q {
            out[base + k] = s.gx[k];
            out[q3 + base + k] = s.gy[k];
            out[2 * q3 + base + k] = s.gz[k];
        }
    }
}

/// Exact adjoint of [`sumfac_grad`], accumulating into `u`.
pub fn sumfac_grad_transpose(basis: &Basis1D, qvals: &[f64], u: &mut [f64]) {
    let n = basis.ndof();
    let q = basis.num_points;
    let q3 = q * q * q;
    debug_assert_eq!(qvals.len(), 3 * q3);
    debug_assert_eq!(u.len(), n * n * n);
    let mut s = SliceScratch::new(n, q);
    for qz in 0..q {
        let base = qz * q * q;
        s.gx.copy_from_slice(&qvals[base..base + q * q]);
        s.gy.copy_from_slice(&qvals[q3 + base..q3 + base + q * q]);
        s.gz.copy_from_slice(&qvals[2 * q3 + base..2 * q3 + base + q * q]);
        transpose_slice(basis, &mut s);
        for i3 in 0..n {
            let bz = basis.b[qz * n + i3];
            let dz = basis.d[qz * n + i3];
            let plane = &mut u[i3 * n * n..(i3 + 1) * n * n];
            for k in 0..n * n {
                plane[k] += bz * s.wxy[k] + dz * s.wz[k];
            }
        }
    }
}
