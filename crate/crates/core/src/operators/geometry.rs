//! Per-element, per-quadrature-point geometry factors.
//!
//! Conventions used across all kernels:
//!   J[i][j]    = dx_i / dxi_j        (row i physical, column j reference)
//!   Jinv[m][j] = dxi_m / dx_j
//! so the physical gradient of a scalar basis function is
//!   g_phys[j] = sum_m Jinv[m][j] * g_ref[m].
//!
//! The Jacobian is evaluated at every quadrature point from the element
//! corner coordinates through the trilinear map, even though Cartesian
//! cells make it constant and diagonal; the kernels consume these tables
//! without assuming any structure.

use std::sync::Arc;

use crate::basis::QuadRule1D;
use crate::space::FESpace;
use crate::{Error, Result};

#[derive(Clone, Debug)]
pub struct GeometryFactors {
    num_elements: usize,
    points_per_element: usize,
    /// J, row-major 9 per (element, point).
    jac: Vec<f64>,
    /// det J per (element, point).
    det: Vec<f64>,
    /// Jinv[m][j] = dxi_m/dx_j, row-major 9 per (element, point).
    jinv: Vec<f64>,
    /// Tensor-product quadrature weights, one per reference point.
    weights: Vec<f64>,
}

impl GeometryFactors {
    pub fn compute(space: &FESpace, rule: &QuadRule1D) -> Result<Arc<Self>> {
        let q = rule.len();
        let npts = q * q * q;
        let nelem = space.num_elements();
        let mesh = space.mesh();

        let mut weights = vec![0.0; npts];
        let mut idx = 0;
        for &wz in &rule.weights {
            for &wy in &rule.weights {
                for &wx in &rule.weights {
                    weights[idx] = wx * wy * wz;
                    idx += 1;
                }
            }
        }

        let mut jac = vec![0.0; nelem * npts * 9];
        let mut det = vec![0.0; nelem * npts];
        let mut jinv = vec![0.0; nelem * npts * 9];

        for e in 0..nelem {
            let corners = mesh.cell_corners(e);
            let mut pt = 0;
            for &zq in &rule.points {
                for &yq in &rule.points {
                    for &xq in &rule.points {
                        let j = trilinear_jacobian(&corners, [xq, yq, zq]);
                        let d = det3(&j);
                        if !(d > 0.0) {
                            return Err(Error::Geometry(format!(
                                "non-positive Jacobian determinant {d} in element {e}"
                            )));
                        }
                        let inv = invert3(&j, d);
                        let base = (e * npts + pt) * 9;
                        for r in 0..3 {
                            for c in 0..3 {
                                jac[base + 3 * r + c] = j[r][c];
                                jinv[base + 3 * r + c] = inv[r][c];
                            }
                        }
                        det[e * npts + pt] = d;
                        pt += 1;
                    }
                }
            }
        }

        Ok(Arc::new(GeometryFactors {
            num_elements: nelem,
            points_per_element: npts,
            jac,
            det,
            jinv,
            weights,
        }))
    }

    pub fn points_per_element(&self) -> usize {
        self.points_per_element
    }

    pub fn num_elements(&self) -> usize {
        self.num_elements
    }

    #[inline]
    pub fn jac_at(&self, e: usize, pt: usize) -> &[f64; 9] {
        let base = (e * self.points_per_element + pt) * 9;
        self.jac[base..base + 9].try_into().unwrap()
    }

    #[inline]
    pub fn jinv_at(&self, e: usize, pt: usize) -> &[f64; 9] {
        let base = (e * self.points_per_element + pt) * 9;
        self.jinv[base..base + 9].try_into().unwrap()
    }

    #[inline]
    pub fn det_at(&self, e: usize, pt: usize) -> f64 {
        self.det[e * self.points_per_element + pt]
    }

    #[inline]
    pub fn weight(&self, pt: usize) -> f64 {
        self.weights[pt]
    }

    /// Stored bytes (J, det J, the inverse table, and the weights).
    pub fn bytes(&self) -> u64 {
        ((self.jac.len() + self.det.len() + self.jinv.len() + self.weights.len())
            * std::mem::size_of::<f64>()) as u64
    }

    /// Values streamed per point by a kernel pass (Jinv + det).
    pub const STREAMED_VALUES_PER_POINT: u64 = 10;
}

/// Jacobian of the trilinear hexahedral map at reference point xi.
fn trilinear_jacobian(corners: &[[f64; 3]; 8], xi: [f64; 3]) -> [[f64; 3]; 3] {
    let mut j = [[0.0; 3]; 3];
    for k in 0..8 {
        let d = [(k & 1) as f64, ((k >> 1) & 1) as f64, ((k >> 2) & 1) as f64];
        // shape factor per axis and its derivative
        let f = |a: usize| if d[a] == 1.0 { xi[a] } else { 1.0 - xi[a] };
        let df = |a: usize| if d[a] == 1.0 { 1.0 } else { -1.0 };
        let grads = [
            df(0) * f(1) * f(2),
            f(0) * df(1) * f(2),
            f(0) * f(1) * df(2),
        ];
        for i in 0..3 {
            for a in 0..3 {
                j[i][a] += corners[k][i] * grads[a];
            }
        }
    }
    j
}

pub(crate) fn det3(m: &[[f64; 3]; 3]) -> f64 {
    m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
        - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
        + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
}

fn invert3(m: &[[f64; 3]; 3], det: f64) -> [[f64; 3]; 3] {
    let inv_det = 1.0 / det;
    let mut inv = [[0.0; 3]; 3];
    inv[0][0] = (m[1][1] * m[2][2] - m[1][2] * m[2][1]) * inv_det;
    inv[0][1] = (m[0][2] * m[2][1] - m[0][1] * m[2][2]) * inv_det;
    inv[0][2] = (m[0][1] * m[1][2] - m[0][2] * m[1][1]) * inv_det;
    inv[1][0] = (m[1][2] * m[2][0] - m[1][0] * m[2][2]) * inv_det;
    inv[1][1] = (m[0][0] * m[2][2] - m[0][2] * m[2][0]) * inv_det;
    inv[1][2] = (m[0][2] * m[1][0] - m[0][0] * m[1][2]) * inv_det;
    inv[2][0] = (m[1][0] * m[2][1] - m[1][1] * m[2][0]) * inv_det;
    inv[2][1] = (m[0][1] * m[2][0] - m[0][0] * m[2][1]) * inv_det;
    inv[2][2] = (m[0][0] * m[1][1] - m[0][1] * m[1][0]) * inv_det;
    inv
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CartesianMesh;

    fn factors(extents: [f64; 3], cells: [usize; 3], p: usize) -> (FESpace, Arc<GeometryFactors>) {
        let mesh = Arc::new(CartesianMesh::new(extents, cells).unwrap());
        let space = FESpace::new(mesh, p).unwrap();
        let rule = QuadRule1D::gauss_legendre(p + 1).unwrap();
        let geom = GeometryFactors::compute(&space, &rule).unwrap();
        (space, geom)
    }

    #[test]
    fn unit_cube_single_cell() {
        let (_, geom) = factors([1.0; 3], [1; 3], 2);
        for pt in 0..geom.points_per_element() {
            let j = geom.jac_at(0, pt);
            for r in 0..3 {
                for c in 0..3 {
                    let expect = if r == c { 1.0 } else { 0.0 };
                    assert!((j[3 * r + c] - expect).abs() < 1e-14);
                }
            }
            assert!((geom.det_at(0, pt) - 1.0).abs() < 1e-14);
        }
    }

    #[test]
    fn refined_cube_scales_jacobian() {
        let (space, geom) = factors([1.0; 3], [2; 3], 1);
        for e in 0..space.num_elements() {
            for pt in 0..geom.points_per_element() {
                let j = geom.jac_at(e, pt);
                assert!((j[0] - 0.5).abs() < 1e-14);
                assert!((j[4] - 0.5).abs() < 1e-14);
                assert!((j[8] - 0.5).abs() < 1e-14);
                assert!((geom.det_at(e, pt) - 0.125).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn stretched_box() {
        let (_, geom) = factors([2.0, 1.0, 1.0], [1; 3], 1);
        let j = geom.jac_at(0, 0);
        assert!((j[0] - 2.0).abs() < 1e-14);
        assert!((j[4] - 1.0).abs() < 1e-14);
        assert!((j[8] - 1.0).abs() < 1e-14);
    }

    #[test]
    fn inverse_is_consistent() {
        let (space, geom) = factors([2.0, 0.5, 1.5], [2, 3, 1], 2);
        for e in 0..space.num_elements() {
            for pt in 0..geom.points_per_element() {
                let j = geom.jac_at(e, pt);
                let inv = geom.jinv_at(e, pt);
                // J * Jinv = I within 1e-13
                for r in 0..3 {
                    for c in 0..3 {
                        let mut acc = 0.0;
                        for k in 0..3 {
                            acc += j[3 * r + k] * inv[3 * k + c];
                        }
                        let expect = if r == c { 1.0 } else { 0.0 };
                        assert!((acc - expect).abs() < 1e-13);
                    }
                }
            }
        }
    }

    #[test]
    fn weights_integrate_reference_cell() {
        let (_, geom) = factors([1.0; 3], [1; 3], 3);
        let total: f64 = (0..geom.points_per_element()).map(|pt| geom.weight(pt)).sum();
        assert!((total - 1.0).abs() < 1e-13);
    }
}
