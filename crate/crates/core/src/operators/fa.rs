//! Full assembly: the global sparse stiffness matrix in CSR form and its
//! matrix-vector product.

use crate::basis::{Basis1D, QuadRule1D};
use crate::material::{MaterialField, VoigtMaterial};
use crate::space::{BcConstraint, FESpace};
use crate::{Error, Result};

use super::geometry::GeometryFactors;
use super::sumfac::GradTable;

/// Square CSR matrix with sorted column indices per row.
#[derive(Clone, Debug)]
pub struct SparseMatrix {
    n: usize,
    row_offsets: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl SparseMatrix {
    pub fn from_csr(n: usize, row_offsets: Vec<usize>, cols: Vec<usize>, vals: Vec<f64>) -> Self {
        debug_assert_eq!(row_offsets.len(), n + 1);
        debug_assert_eq!(cols.len(), vals.len());
        SparseMatrix {
            n,
            row_offsets,
            cols,
            vals,
        }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let lo = self.row_offsets[i];
        let hi = self.row_offsets[i + 1];
        (&self.cols[lo..hi], &self.vals[lo..hi])
    }

    /// y = A x.
    pub fn spmv(&self, x: &[f64], y: &mut [f64]) -> Result<()> {
        if x.len() != self.n || y.len() != self.n {
            return Err(Error::invalid(format!(
                "spmv dimension mismatch: matrix {}, x {}, y {}",
                self.n,
                x.len(),
                y.len()
            )));
        }
        y.fill(0.0);
        self.spmv_add(x, y);
        Ok(())
    }

    /// y += A x (no dimension checks beyond debug).
    pub fn spmv_add(&self, x: &[f64], y: &mut [f64]) {
        debug_assert_eq!(x.len(), self.n);
        debug_assert_eq!(y.len(), self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            let mut acc = 0.0;
            for (c, v) in cols.iter().zip(vals) {
                acc += v * x[*c];
            }
            y[i] += acc;
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.n];
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            if let Ok(k) = cols.binary_search(&i) {
                d[i] = vals[k];
            }
        }
        d
    }

    /// Largest |A_ij - A_ji| over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let (tcols, tvals) = self.row(*c);
                let vt = match tcols.binary_search(&i) {
                    Ok(k) => tvals[k],
                    Err(_) => 0.0,
                };
                worst = worst.max((v - vt).abs());
            }
        }
        worst
    }

    pub fn max_abs(&self) -> f64 {
        self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    /// Replaces constrained rows and columns by identity (values of
    /// eliminated couplings are dropped, diagonal set to 1).
    pub fn apply_dirichlet(&mut self, bc: &BcConstraint) {
        if bc.is_empty() {
            return;
        }
        for i in 0..self.n {
            let lo = self.row_offsets[i];
            let hi = self.row_offsets[i + 1];
            if bc.is_constrained(i) {
                for k in lo..hi {
                    self.vals[k] = if self.cols[k] == i { 1.0 } else { 0.0 };
                }
            } else {
                for k in lo..hi {
                    if bc.is_constrained(self.cols[k]) {
                        self.vals[k] = 0.0;
                    }
                }
            }
        }
    }

    /// Stored bytes: values, column indices, row offsets.
    pub fn bytes(&self) -> u64 {
        (self.vals.len() * 8 + self.cols.len() * 8 + self.row_offsets.len() * 8) as u64
    }

    pub fn to_dense(&self) -> nalgebra::DMatrix<f64> {
        let mut m = nalgebra::DMatrix::zeros(self.n, self.n);
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (c, v) in cols.iter().zip(vals) {
                m[(i, *c)] += *v;
            }
        }
        m
    }
}

impl super::LinearOp for SparseMatrix {
    fn dim(&self) -> usize {
        SparseMatrix::dim(self)
    }
    fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        self.spmv_add(x, y);
    }
}

/// 1D coupling window of lattice node `a`: the contiguous node range of
/// all cells containing `a`.
fn window_1d(p: usize, cells: usize, a: usize) -> (usize, usize) {
    let c_hi = (a / p).min(cells - 1);
    let c_lo = if a <= p { 0 } else { (a - p + p - 1) / p };
    let lo = c_lo * p;
    let count = (c_hi - c_lo) * p + p + 1;
    (lo, count)
}

/// Predicted CSR storage of the assembled operator, computed from the
/// lattice structure without assembling.
pub fn predicted_fa_bytes(space: &FESpace) -> u64 {
    let nnz = predicted_nnz(space);
    nnz * 16 + (space.vector_ndof() as u64 + 1) * 8
}

pub fn predicted_nnz(space: &FESpace) -> u64 {
    let p = space.order();
    let cells = space.mesh().cells_per_axis();
    let dofs = space.dofs_per_axis();
    let mut axis_sums = [0u64; 3];
    for axis in 0..3 {
        let mut sum = 0u64;
        for a in 0..dofs[axis] {
            let (_, count) = window_1d(p, cells[axis], a);
            sum += count as u64;
        }
        axis_sums[axis] = sum;
    }
    9 * axis_sums[0] * axis_sums[1] * axis_sums[2]
}

/// Assembles the global stiffness matrix by explicit element matrices.
pub fn assemble_matrix(
    space: &FESpace,
    material: &MaterialField,
    rule: &QuadRule1D,
    geom: &GeometryFactors,
) -> Result<SparseMatrix> {
    let basis = Basis1D::new(space.order(), rule)?;
    let table = GradTable::build(&basis);
    let pattern = build_pattern(space);
    let mut matrix = pattern;

    let nloc = space.dofs_per_element();
    let nloc3 = 3 * nloc;
    let ns = space.scalar_ndof();
    let npts = geom.points_per_element();
    let n3 = table.num_dofs;
    debug_assert_eq!(n3, nloc);

    let mut kel = vec![0.0; nloc3 * nloc3];
    let mut gphys = vec![0.0; nloc * 3];

    for e in 0..space.num_elements() {
        kel.fill(0.0);
        for pt in 0..npts {
            let jinv = geom.jinv_at(e, pt);
            let wdet = geom.weight(pt) * geom.det_at(e, pt);
            // physical gradients of all scalar basis functions at pt
            let g = &table.g[pt * 3 * n3..(pt + 1) * 3 * n3];
            for i in 0..nloc {
                for j in 0..3 {
                    gphys[i * 3 + j] = jinv[j] * g[i]
                        + jinv[3 + j] * g[n3 + i]
                        + jinv[6 + j] * g[2 * n3 + i];
                }
            }
            match material.at(e, pt) {
                VoigtMaterial::Isotropic { lambda, mu } => {
                    accumulate_isotropic(&gphys, nloc, *lambda, *mu, wdet, &mut kel);
                }
                VoigtMaterial::Anisotropic { c } => {
                    accumulate_anisotropic(&gphys, nloc, c, wdet, &mut kel);
                }
            }
        }
        scatter_element_matrix(space, e, ns, nloc, &kel, &mut matrix);
    }
    Ok(matrix)
}

fn accumulate_isotropic(
    gphys: &[f64],
    nloc: usize,
    lambda: f64,
    mu: f64,
    wdet: f64,
    kel: &mut [f64],
) {
    let nloc3 = 3 * nloc;
    let wl = wdet * lambda;
    let wm = wdet * mu;
    for i in 0..nloc {
        let gi = &gphys[i * 3..i * 3 + 3];
        for j in i..nloc {
            let gj = &gphys[j * 3..j * 3 + 3];
            let dot = gi[0] * gj[0] + gi[1] * gj[1] + gi[2] * gj[2];
            for c in 0..3 {
                for d in 0..3 {
                    let mut v = wl * gi[c] * gj[d] + wm * gi[d] * gj[c];
                    if c == d {
                        v += wm * dot;
                    }
                    kel[(c * nloc + i) * nloc3 + d * nloc + j] += v;
                    if i != j {
                        kel[(d * nloc + j) * nloc3 + c * nloc + i] += v;
                    }
                }
            }
        }
    }
}

/// Strain-displacement column of basis function i, component c:
/// the three nonzero Voigt rows and their values.
#[inline]
fn b_column(g: &[f64], c: usize) -> [(usize, f64); 3] {
    match c {
        0 => [(0, g[0]), (4, g[2]), (5, g[1])],
        1 => [(1, g[1]), (3, g[2]), (5, g[0])],
        _ => [(2, g[2]), (3, g[1]), (4, g[0])],
    }
}

fn accumulate_anisotropic(
    gphys: &[f64],
    nloc: usize,
    cmat: &[[f64; 6]; 6],
    wdet: f64,
    kel: &mut [f64],
) {
    let nloc3 = 3 * nloc;
    for j in 0..nloc {
        let gj = &gphys[j * 3..j * 3 + 3];
        for d in 0..3 {
            let bj = b_column(gj, d);
            let mut t = [0.0; 6];
            for r in 0..6 {
                t[r] = cmat[r][bj[0].0] * bj[0].1
                    + cmat[r][bj[1].0] * bj[1].1
                    + cmat[r][bj[2].0] * bj[2].1;
            }
            for i in 0..nloc {
                let gi = &gphys[i * 3..i * 3 + 3];
                for c in 0..3 {
                    let bi = b_column(gi, c);
                    let v = wdet * (bi[0].1 * t[bi[0].0] + bi[1].1 * t[bi[1].0] + bi[2].1 * t[bi[2].0]);
                    kel[(c * nloc + i) * nloc3 + d * nloc + j] += v;
                }
            }
        }
    }
}

fn scatter_element_matrix(
    space: &FESpace,
    e: usize,
    ns: usize,
    nloc: usize,
    kel: &[f64],
    matrix: &mut SparseMatrix,
) {
    let nloc3 = 3 * nloc;
    let map = space.dof_map().element(e);
    for c in 0..3 {
        for i in 0..nloc {
            let row = c * ns + map[i];
            let lo = matrix.row_offsets[row];
            let hi = matrix.row_offsets[row + 1];
            let cols = &matrix.cols[lo..hi];
            for d in 0..3 {
                for j in 0..nloc {
                    let v = kel[(c * nloc + i) * nloc3 + d * nloc + j];
                    if v != 0.0 {
                        let col = d * ns + map[j];
                        let k = cols.binary_search(&col).expect("column in pattern");
                        matrix.vals[lo + k] += v;
                    }
                }
            }
        }
    }
}

/// CSR pattern of the lattice coupling structure, zero-valued.
fn build_pattern(space: &FESpace) -> SparseMatrix {
    let p = space.order();
    let cells = space.mesh().cells_per_axis();
    let [nx, ny, nz] = space.dofs_per_axis();
    let ns = space.scalar_ndof();
    let n = 3 * ns;

    let win_x: Vec<(usize, usize)> = (0..nx).map(|a| window_1d(p, cells[0], a)).collect();
    let win_y: Vec<(usize, usize)> = (0..ny).map(|a| window_1d(p, cells[1], a)).collect();
    let win_z: Vec<(usize, usize)> = (0..nz).map(|a| window_1d(p, cells[2], a)).collect();

    let mut row_offsets = vec![0usize; n + 1];
    for node in 0..ns {
        let ix = node % nx;
        let iy = (node / nx) % ny;
        let iz = node / (nx * ny);
        let count = 3 * win_x[ix].1 * win_y[iy].1 * win_z[iz].1;
        for c in 0..3 {
            row_offsets[c * ns + node + 1] = count;
        }
    }
    for i in 0..n {
        row_offsets[i + 1] += row_offsets[i];
    }
    let nnz = row_offsets[n];
    let mut cols = vec![0usize; nnz];
    for node in 0..ns {
        let ix = node % nx;
        let iy = (node / nx) % ny;
        let iz = node / (nx * ny);
        let (xlo, xc) = win_x[ix];
        let (ylo, yc) = win_y[iy];
        let (zlo, zc) = win_z[iz];
        // columns for one component row, reused for all three rows
        let mut entry = Vec::with_capacity(3 * xc * yc * zc);
        for d in 0..3 {
            for dz in 0..zc {
                for dy in 0..yc {
                    for dx in 0..xc {
                        let m = (zlo + dz) * ny * nx + (ylo + dy) * nx + xlo + dx;
                        entry.push(d * ns + m);
                    }
                }
            }
        }
        entry.sort_unstable();
        for c in 0..3 {
            let row = c * ns + node;
            let lo = row_offsets[row];
            cols[lo..lo + entry.len()].copy_from_slice(&entry);
        }
    }
    let vals = vec![0.0; nnz];
    SparseMatrix::from_csr(n, row_offsets, cols, vals)
}

/// The FA realization: assembled matrix behind the operator interface.
#[derive(Debug)]
pub struct FaOperator {
    pub(crate) matrix: SparseMatrix,
}

impl FaOperator {
    pub fn new(
        space: &FESpace,
        material: &MaterialField,
        rule: &QuadRule1D,
        geom: &GeometryFactors,
    ) -> Result<Self> {
        let matrix = assemble_matrix(space, material, rule, geom)?;
        Ok(FaOperator { matrix })
    }

    pub fn matrix(&self) -> &SparseMatrix {
        &self.matrix
    }

    pub fn matrix_mut(&mut self) -> &mut SparseMatrix {
        &mut self.matrix
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::mesh::CartesianMesh;
    use std::sync::Arc;

    fn setup(cells: usize, p: usize) -> (Arc<FESpace>, QuadRule1D, Arc<GeometryFactors>) {
        let mesh = Arc::new(CartesianMesh::unit_cube(cells).unwrap());
        let space = Arc::new(FESpace::new(mesh, p).unwrap());
        let rule = QuadRule1D::gauss_legendre(p + 1).unwrap();
        let geom = GeometryFactors::compute(&space, &rule).unwrap();
        (space, rule, geom)
    }

    #[test]
    fn pattern_matches_predicted_nnz() {
        for (cells, p) in [(1, 1), (2, 1), (2, 2), (3, 2), (1, 3)] {
            let (space, _, _) = setup(cells, p);
            let pattern = build_pattern(&space);
            assert_eq!(pattern.nnz() as u64, predicted_nnz(&space), "cells={cells} p={p}");
        }
    }

    #[test]
    fn hand_built_spmv() {
        // [[2, 1], [1, 2]] on (1, 1)
        let m = SparseMatrix::from_csr(2, vec![0, 2, 4], vec![0, 1, 0, 1], vec![2.0, 1.0, 1.0, 2.0]);
        let mut y = vec![0.0; 2];
        m.spmv(&[1.0, 1.0], &mut y).unwrap();
        assert_eq!(y, vec![3.0, 3.0]);
        assert!(m.spmv(&[1.0], &mut y).is_err());
        let mut y0 = vec![0.0; 2];
        m.spmv(&[0.0, 0.0], &mut y0).unwrap();
        assert_eq!(y0, vec![0.0, 0.0]);
    }

    #[test]
    fn rigid_translation_in_null_space() {
        let (space, rule, geom) = setup(1, 1);
        let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
        let op = FaOperator::new(&space, &mat, &rule, &geom).unwrap();
        let x = vec![1.0; space.vector_ndof()];
        let mut y = vec![0.0; space.vector_ndof()];
        op.matrix.spmv(&x, &mut y).unwrap();
        let norm_inf = op.matrix.max_abs();
        for v in &y {
            assert!(v.abs() <= 1e-12 * norm_inf);
        }
    }

    #[test]
    fn assembled_matrix_is_symmetric() {
        let (space, rule, geom) = setup(2, 2);
        let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
        let op = FaOperator::new(&space, &mat, &rule, &geom).unwrap();
        assert!(op.matrix.asymmetry() <= 1e-12 * op.matrix.max_abs());
    }

    #[test]
    fn dirichlet_elimination_sets_identity_rows() {
        let (space, rule, geom) = setup(1, 1);
        let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
        let mut op = FaOperator::new(&space, &mat, &rule, &geom).unwrap();
        let bc = space.boundary_dofs(&[crate::mesh::BoundaryFace::XMin], &[0, 1, 2]);
        op.matrix.apply_dirichlet(&bc);
        for &i in bc.indices() {
            let (cols, vals) = op.matrix.row(i);
            for (c, v) in cols.iter().zip(vals) {
                let expect = if *c == i { 1.0 } else { 0.0 };
                assert_eq!(*v, expect);
            }
        }
        assert!(op.matrix.asymmetry() <= 1e-12 * op.matrix.max_abs());
    }
}
