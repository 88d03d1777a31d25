//! Vector-valued H1 space on a Cartesian mesh: global DOF numbering,
//! element gather/scatter, essential-boundary DOF lists, and the
//! inter-level prolongation/restriction used by the multigrid hierarchy.
//!
//! Scalar DOFs live on the tensor lattice of `p*cells + 1` points per
//! axis (Gauss-Lobatto points inside each cell), numbered
//! lexicographically with x fastest. The vector layout is
//! component-blocked: all x components, then all y, then all z.

use std::sync::Arc;

use crate::basis::gauss_lobatto_nodes;
use crate::mesh::{BoundaryFace, CartesianMesh};
use crate::{Error, Result};

/// Scalar-DOF indices of every element, element-lexicographic order.
#[derive(Clone, Debug)]
pub struct ElementDofMap {
    pub dofs_per_element: usize,
    indices: Vec<usize>,
}

impl ElementDofMap {
    pub fn element(&self, e: usize) -> &[usize] {
        let n = self.dofs_per_element;
        &self.indices[e * n..(e + 1) * n]
    }

    pub fn bytes(&self) -> usize {
        self.indices.len() * std::mem::size_of::<usize>()
    }
}

/// Vector-valued finite element space of order `p` (vdim = 3).
#[derive(Clone, Debug)]
pub struct FESpace {
    mesh: Arc<CartesianMesh>,
    order: usize,
    dofs_per_axis: [usize; 3],
    /// Gauss-Lobatto node positions on the reference interval [0, 1].
    ref_nodes: Vec<f64>,
    dof_map: Arc<ElementDofMap>,
}

impl FESpace {
    pub fn new(mesh: Arc<CartesianMesh>, p: usize) -> Result<Self> {
        if p == 0 {
            return Err(Error::invalid("space order must be at least 1"));
        }
        let cells = mesh.cells_per_axis();
        let dofs_per_axis = [
            p * cells[0] + 1,
            p * cells[1] + 1,
            p * cells[2] + 1,
        ];
        let ref_nodes = gauss_lobatto_nodes(p)?;
        let dof_map = Arc::new(build_dof_map(&mesh, p, dofs_per_axis));
        Ok(FESpace {
            mesh,
            order: p,
            dofs_per_axis,
            ref_nodes,
            dof_map,
        })
    }

    pub fn mesh(&self) -> &Arc<CartesianMesh> {
        &self.mesh
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn vdim(&self) -> usize {
        3
    }

    pub fn dofs_per_axis(&self) -> [usize; 3] {
        self.dofs_per_axis
    }

    pub fn scalar_ndof(&self) -> usize {
        self.dofs_per_axis.iter().product()
    }

    pub fn vector_ndof(&self) -> usize {
        3 * self.scalar_ndof()
    }

    pub fn num_elements(&self) -> usize {
        self.mesh.num_cells()
    }

    /// Scalar DOFs per element, (p+1)^3.
    pub fn dofs_per_element(&self) -> usize {
        let n = self.order + 1;
        n * n * n
    }

    pub fn dof_map(&self) -> &Arc<ElementDofMap> {
        &self.dof_map
    }

    pub fn ref_nodes(&self) -> &[f64] {
        &self.ref_nodes
    }

    /// Physical coordinate of a 1D lattice node along `axis`.
    pub fn node_coord_1d(&self, axis: usize, idx: usize) -> f64 {
        let p = self.order;
        let cells = self.mesh.cells_per_axis()[axis];
        let h = self.mesh.cell_size()[axis];
        let cell = (idx / p).min(cells - 1);
        let local = idx - cell * p;
        (cell as f64 + self.ref_nodes[local]) * h
    }

    /// Physical coordinates of a scalar lattice node.
    pub fn node_coords(&self, scalar_idx: usize) -> [f64; 3] {
        let [nx, ny, _] = self.dofs_per_axis;
        let ix = scalar_idx % nx;
        let iy = (scalar_idx / nx) % ny;
        let iz = scalar_idx / (nx * ny);
        [
            self.node_coord_1d(0, ix),
            self.node_coord_1d(1, iy),
            self.node_coord_1d(2, iz),
        ]
    }

    /// Local element vector of `x` (length 3 (p+1)^3, component-blocked).
    pub fn gather(&self, element: usize, x: &[f64], local: &mut [f64]) {
        debug_assert_eq!(x.len(), self.vector_ndof());
        let nloc = self.dofs_per_element();
        debug_assert_eq!(local.len(), 3 * nloc);
        let ns = self.scalar_ndof();
        let map = self.dof_map.element(element);
        for c in 0..3 {
            let base = c * ns;
            let lbase = c * nloc;
            for (l, &g) in map.iter().enumerate() {
                local[lbase + l] = x[base + g];
            }
        }
    }

    /// Adjoint of [`FESpace::gather`]: accumulates local values into `y`.
    pub fn scatter_add(&self, element: usize, local: &[f64], y: &mut [f64]) {
        debug_assert_eq!(y.len(), self.vector_ndof());
        let nloc = self.dofs_per_element();
        debug_assert_eq!(local.len(), 3 * nloc);
        let ns = self.scalar_ndof();
        let map = self.dof_map.element(element);
        for c in 0..3 {
            let base = c * ns;
            let lbase = c * nloc;
            for (l, &g) in map.iter().enumerate() {
                y[base + g] += local[lbase + l];
            }
        }
    }

    /// Constrained vector DOFs on the selected faces and components.
    pub fn boundary_dofs(&self, faces: &[BoundaryFace], components: &[usize]) -> BcConstraint {
        let [nx, ny, nz] = self.dofs_per_axis;
        let ns = self.scalar_ndof();
        let mut dofs = Vec::new();
        let mut on_face = vec![false; ns];
        for &face in faces {
            let axis = face.axis();
            let last = [nx - 1, ny - 1, nz - 1][axis];
            let target = if face.is_min() { 0 } else { last };
            for iz in 0..nz {
                for iy in 0..ny {
                    for ix in 0..nx {
                        let idx = [ix, iy, iz];
                        if idx[axis] == target {
                            on_face[ix + nx * (iy + ny * iz)] = true;
                        }
                    }
                }
            }
        }
        for (node, &hit) in on_face.iter().enumerate() {
            if hit {
                for &c in components {
                    dofs.push(c * ns + node);
                }
            }
        }
        dofs.sort_unstable();
        dofs.dedup();
        BcConstraint::new(dofs, self.vector_ndof())
    }

    /// Scalar lattice nodes lying on the union of all six faces.
    pub fn num_boundary_nodes(&self) -> usize {
        let [nx, ny, nz] = self.dofs_per_axis;
        nx * ny * nz - (nx - 2) * (ny - 2) * (nz - 2)
    }
}

fn build_dof_map(mesh: &CartesianMesh, p: usize, dofs_per_axis: [usize; 3]) -> ElementDofMap {
    let [nxd, nyd, _] = dofs_per_axis;
    let n1 = p + 1;
    let nloc = n1 * n1 * n1;
    let nelem = mesh.num_cells();
    let mut indices = vec![0usize; nelem * nloc];
    for e in 0..nelem {
        let [ex, ey, ez] = mesh.cell_coords(e);
        let out = &mut indices[e * nloc..(e + 1) * nloc];
        let mut l = 0;
        for i3 in 0..n1 {
            let gz = ez * p + i3;
            for i2 in 0..n1 {
                let gy = ey * p + i2;
                let row = (gz * nyd + gy) * nxd + ex * p;
                for i1 in 0..n1 {
                    out[l] = row + i1;
                    l += 1;
                }
            }
        }
    }
    ElementDofMap {
        dofs_per_element: nloc,
        indices,
    }
}

/// Partitions elements into 8 classes by cell-coordinate parity; elements
/// of one class share no DOFs, so they may be processed concurrently with
/// direct scatter-add.
pub fn element_colors(mesh: &CartesianMesh) -> [Vec<usize>; 8] {
    let mut colors: [Vec<usize>; 8] = Default::default();
    for e in 0..mesh.num_cells() {
        let [ex, ey, ez] = mesh.cell_coords(e);
        colors[(ex % 2) + 2 * (ey % 2) + 4 * (ez % 2)].push(e);
    }
    colors
}

/// Sorted list of constrained global vector-DOF indices.
#[derive(Clone, Debug, Default)]
pub struct BcConstraint {
    indices: Vec<usize>,
    mask: Vec<bool>,
}

impl BcConstraint {
    pub fn new(mut indices: Vec<usize>, ndof: usize) -> Self {
        indices.sort_unstable();
        indices.dedup();
        debug_assert!(indices.last().map_or(true, |&i| i < ndof));
        let mut mask = vec![false; ndof];
        for &i in &indices {
            mask[i] = true;
        }
        BcConstraint { indices, mask }
    }

    pub fn empty(ndof: usize) -> Self {
        BcConstraint {
            indices: Vec::new(),
            mask: vec![false; ndof],
        }
    }

    pub fn indices(&self) -> &[usize] {
        &self.indices
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    pub fn is_constrained(&self, dof: usize) -> bool {
        self.mask[dof]
    }

    /// Zeroes the constrained entries of `v`.
    pub fn zero_constrained(&self, v: &mut [f64]) {
        for &i in &self.indices {
            v[i] = 0.0;
        }
    }
}

/// 1D interpolation stencils of one axis of the transfer operator: each
/// fine lattice node interpolates from the p+1 nodes of its containing
/// coarse cell.
#[derive(Clone, Debug)]
struct Stencil1D {
    /// First coarse 1D index of each fine node's stencil.
    start: Vec<usize>,
    /// (p+1) weights per fine node, row-major.
    weights: Vec<f64>,
    width: usize,
    coarse_n: usize,
    fine_n: usize,
}

impl Stencil1D {
    fn build(p: usize, coarse_cells: usize, ref_nodes: &[f64], bary_eval: &dyn Fn(f64) -> Vec<f64>) -> Self {
        let fine_cells = 2 * coarse_cells;
        let fine_n = p * fine_cells + 1;
        let coarse_n = p * coarse_cells + 1;
        let width = p + 1;
        let mut start = vec![0usize; fine_n];
        let mut weights = vec![0.0; fine_n * width];
        for a in 0..fine_n {
            let fc = (a / p).min(fine_cells - 1);
            let j = a - fc * p;
            let cc = fc / 2;
            // reference coordinate inside the coarse cell; exact dyadic
            // arithmetic so coincident nodes produce exact unit weights
            let xi = 0.5 * ((fc % 2) as f64 + ref_nodes[j]);
            let vals = bary_eval(xi);
            start[a] = cc * p;
            weights[a * width..(a + 1) * width].copy_from_slice(&vals);
        }
        Stencil1D {
            start,
            weights,
            width,
            coarse_n,
            fine_n,
        }
    }

    /// out[f] = sum_i w[f][i] * input[start[f] + i] along one axis.
    fn row(&self, f: usize) -> (usize, &[f64]) {
        (self.start[f], &self.weights[f * self.width..(f + 1) * self.width])
    }
}

/// Inter-level transfer: nodal interpolation from a coarse space to its
/// uniform refinement, applied component-wise; restriction is the
/// transpose. Stored as precomputed per-axis stencils (the 3D stencil is
/// their tensor product) and applied in three staged passes.
#[derive(Clone, Debug)]
pub struct Prolongation {
    stencils: [Stencil1D; 3],
    coarse_scalar: usize,
    fine_scalar: usize,
}

impl Prolongation {
    pub fn new(coarse: &FESpace, fine: &FESpace) -> Result<Self> {
        if coarse.order() != fine.order() {
            return Err(Error::invalid("transfer requires equal orders"));
        }
        if !fine.mesh().is_refinement_of(coarse.mesh()) {
            return Err(Error::invalid(
                "fine space is not the uniform refinement of the coarse space",
            ));
        }
        let p = coarse.order();
        let nodes = coarse.ref_nodes().to_vec();
        let rule_nodes = nodes.clone();
        let eval = move |x: f64| -> Vec<f64> {
            // Lagrange cardinal values at x on the reference nodes
            lagrange_values(&rule_nodes, x)
        };
        let cells = coarse.mesh().cells_per_axis();
        let stencils = [
            Stencil1D::build(p, cells[0], &nodes, &eval),
            Stencil1D::build(p, cells[1], &nodes, &eval),
            Stencil1D::build(p, cells[2], &nodes, &eval),
        ];
        Ok(Prolongation {
            stencils,
            coarse_scalar: coarse.scalar_ndof(),
            fine_scalar: fine.scalar_ndof(),
        })
    }

    pub fn coarse_ndof(&self) -> usize {
        3 * self.coarse_scalar
    }

    pub fn fine_ndof(&self) -> usize {
        3 * self.fine_scalar
    }

    /// fine = P coarse (component-wise nodal interpolation).
    pub fn apply(&self, coarse: &[f64], fine: &mut [f64]) {
        debug_assert_eq!(coarse.len(), 3 * self.coarse_scalar);
        debug_assert_eq!(fine.len(), 3 * self.fine_scalar);
        let [sx, sy, sz] = &self.stencils;
        let (cx, cy, cz) = (sx.coarse_n, sy.coarse_n, sz.coarse_n);
        let (fx, fy, fz) = (sx.fine_n, sy.fine_n, sz.fine_n);
        let mut t1 = vec![0.0; fx * cy * cz];
        let mut t2 = vec![0.0; fx * fy * cz];
        for c in 0..3 {
            let input = &coarse[c * self.coarse_scalar..(c + 1) * self.coarse_scalar];
            let out = &mut fine[c * self.fine_scalar..(c + 1) * self.fine_scalar];
            // x pass
            for izy in 0..cy * cz {
                let src = &input[izy * cx..(izy + 1) * cx];
                let dst = &mut t1[izy * fx..(izy + 1) * fx];
                for f in 0..fx {
                    let (s0, w) = sx.row(f);
                    let mut acc = 0.0;
                    for (i, &wi) in w.iter().enumerate() {
                        acc += wi * src[s0 + i];
                    }
                    dst[f] = acc;
                }
            }
            // y pass
            for iz in 0..cz {
                for f in 0..fy {
                    let (s0, w) = sy.row(f);
                    for ix in 0..fx {
                        let mut acc = 0.0;
                        for (i, &wi) in w.iter().enumerate() {
                            acc += wi * t1[(iz * cy + s0 + i) * fx + ix];
                        }
                        t2[(iz * fy + f) * fx + ix] = acc;
                    }
                }
            }
            // z pass
            for f in 0..fz {
                let (s0, w) = sz.row(f);
                for iyx in 0..fy * fx {
                    let mut acc = 0.0;
                    for (i, &wi) in w.iter().enumerate() {
                        acc += wi * t2[(s0 + i) * fy * fx + iyx];
                    }
                    out[f * fy * fx + iyx] = acc;
                }
            }
        }
    }

    /// coarse = P^T fine (the Galerkin-consistent restriction).
    pub fn apply_transpose(&self, fine: &[f64], coarse: &mut [f64]) {
        debug_assert_eq!(coarse.len(), 3 * self.coarse_scalar);
        debug_assert_eq!(fine.len(), 3 * self.fine_scalar);
        let [sx, sy, sz] = &self.stencils;
        let (cx, cy, cz) = (sx.coarse_n, sy.coarse_n, sz.coarse_n);
        let (fx, fy, fz) = (sx.fine_n, sy.fine_n, sz.fine_n);
        let mut t2 = vec![0.0; fx * fy * cz];
        let mut t1 = vec![0.0; fx * cy * cz];
        for c in 0..3 {
            let input = &fine[c * self.fine_scalar..(c + 1) * self.fine_scalar];
            let out = &mut coarse[c * self.coarse_scalar..(c + 1) * self.coarse_scalar];
            out.fill(0.0);
            t2.fill(0.0);
            t1.fill(0.0);
            // z pass (transposed)
            for f in 0..fz {
                let (s0, w) = sz.row(f);
                for iyx in 0..fy * fx {
                    let v = input[f * fy * fx + iyx];
                    for (i, &wi) in w.iter().enumerate() {
                        t2[(s0 + i) * fy * fx + iyx] += wi * v;
                    }
                }
            }
            // y pass (transposed)
            for iz in 0..cz {
                for f in 0..fy {
                    let (s0, w) = sy.row(f);
                    for ix in 0..fx {
                        let v = t2[(iz * fy + f) * fx + ix];
                        for (i, &wi) in w.iter().enumerate() {
                            t1[(iz * cy + s0 + i) * fx + ix] += wi * v;
                        }
                    }
                }
            }
            // x pass (transposed)
            for izy in 0..cy * cz {
                let dst = &mut out[izy * cx..(izy + 1) * cx];
                let src = &t1[izy * fx..(izy + 1) * fx];
                for f in 0..fx {
                    let (s0, w) = sx.row(f);
                    let v = src[f];
                    for (i, &wi) in w.iter().enumerate() {
                        dst[s0 + i] += wi * v;
                    }
                }
            }
        }
    }
}

fn lagrange_values(nodes: &[f64], x: f64) -> Vec<f64> {
    let n = nodes.len();
    let mut vals = vec![0.0; n];
    if let Some(k) = nodes.iter().position(|&xn| (x - xn).abs() < 1e-14) {
        vals[k] = 1.0;
        return vals;
    }
    let mut bary = vec![1.0; n];
    for i in 0..n {
        for j in 0..n {
            if j != i {
                bary[i] /= nodes[i] - nodes[j];
            }
        }
    }
    let mut s = 0.0;
    for i in 0..n {
        vals[i] = bary[i] / (x - nodes[i]);
        s += vals[i];
    }
    for v in vals.iter_mut() {
        *v /= s;
    }
    vals
}
