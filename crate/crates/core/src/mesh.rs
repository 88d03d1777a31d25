//! Axis-aligned structured hexahedral meshes on a box domain with a
//! nested uniform-refinement hierarchy.
//!
//! Cells and vertices are numbered lexicographically, x fastest. All
//! cells of a mesh are congruent axis-aligned boxes, so the element
//! Jacobian is constant and diagonal; downstream kernels nevertheless
//! consume the geometry through the general per-quadrature-point path.

use crate::{Error, Result};

/// One of the six faces of the box domain.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum BoundaryFace {
    XMin,
    XMax,
    YMin,
    YMax,
    ZMin,
    ZMax,
}

impl BoundaryFace {
    pub const ALL: [BoundaryFace; 6] = [
        BoundaryFace::XMin,
        BoundaryFace::XMax,
        BoundaryFace::YMin,
        BoundaryFace::YMax,
        BoundaryFace::ZMin,
        BoundaryFace::ZMax,
    ];

    /// Axis normal to the face (0 = x, 1 = y, 2 = z).
    pub fn axis(self) -> usize {
        match self {
            BoundaryFace::XMin | BoundaryFace::XMax => 0,
            BoundaryFace::YMin | BoundaryFace::YMax => 1,
            BoundaryFace::ZMin | BoundaryFace::ZMax => 2,
        }
    }

    /// True for the faces at the low end of their axis.
    pub fn is_min(self) -> bool {
        matches!(
            self,
            BoundaryFace::XMin | BoundaryFace::YMin | BoundaryFace::ZMin
        )
    }

    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "xmin" | "x-min" => Ok(BoundaryFace::XMin),
            "xmax" | "x-max" => Ok(BoundaryFace::XMax),
            "ymin" | "y-min" => Ok(BoundaryFace::YMin),
            "ymax" | "y-max" => Ok(BoundaryFace::YMax),
            "zmin" | "z-min" => Ok(BoundaryFace::ZMin),
            "zmax" | "z-max" => Ok(BoundaryFace::ZMax),
            _ => Err(Error::invalid(format!("unknown boundary face `{s}`"))),
        }
    }
}

/// Structured hexahedral mesh of an axis-aligned box.
#[derive(Clone, Debug)]
pub struct CartesianMesh {
    extents: [f64; 3],
    cells_per_axis: [usize; 3],
    level: u32,
}

impl CartesianMesh {
    /// Builds a level-0 mesh of `cells_per_axis` congruent boxes on
    /// `[0, extents.0] x [0, extents.1] x [0, extents.2]`.
    pub fn new(extents: [f64; 3], cells_per_axis: [usize; 3]) -> Result<Self> {
        for (k, &e) in extents.iter().enumerate() {
            if !(e > 0.0) || !e.is_finite() {
                return Err(Error::invalid(format!(
                    "extent along axis {k} must be positive, got {e}"
                )));
            }
        }
        for (k, &n) in cells_per_axis.iter().enumerate() {
            if n == 0 {
                return Err(Error::invalid(format!("zero cell count along axis {k}")));
            }
        }
        Ok(CartesianMesh {
            extents,
            cells_per_axis,
            level: 0,
        })
    }

    /// Unit cube convenience constructor.
    pub fn unit_cube(cells_per_axis: usize) -> Result<Self> {
        CartesianMesh::new([1.0; 3], [cells_per_axis; 3])
    }

    /// New mesh with every cell split 2x2x2; the level counter is
    /// incremented and extents are unchanged. Coarse vertices are a
    /// subset of fine vertices (cell-size halving is exact in binary).
    pub fn refine_uniform(&self) -> CartesianMesh {
        CartesianMesh {
            extents: self.extents,
            cells_per_axis: [
                2 * self.cells_per_axis[0],
                2 * self.cells_per_axis[1],
                2 * self.cells_per_axis[2],
            ],
            level: self.level + 1,
        }
    }

    pub fn extents(&self) -> [f64; 3] {
        self.extents
    }

    pub fn cells_per_axis(&self) -> [usize; 3] {
        self.cells_per_axis
    }

    pub fn level(&self) -> u32 {
        self.level
    }

    pub fn num_cells(&self) -> usize {
        self.cells_per_axis.iter().product()
    }

    pub fn num_vertices(&self) -> usize {
        self.cells_per_axis.iter().map(|&n| n + 1).product()
    }

    /// Cell edge lengths (the diagonal of the constant element Jacobian).
    pub fn cell_size(&self) -> [f64; 3] {
        [
            self.extents[0] / self.cells_per_axis[0] as f64,
            self.extents[1] / self.cells_per_axis[1] as f64,
            self.extents[2] / self.cells_per_axis[2] as f64,
        ]
    }

    /// Largest cell edge length.
    pub fn h_max(&self) -> f64 {
        let h = self.cell_size();
        h[0].max(h[1]).max(h[2])
    }

    /// Decomposes a lexicographic cell index (x fastest) into (cx, cy, cz).
    pub fn cell_coords(&self, cell: usize) -> [usize; 3] {
        let [nx, ny, _] = self.cells_per_axis;
        [cell % nx, (cell / nx) % ny, cell / (nx * ny)]
    }

    /// The 8 corner coordinates of a cell, lexicographic (x fastest).
    pub fn cell_corners(&self, cell: usize) -> [[f64; 3]; 8] {
        let c = self.cell_coords(cell);
        let h = self.cell_size();
        let mut corners = [[0.0; 3]; 8];
        for k in 0..8 {
            let d = [k & 1, (k >> 1) & 1, (k >> 2) & 1];
            for a in 0..3 {
                corners[k][a] = (c[a] + d[a]) as f64 * h[a];
            }
        }
        corners
    }

    /// Number of exterior quadrilateral faces, 2(nx ny + ny nz + nx nz).
    pub fn num_exterior_faces(&self) -> usize {
        let [nx, ny, nz] = self.cells_per_axis;
        2 * (nx * ny + ny * nz + nx * nz)
    }

    /// True if `fine` is exactly `self.refine_uniform()` geometry-wise.
    pub fn is_refinement_of(&self, coarse: &CartesianMesh) -> bool {
        self.extents == coarse.extents
            && self.cells_per_axis[0] == 2 * coarse.cells_per_axis[0]
            && self.cells_per_axis[1] == 2 * coarse.cells_per_axis[1]
            && self.cells_per_axis[2] == 2 * coarse.cells_per_axis[2]
    }
}
