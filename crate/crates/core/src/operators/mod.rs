//! The three interchangeable realizations of the elasticity operator
//! action y += A(x): full assembly (FA), the baseline two-kernel partial
//! assembly (PA), and the fused sum-factorized kernel (PAop), plus exact
//! diagonal extraction, essential-BC wrapping, and analytic counters.
//!
//! All realizations are the same linear map on the same space; the
//! cross-variant tests hold them to 1e-12 of each other.

pub mod counters;
pub mod fa;
pub mod geometry;
pub mod pa;
pub mod paop;
pub mod sumfac;

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use crate::basis::{Basis1D, QuadRule1D};
use crate::material::{MaterialField, VoigtMaterial};
use crate::space::{element_colors, BcConstraint, FESpace};
use crate::{Error, Result};

pub use counters::{ApplyCost, CounterReport};
pub use fa::{predicted_fa_bytes, predicted_nnz, FaOperator, SparseMatrix};
pub use geometry::GeometryFactors;
pub use pa::PaStage;
pub use sumfac::{
    grad_transpose_via_table, grad_via_table, sumfac_grad, sumfac_grad_transpose, GradTable,
};

pub type Pool = Arc<rayon::ThreadPool>;

/// Something that acts like a square matrix.
pub trait LinearOp {
    fn dim(&self) -> usize;

    /// y += A x.
    fn apply_add(&self, x: &[f64], y: &mut [f64]);

    /// y = A x.
    fn apply(&self, x: &[f64], y: &mut [f64]) {
        y.fill(0.0);
        self.apply_add(x, y);
    }
}

/// Operator realization tag.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Variant {
    Fa,
    Pa,
    Paop,
}

impl Variant {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "fa" => Ok(Variant::Fa),
            "pa" => Ok(Variant::Pa),
            "paop" => Ok(Variant::Paop),
            _ => Err(Error::invalid(format!("unknown assembly variant `{s}`"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Variant::Fa => "fa",
            Variant::Pa => "pa",
            Variant::Paop => "paop",
        }
    }
}

pub(crate) enum Kind {
    Fa(fa::FaOperator),
    Pa(pa::PaData),
    Paop,
}

/// One realization of the elasticity operator.
pub struct ElasticOperator {
    pub(crate) kind: Kind,
    space: Arc<FESpace>,
    basis: Arc<Basis1D>,
    geom: Arc<GeometryFactors>,
    material: MaterialField,
    colors: [Vec<usize>; 8],
    pool: Option<Pool>,
    cost: ApplyCost,
    applications: AtomicU64,
    norm_est: OnceLock<f64>,
}

impl ElasticOperator {
    pub fn fa(space: Arc<FESpace>, material: MaterialField, rule: &QuadRule1D) -> Result<Self> {
        let geom = GeometryFactors::compute(&space, rule)?;
        let basis = Arc::new(Basis1D::new(space.order(), rule)?);
        let inner = fa::FaOperator::new(&space, &material, rule, &geom)?;
        let cost = counters::fa_cost(&inner.matrix);
        Ok(Self::assemble_parts(Kind::Fa(inner), space, basis, geom, material, cost))
    }

    pub fn pa(
        space: Arc<FESpace>,
        material: MaterialField,
        rule: &QuadRule1D,
        stage: PaStage,
    ) -> Result<Self> {
        let geom = GeometryFactors::compute(&space, rule)?;
        let basis = Arc::new(Basis1D::new(space.order(), rule)?);
        let data = pa::PaData::new(&space, &basis, &geom, stage);
        let cost = counters::pa_cost(&space, &basis, &geom, &material, stage, &data);
        Ok(Self::assemble_parts(Kind::Pa(data), space, basis, geom, material, cost))
    }

    pub fn paop(space: Arc<FESpace>, material: MaterialField, rule: &QuadRule1D) -> Result<Self> {
        let geom = GeometryFactors::compute(&space, rule)?;
        let basis = Arc::new(Basis1D::new(space.order(), rule)?);
        let cost = counters::paop_cost(&space, &basis, &geom, &material);
        Ok(Self::assemble_parts(Kind::Paop, space, basis, geom, material, cost))
    }

    /// Builds the requested variant (PA at its baseline stage).
    pub fn build(
        variant: Variant,
        space: Arc<FESpace>,
        material: MaterialField,
        rule: &QuadRule1D,
    ) -> Result<Self> {
        match variant {
            Variant::Fa => Self::fa(space, material, rule),
            Variant::Pa => Self::pa(space, material, rule, PaStage::Baseline),
            Variant::Paop => Self::paop(space, material, rule),
        }
    }

    fn assemble_parts(
        kind: Kind,
        space: Arc<FESpace>,
        basis: Arc<Basis1D>,
        geom: Arc<GeometryFactors>,
        material: MaterialField,
        cost: ApplyCost,
    ) -> Self {
        let colors = element_colors(space.mesh());
        ElasticOperator {
            kind,
            space,
            basis,
            geom,
            material,
            colors,
            pool: None,
            cost,
            applications: AtomicU64::new(0),
            norm_est: OnceLock::new(),
        }
    }

    pub fn with_pool(mut self, pool: Option<Pool>) -> Self {
        self.pool = pool;
        self
    }

    pub fn variant(&self) -> Variant {
        match &self.kind {
            Kind::Fa(_) => Variant::Fa,
            Kind::Pa(_) => Variant::Pa,
            Kind::Paop => Variant::Paop,
        }
    }

    /// Stage-qualified label for records ("fa", "pa", "pa+sumfac", ...).
    pub fn label(&self) -> &'static str {
        match &self.kind {
            Kind::Fa(_) => "fa",
            Kind::Pa(d) => match d.stage {
                PaStage::Baseline => "pa",
                PaStage::SumFactorized => "pa+sumfac",
                PaStage::SumFacVoigt => "pa+voigt",
            },
            Kind::Paop => "paop",
        }
    }

    pub fn space(&self) -> &Arc<FESpace> {
        &self.space
    }

    pub fn basis(&self) -> &Arc<Basis1D> {
        &self.basis
    }

    pub fn geometry(&self) -> &Arc<GeometryFactors> {
        &self.geom
    }

    pub fn material(&self) -> &MaterialField {
        &self.material
    }

    pub(crate) fn colors(&self) -> &[Vec<usize>; 8] {
        &self.colors
    }

    pub(crate) fn pool(&self) -> Option<&Pool> {
        self.pool.as_ref()
    }

    /// The assembled matrix, when this is the FA realization.
    pub fn matrix(&self) -> Option<&SparseMatrix> {
        match &self.kind {
            Kind::Fa(op) => Some(&op.matrix),
            _ => None,
        }
    }

    /// Exact diagonal of the operator before any BC wrapping.
    pub fn diagonal(&self) -> Vec<f64> {
        match &self.kind {
            Kind::Fa(op) => op.matrix.diagonal(),
            _ => assemble_diagonal(&self.space, &self.basis, &self.geom, &self.material),
        }
    }

    /// Cheap operator-scale estimate: the largest diagonal entry.
    pub fn norm_est(&self) -> f64 {
        *self.norm_est.get_or_init(|| {
            self.diagonal().iter().fold(0.0f64, |m, &v| m.max(v.abs()))
        })
    }

    /// Bytes of the variant-specific precomputed data: the CSR matrix for
    /// FA, dense gradient table plus the persistent stress intermediate
    /// for PA, 1D basis tables plus geometry factors for PAop.
    pub fn operator_bytes(&self) -> u64 {
        match &self.kind {
            Kind::Fa(op) => op.matrix.bytes(),
            Kind::Pa(d) => {
                d.gtable.as_ref().map_or(0, |t| t.bytes()) + (d.qvec_len() * 8) as u64
            }
            Kind::Paop => self.basis.table_bytes() as u64 + self.geom.bytes(),
        }
    }

    /// Counters accumulated since the last reset.
    pub fn counters(&self) -> Result<CounterReport> {
        let n = self.applications.load(Ordering::Relaxed);
        if n == 0 {
            return Err(Error::invalid(
                "counters requested before any operator application",
            ));
        }
        Ok(CounterReport {
            flops: self.cost.flops * n,
            bytes_model: self.cost.bytes * n,
            applications: n,
        })
    }

    pub fn reset_counters(&self) {
        self.applications.store(0, Ordering::Relaxed);
    }

    /// Modeled cost of a single application.
    pub fn apply_cost(&self) -> ApplyCost {
        self.cost
    }
}

impl LinearOp for ElasticOperator {
    fn dim(&self) -> usize {
        self.space.vector_ndof()
    }

    fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        assert_eq!(x.len(), self.dim());
        assert_eq!(y.len(), self.dim());
        self.applications.fetch_add(1, Ordering::Relaxed);
        match &self.kind {
            Kind::Fa(op) => op.matrix.spmv_add(x, y),
            Kind::Pa(_) => pa::apply_add(self, x, y),
            Kind::Paop => paop::apply_add(self, x, y),
        }
    }
}

/// Essential-BC wrapper: acts as Z A Z + (I - Z), i.e. identity on the
/// constrained DOFs and the interior operator on the free ones.
pub struct ConstrainedOperator {
    inner: Arc<ElasticOperator>,
    bc: Arc<BcConstraint>,
}

impl ConstrainedOperator {
    pub fn new(inner: Arc<ElasticOperator>, bc: Arc<BcConstraint>) -> Self {
        ConstrainedOperator { inner, bc }
    }

    pub fn inner(&self) -> &Arc<ElasticOperator> {
        &self.inner
    }

    pub fn bc(&self) -> &Arc<BcConstraint> {
        &self.bc
    }

    /// Diagonal of the wrapped operator (unit entries on constraints).
    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = self.inner.diagonal();
        for &i in self.bc.indices() {
            d[i] = 1.0;
        }
        d
    }

    pub fn norm_est(&self) -> f64 {
        self.inner.norm_est().max(1.0)
    }
}

impl LinearOp for ConstrainedOperator {
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        if self.bc.is_empty() {
            self.inner.apply_add(x, y);
            return;
        }
        let mut xt = x.to_vec();
        self.bc.zero_constrained(&mut xt);
        let mut yt = vec![0.0; x.len()];
        self.inner.apply_add(&xt, &mut yt);
        self.bc.zero_constrained(&mut yt);
        for (yi, ti) in y.iter_mut().zip(&yt) {
            *yi += ti;
        }
        for &i in self.bc.indices() {
            y[i] += x[i];
        }
    }
}

/// Exact diagonal of the unconstrained operator by per-element
/// accumulation of the quadrature formula (no global assembly).
pub fn assemble_diagonal(
    space: &FESpace,
    basis: &Basis1D,
    geom: &GeometryFactors,
    material: &MaterialField,
) -> Vec<f64> {
    let ns = space.scalar_ndof();
    let mut diag = vec![0.0; 3 * ns];
    let n = basis.ndof();
    let q = basis.num_points;
    let npts = geom.points_per_element();
    debug_assert_eq!(npts, q * q * q);

    for e in 0..space.num_elements() {
        let map = space.dof_map().element(e);
        for pt in 0..npts {
            let q1 = pt % q;
            let q2 = (pt / q) % q;
            let q3 = pt / (q * q);
            let jinv = geom.jinv_at(e, pt);
            let wdet = geom.weight(pt) * geom.det_at(e, pt);
            let mat = material.at(e, pt);
            for i3 in 0..n {
                let bz = basis.b[q3 * n + i3];
                let dz = basis.d[q3 * n + i3];
                for i2 in 0..n {
                    let by = basis.b[q2 * n + i2];
                    let dy = basis.d[q2 * n + i2];
                    for i1 in 0..n {
                        let bx = basis.b[q1 * n + i1];
                        let dx = basis.d[q1 * n + i1];
                        let gref = [dx * by * bz, bx * dy * bz, bx * by * dz];
                        let mut g = [0.0; 3];
                        for j in 0..3 {
                            g[j] = jinv[j] * gref[0] + jinv[3 + j] * gref[1] + jinv[6 + j] * gref[2];
                        }
                        let node = map[(i3 * n + i2) * n + i1];
                        match mat {
                            VoigtMaterial::Isotropic { lambda, mu } => {
                                let dot = g[0] * g[0] + g[1] * g[1] + g[2] * g[2];
                                for c in 0..3 {
                                    let v = (lambda + mu) * g[c] * g[c] + mu * dot;
                                    diag[c * ns + node] += wdet * v;
                                }
                            }
                            VoigtMaterial::Anisotropic { c: cm } => {
                                for c in 0..3 {
                                    let bcol = fa_b_column(&g, c);
                                    let mut v = 0.0;
                                    for &(r1, b1) in &bcol {
                                        for &(r2, b2) in &bcol {
                                            v += b1 * cm[r1][r2] * b2;
                                        }
                                    }
                                    diag[c * ns + node] += wdet * v;
                                }
                            }
                        }
                    }
                }
            }
        }
    }
    diag
}

#[inline]
fn fa_b_column(g: &[f64; 3], c: usize) -> [(usize, f64); 3] {
    match c {
        0 => [(0, g[0]), (4, g[2]), (5, g[1])],
        1 => [(1, g[1]), (3, g[2]), (5, g[0])],
        _ => [(2, g[2]), (3, g[1]), (4, g[0])],
    }
}

/// Physical displacement gradient from reference derivatives:
/// grad[c][j] = sum_m r[c][m] Jinv[m][j].
#[inline]
pub(crate) fn physical_gradient(r: &[[f64; 3]; 3], jinv: &[f64; 9]) -> [[f64; 3]; 3] {
    let mut g = [[0.0; 3]; 3];
    for c in 0..3 {
        for j in 0..3 {
            g[c][j] =
                r[c][0] * jinv[j] + r[c][1] * jinv[3 + j] + r[c][2] * jinv[6 + j];
        }
    }
    g
}

/// Geometric transform of the stress for the output contraction:
/// Q[m][c] = wdet sum_j Jinv[m][j] sigma[j][c], the partner of
/// d(phi)/d(xi_m) for test component c. This is the contraction order the
/// weak form produces; with symmetric sigma it is w det J (J^-1 sigma).
#[inline]
pub(crate) fn transform_stress(sigma: &[[f64; 3]; 3], jinv: &[f64; 9], wdet: f64) -> [[f64; 3]; 3] {
    let mut qm = [[0.0; 3]; 3];
    for m in 0..3 {
        for c in 0..3 {
            qm[m][c] = wdet
                * (jinv[3 * m] * sigma[0][c]
                    + jinv[3 * m + 1] * sigma[1][c]
                    + jinv[3 * m + 2] * sigma[2][c]);
        }
    }
    qm
}

/// Raw shared output used inside colored element loops; the 8-coloring
/// guarantees concurrently processed elements touch disjoint entries.
#[derive(Clone, Copy)]
pub(crate) struct SendPtr(pub *mut f64);
unsafe impl Send for SendPtr {}
unsafe impl Sync for SendPtr {}

impl SendPtr {
    /// Safety: callers must guarantee disjoint indices across threads.
    #[inline]
    pub unsafe fn add_assign(&self, idx: usize, v: f64) {
        *self.0.add(idx) += v;
    }
}

/// Runs `f` for every element, color class by color class; elements
/// within a class run in parallel when a pool is configured.
pub(crate) fn for_elements_colored<S: Send>(
    pool: Option<&Pool>,
    colors: &[Vec<usize>; 8],
    make_scratch: impl Fn() -> S + Sync,
    f: impl Fn(&mut S, usize) + Sync,
) {
    match pool {
        None => {
            let mut scratch = make_scratch();
            for class in colors {
                for &e in class {
                    f(&mut scratch, e);
                }
            }
        }
        Some(p) => p.install(|| {
            use rayon::prelude::*;
            for class in colors {
                class
                    .par_iter()
                    .for_each_init(&make_scratch, |s, &e| f(s, e));
            }
        }),
    }
}

