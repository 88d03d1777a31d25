//! Geometric multigrid: matrix-free smoothing on fine levels, an
//! assembled constrained matrix on the coarsest.

use std::sync::Arc;

use crate::basis::QuadRule1D;
use crate::material::{MaterialField, VoigtMaterial};
use crate::mesh::{BoundaryFace, CartesianMesh};
use crate::operators::{
    ConstrainedOperator, ElasticOperator, LinearOp, PaStage, Pool, Variant,
};
use crate::space::{BcConstraint, FESpace, Prolongation};
use crate::{Error, Result};

use super::cg::Preconditioner;
use super::chebyshev::ChebyshevSmoother;
use super::coarse::CoarseSolver;
use super::power::power_iteration_lambda_max;

#[derive(Clone, Debug)]
pub struct GmgConfig {
    pub chebyshev_order: usize,
    pub smooth_steps: usize,
    /// Damped interval as fractions of the lambda_max estimate.
    pub interval: (f64, f64),
    pub power_iterations: usize,
    pub seed: u64,
    /// Coarse problems up to this many DOFs get a dense factorization.
    pub coarse_dense_cap: usize,
    /// Operator realization used on the fine levels.
    pub fine_variant: Variant,
    /// Kernel stage when the fine variant is PA.
    pub pa_stage: PaStage,
}

impl Default for GmgConfig {
    fn default() -> Self {
        GmgConfig {
            chebyshev_order: 3,
            smooth_steps: 1,
            interval: (0.1, 1.1),
            power_iterations: 10,
            seed: 0,
            coarse_dense_cap: 6000,
            fine_variant: Variant::Paop,
            pa_stage: PaStage::Baseline,
        }
    }
}

/// V-cycle preconditioner over a nested refinement hierarchy,
/// coarsest level first.
pub struct GmgPreconditioner {
    spaces: Vec<Arc<FESpace>>,
    bcs: Vec<Arc<BcConstraint>>,
    /// Constrained operators of levels 1.. (index shifted by one).
    ops: Vec<Arc<ConstrainedOperator>>,
    smoothers: Vec<ChebyshevSmoother>,
    /// transfers[l] maps level l to level l+1.
    transfers: Vec<Prolongation>,
    coarse: CoarseSolver,
    smooth_steps: usize,
}

/// Builds the hierarchy by refining `base_mesh` `levels - 1` times; the
/// boundary constraint is re-derived geometrically on every level.
pub fn build_gmg(
    base_mesh: Arc<CartesianMesh>,
    levels: usize,
    p: usize,
    material: VoigtMaterial,
    bc_faces: &[BoundaryFace],
    bc_components: &[usize],
    config: &GmgConfig,
    pool: Option<Pool>,
) -> Result<GmgPreconditioner> {
    if levels < 2 {
        return Err(Error::invalid("multigrid needs at least 2 levels"));
    }
    let rule = QuadRule1D::gauss_legendre(p + 1)?;

    let mut meshes = vec![base_mesh];
    for _ in 1..levels {
        let next = Arc::new(meshes.last().unwrap().refine_uniform());
        meshes.push(next);
    }
    let mut spaces = Vec::with_capacity(levels);
    for mesh in &meshes {
        spaces.push(Arc::new(FESpace::new(mesh.clone(), p)?));
    }
    let bcs: Vec<Arc<BcConstraint>> = spaces
        .iter()
        .map(|s| Arc::new(s.boundary_dofs(bc_faces, bc_components)))
        .collect();

    // coarsest level: explicit assembly, constrained, factorized
    let coarse_fa = ElasticOperator::fa(
        spaces[0].clone(),
        MaterialField::Constant(material.clone()),
        &rule,
    )?;
    let mut coarse_matrix = coarse_fa.matrix().unwrap().clone();
    coarse_matrix.apply_dirichlet(&bcs[0]);
    let coarse = CoarseSolver::new(coarse_matrix, config.coarse_dense_cap)
        .map_err(|e| Error::Solver(format!("level 0: {e}")))?;

    // fine levels: matrix-free operators with Chebyshev smoothers
    let mut ops = Vec::with_capacity(levels - 1);
    let mut smoothers = Vec::with_capacity(levels - 1);
    for l in 1..levels {
        let mat = MaterialField::Constant(material.clone());
        let op = match config.fine_variant {
            Variant::Fa => ElasticOperator::fa(spaces[l].clone(), mat, &rule)?,
            Variant::Pa => ElasticOperator::pa(spaces[l].clone(), mat, &rule, config.pa_stage)?,
            Variant::Paop => ElasticOperator::paop(spaces[l].clone(), mat, &rule)?,
        }
        .with_pool(pool.clone());
        let wrapped = Arc::new(ConstrainedOperator::new(Arc::new(op), bcs[l].clone()));
        let diag = wrapped.diagonal();
        let inv_diag: Vec<f64> = diag.iter().map(|&d| 1.0 / d).collect();
        let lambda = power_iteration_lambda_max(
            wrapped.as_ref(),
            &inv_diag,
            config.power_iterations,
            config.seed.wrapping_add(l as u64),
        )
        .map_err(|e| Error::Solver(format!("level {l}: {e}")))?;
        let smoother = ChebyshevSmoother::new(
            wrapped.clone() as Arc<dyn LinearOp>,
            inv_diag,
            lambda,
            config.chebyshev_order,
            config.interval.0,
            config.interval.1,
        )?;
        ops.push(wrapped);
        smoothers.push(smoother);
    }

    let mut transfers = Vec::with_capacity(levels - 1);
    for l in 0..levels - 1 {
        transfers.push(Prolongation::new(&spaces[l], &spaces[l + 1])?);
    }

    Ok(GmgPreconditioner {
        spaces,
        bcs,
        ops,
        smoothers,
        transfers,
        coarse,
        smooth_steps: config.smooth_steps,
    })
}

impl GmgPreconditioner {
    pub fn num_levels(&self) -> usize {
        self.spaces.len()
    }

    pub fn space(&self, level: usize) -> &Arc<FESpace> {
        &self.spaces[level]
    }

    pub fn finest_space(&self) -> &Arc<FESpace> {
        self.spaces.last().unwrap()
    }

    /// The constrained operator of a fine level (level >= 1).
    pub fn level_operator(&self, level: usize) -> &Arc<ConstrainedOperator> {
        &self.ops[level - 1]
    }

    pub fn coarse_is_direct(&self) -> bool {
        self.coarse.is_direct()
    }

    pub fn coarse_ndof(&self) -> usize {
        self.coarse.dim()
    }

    /// One V-cycle from a zero initial guess; identity action on the
    /// constrained DOFs of the finest level.
    pub fn vcycle(&self, b: &[f64]) -> Vec<f64> {
        let finest = self.num_levels() - 1;
        let bc = &self.bcs[finest];
        let mut bt = b.to_vec();
        bc.zero_constrained(&mut bt);
        let mut z = vec![0.0; b.len()];
        self.cycle(finest, &bt, &mut z);
        for &i in bc.indices() {
            z[i] = b[i];
        }
        z
    }

    fn cycle(&self, level: usize, b: &[f64], x: &mut [f64]) {
        if level == 0 {
            self.coarse
                .solve(b, x)
                .expect("coarse-grid solve failed inside the V-cycle");
            return;
        }
        let op = &self.ops[level - 1];
        let smoother = &self.smoothers[level - 1];
        for _ in 0..self.smooth_steps {
            smoother.smooth(b, x);
        }
        let n = x.len();
        let mut r = b.to_vec();
        let mut ax = vec![0.0; n];
        op.apply(x, &mut ax);
        for i in 0..n {
            r[i] -= ax[i];
        }
        let transfer = &self.transfers[level - 1];
        let nc = self.spaces[level - 1].vector_ndof();
        let mut rc = vec![0.0; nc];
        transfer.apply_transpose(&r, &mut rc);
        self.bcs[level - 1].zero_constrained(&mut rc);
        let mut ec = vec![0.0; nc];
        self.cycle(level - 1, &rc, &mut ec);
        let mut ef = vec![0.0; n];
        transfer.apply(&ec, &mut ef);
        for i in 0..n {
            x[i] += ef[i];
        }
        for _ in 0..self.smooth_steps {
            smoother.smooth(b, x);
        }
    }
}

impl Preconditioner for GmgPreconditioner {
    fn apply_precond(&self, r: &[f64], z: &mut [f64]) {
        let v = self.vcycle(r);
        z.copy_from_slice(&v);
    }
}
