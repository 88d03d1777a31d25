//! Run configuration and the instrumented benchmark harness.

use std::cell::Cell;
use std::path::PathBuf;
use std::sync::Arc;
use std::time::Instant;

use crate::basis::QuadRule1D;
use crate::material::{MaterialField, VoigtMaterial};
use crate::mesh::{BoundaryFace, CartesianMesh};
use crate::operators::{
    predicted_fa_bytes, ConstrainedOperator, ElasticOperator, LinearOp, PaStage, Pool, Variant,
};
use crate::solvers::{
    build_gmg, cg_solve, GmgConfig, IdentityPrecond, JacobiPrecond, Preconditioner, SolveReport,
};
use crate::space::FESpace;
use crate::verify::manufactured_rhs;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Subcommand {
    Solve,
    Bench,
    Converge,
    Verify,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum PrecondKind {
    Gmg,
    Jacobi,
    None,
}

impl PrecondKind {
    pub fn parse(s: &str) -> Result<Self> {
        match s {
            "gmg" => Ok(PrecondKind::Gmg),
            "jacobi" => Ok(PrecondKind::Jacobi),
            "none" => Ok(PrecondKind::None),
            _ => Err(Error::invalid(format!("unknown preconditioner `{s}`"))),
        }
    }
}

/// Validated run configuration shared by all subcommands.
#[derive(Clone, Debug)]
pub struct RunConfig {
    pub subcommand: Subcommand,
    pub order: usize,
    pub base_cells: [usize; 3],
    /// Uniform refinements of the base mesh; the GMG hierarchy has
    /// refinements + 1 levels.
    pub refinements: usize,
    pub variant: Variant,
    /// Kernel stage used when the variant is PA.
    pub pa_stage: PaStage,
    pub precond: PrecondKind,
    pub lambda: f64,
    pub mu: f64,
    /// Optional 21-value upper-triangle anisotropic stiffness file.
    pub material_config: Option<PathBuf>,
    pub bc_faces: Vec<BoundaryFace>,
    pub bc_components: Vec<usize>,
    pub body_force: [f64; 3],
    pub rel_tol: f64,
    pub max_iters: usize,
    pub chebyshev_order: usize,
    pub smooth_steps: usize,
    pub csv_path: Option<PathBuf>,
    pub vtk_path: Option<PathBuf>,
    pub seed: u64,
    pub threads: usize,
    /// Bench: polynomial orders to sweep.
    pub bench_orders: Vec<usize>,
    /// Bench: operator realizations to compare.
    pub bench_variants: Vec<Variant>,
    /// Bench: run the four kernel stages instead of the variants.
    pub ablation: bool,
    /// Bench: per-order mesh chosen to hit this DOF budget.
    pub target_dofs: Option<usize>,
    /// Structured out-of-memory reporting threshold for operator storage.
    pub mem_cap_bytes: Option<u64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            subcommand: Subcommand::Solve,
            order: 2,
            base_cells: [2, 2, 2],
            refinements: 1,
            variant: Variant::Paop,
            pa_stage: PaStage::Baseline,
            precond: PrecondKind::Gmg,
            lambda: 1.0,
            mu: 1.0,
            material_config: None,
            bc_faces: vec![BoundaryFace::XMin],
            bc_components: vec![0, 1, 2],
            body_force: [0.0, 0.0, -1.0],
            rel_tol: 1e-8,
            max_iters: 2000,
            chebyshev_order: 3,
            smooth_steps: 1,
            csv_path: None,
            vtk_path: None,
            seed: 0,
            threads: 1,
            bench_orders: vec![2],
            bench_variants: vec![Variant::Fa, Variant::Pa, Variant::Paop],
            ablation: false,
            target_dofs: None,
            mem_cap_bytes: None,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        for &p in std::iter::once(&self.order).chain(&self.bench_orders) {
            if !(1..=8).contains(&p) {
                return Err(Error::invalid(format!(
                    "polynomial order {p} outside the supported range 1-8"
                )));
            }
        }
        if self.base_cells.iter().any(|&c| c == 0) {
            return Err(Error::invalid("base cell counts must be positive"));
        }
        if !(self.rel_tol > 0.0) {
            return Err(Error::invalid("rel_tol must be positive"));
        }
        if self.bc_components.iter().any(|&c| c > 2) {
            return Err(Error::invalid("bc components must be 0, 1, or 2"));
        }
        Ok(())
    }

    pub fn material(&self) -> Result<VoigtMaterial> {
        match &self.material_config {
            None => VoigtMaterial::isotropic(self.lambda, self.mu),
            Some(path) => {
                let text = std::fs::read_to_string(path)?;
                parse_anisotropic_config(&text)
            }
        }
    }

    pub fn pool(&self) -> Result<Option<Pool>> {
        if self.threads <= 1 {
            return Ok(None);
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(self.threads)
            .build()
            .map_err(|e| Error::invalid(format!("thread pool: {e}")))?;
        Ok(Some(Arc::new(pool)))
    }
}

/// Parses a 21-value upper-triangle stiffness listing (row-major upper
/// triangle of the symmetric 6x6, whitespace separated; `#` comments).
pub fn parse_anisotropic_config(text: &str) -> Result<VoigtMaterial> {
    let values: Vec<f64> = text
        .lines()
        .map(|l| l.split('#').next().unwrap_or(""))
        .flat_map(|l| l.split_whitespace())
        .map(|tok| {
            tok.parse::<f64>()
                .map_err(|e| Error::invalid(format!("material config value `{tok}`: {e}")))
        })
        .collect::<Result<_>>()?;
    if values.len() != 21 {
        return Err(Error::invalid(format!(
            "anisotropic config needs 21 values, got {}",
            values.len()
        )));
    }
    let mut c = [[0.0; 6]; 6];
    let mut k = 0;
    for i in 0..6 {
        for j in i..6 {
            c[i][j] = values[k];
            c[j][i] = values[k];
            k += 1;
        }
    }
    VoigtMaterial::anisotropic(c)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum RunStatus {
    Completed,
    /// The predicted operator storage exceeded the configured cap; the
    /// run was not attempted.
    OutOfMemory,
}

/// One benchmark measurement (or a structured OOM marker).
#[derive(Clone, Debug)]
pub struct BenchRecord {
    pub variant: String,
    pub p: usize,
    pub levels: usize,
    pub ndof: usize,
    pub iters: usize,
    pub setup_s: f64,
    pub solve_s: f64,
    pub apply_s: f64,
    pub total_s: f64,
    pub flops: u64,
    pub bytes_model: u64,
    pub op_intensity: f64,
    pub mdof_per_s: f64,
    pub operator_bytes: u64,
    pub status: RunStatus,
}

/// Wraps the Krylov operator to time exactly the apply calls issued by
/// the solver.
struct TimedOp<'a> {
    inner: &'a dyn LinearOp,
    seconds: Cell<f64>,
}

impl<'a> LinearOp for TimedOp<'a> {
    fn dim(&self) -> usize {
        self.inner.dim()
    }
    fn apply_add(&self, x: &[f64], y: &mut [f64]) {
        let t0 = Instant::now();
        self.inner.apply_add(x, y);
        self.seconds.set(self.seconds.get() + t0.elapsed().as_secs_f64());
    }
}

pub struct SolveOutcome {
    pub record: BenchRecord,
    pub space: Arc<FESpace>,
    pub solution: Vec<f64>,
    pub report: SolveReport,
}

/// Predicted variant-specific operator storage, without building.
pub fn predicted_operator_bytes(space: &FESpace, variant: Variant, stage: PaStage) -> u64 {
    let p = space.order();
    let n = (p + 1) as u64;
    let q = n; // default quadrature p+1
    let q3 = q * q * q;
    let nelem = space.num_elements() as u64;
    match variant {
        Variant::Fa => predicted_fa_bytes(space),
        Variant::Pa => {
            let gtable = if stage == PaStage::Baseline {
                q3 * 3 * n * n * n * 8
            } else {
                0
            };
            gtable + nelem * q3 * stage.qvec_width() as u64 * 8
        }
        // 1D tables plus per-point geometry (J, det, inverse, weights)
        Variant::Paop => 2 * q * n * 8 + nelem * q3 * 19 * 8 + q3 * 8,
    }
}

fn build_operator(
    variant: Variant,
    stage: PaStage,
    space: Arc<FESpace>,
    material: MaterialField,
    rule: &QuadRule1D,
    pool: Option<Pool>,
) -> Result<ElasticOperator> {
    let op = match variant {
        Variant::Fa => ElasticOperator::fa(space, material, rule)?,
        Variant::Pa => ElasticOperator::pa(space, material, rule, stage)?,
        Variant::Paop => ElasticOperator::paop(space, material, rule)?,
    };
    Ok(op.with_pool(pool))
}

/// Builds and solves the configured problem with one (variant, order)
/// pair, returning the instrumented record.
pub fn run_solve_one(
    config: &RunConfig,
    variant: Variant,
    stage: PaStage,
    p: usize,
    base_cells: [usize; 3],
) -> Result<SolveOutcome> {
    let t_setup = Instant::now();
    let pool = config.pool()?;
    let base = Arc::new(CartesianMesh::new([1.0, 1.0, 1.0], base_cells)?);
    let mut mesh = base.clone();
    for _ in 0..config.refinements {
        mesh = Arc::new(mesh.refine_uniform());
    }
    let rule = QuadRule1D::gauss_legendre(p + 1)?;
    let space = Arc::new(FESpace::new(mesh, p)?);
    let material = config.material()?;
    let levels = config.refinements + 1;

    // structured OOM: check the predicted storage before building
    if let Some(cap) = config.mem_cap_bytes {
        let predicted = predicted_operator_bytes(&space, variant, stage);
        if predicted > cap {
            return Ok(SolveOutcome {
                record: BenchRecord {
                    variant: variant_label(variant, stage).to_string(),
                    p,
                    levels,
                    ndof: space.vector_ndof(),
                    iters: 0,
                    setup_s: 0.0,
                    solve_s: 0.0,
                    apply_s: 0.0,
                    total_s: 0.0,
                    flops: 0,
                    bytes_model: 0,
                    op_intensity: 0.0,
                    mdof_per_s: 0.0,
                    operator_bytes: predicted,
                    status: RunStatus::OutOfMemory,
                },
                solution: Vec::new(),
                space,
                report: SolveReport {
                    iterations: 0,
                    residual_history: Vec::new(),
                    converged: false,
                    final_rel_residual: f64::NAN,
                },
            });
        }
    }

    let op = build_operator(
        variant,
        stage,
        space.clone(),
        MaterialField::Constant(material.clone()),
        &rule,
        pool.clone(),
    )?;
    let bc = Arc::new(space.boundary_dofs(&config.bc_faces, &config.bc_components));
    let wrapped = ConstrainedOperator::new(Arc::new(op), bc.clone());

    let gmg = match config.precond {
        PrecondKind::Gmg => {
            let gmg_config = GmgConfig {
                chebyshev_order: config.chebyshev_order,
                smooth_steps: config.smooth_steps,
                seed: config.seed,
                fine_variant: variant,
                pa_stage: stage,
                ..GmgConfig::default()
            };
            Some(build_gmg(
                base,
                levels,
                p,
                material.clone(),
                &config.bc_faces,
                &config.bc_components,
                &gmg_config,
                pool.clone(),
            )?)
        }
        _ => None,
    };
    let jacobi = match config.precond {
        PrecondKind::Jacobi => Some(JacobiPrecond::new(&wrapped.diagonal())?),
        _ => None,
    };

    let force = config.body_force;
    let mut b = manufactured_rhs(&move |_x| force, &space, &rule)?;
    bc.zero_constrained(&mut b); // homogeneous Dirichlet data
    let setup_s = t_setup.elapsed().as_secs_f64();

    wrapped.inner().reset_counters();
    let timed = TimedOp {
        inner: &wrapped,
        seconds: Cell::new(0.0),
    };
    let t_solve = Instant::now();
    let precond: &dyn Preconditioner = match (&gmg, &jacobi) {
        (Some(g), _) => g,
        (None, Some(j)) => j,
        (None, None) => &IdentityPrecond,
    };
    let (solution, report) = cg_solve(&timed, precond, &b, config.rel_tol, config.max_iters)?;
    let solve_s = t_solve.elapsed().as_secs_f64();
    let apply_s = timed.seconds.get();

    let counters = wrapped.inner().counters()?;
    let record = BenchRecord {
        variant: variant_label(variant, stage).to_string(),
        p,
        levels,
        ndof: space.vector_ndof(),
        iters: report.iterations,
        setup_s,
        solve_s,
        apply_s,
        total_s: setup_s + solve_s,
        flops: counters.flops,
        bytes_model: counters.bytes_model,
        op_intensity: counters.operational_intensity(),
        mdof_per_s: space.vector_ndof() as f64 * report.iterations as f64 / solve_s / 1e6,
        operator_bytes: wrapped.inner().operator_bytes(),
        status: RunStatus::Completed,
    };
    Ok(SolveOutcome {
        record,
        space,
        solution,
        report,
    })
}

fn variant_label(variant: Variant, stage: PaStage) -> &'static str {
    match variant {
        Variant::Fa => "fa",
        Variant::Paop => "paop",
        Variant::Pa => match stage {
            PaStage::Baseline => "pa",
            PaStage::SumFactorized => "pa+sumfac",
            PaStage::SumFacVoigt => "pa+voigt",
        },
    }
}

/// The `solve` subcommand: one problem, one variant.
pub fn run_solve(config: &RunConfig) -> Result<SolveOutcome> {
    config.validate()?;
    let outcome = run_solve_one(
        config,
        config.variant,
        config.pa_stage,
        config.order,
        config.base_cells,
    )?;
    if let Some(path) = &config.vtk_path {
        crate::output::emit_vtk(&outcome.space, &outcome.solution, path)?;
    }
    if let Some(path) = &config.csv_path {
        crate::output::emit_csv(std::slice::from_ref(&outcome.record), path)?;
    }
    Ok(outcome)
}

/// Mesh cells per axis targeting `target` vector DOFs for order `p`.
pub fn cells_for_budget(p: usize, target: usize) -> usize {
    let nodes_per_axis = (target as f64 / 3.0).cbrt();
    let n = ((nodes_per_axis - 1.0) / p as f64).round().max(1.0);
    n as usize
}

/// The `bench` subcommand: sweeps (variant, p) pairs at a fixed DoF
/// budget and records timings and counters. Iteration counts must agree
/// across variants of the same order (same system, same preconditioner).
pub fn run_benchmark(config: &RunConfig) -> Result<Vec<BenchRecord>> {
    config.validate()?;
    let mut records = Vec::new();
    let stages: Vec<(Variant, PaStage)> = if config.ablation {
        vec![
            (Variant::Pa, PaStage::Baseline),
            (Variant::Pa, PaStage::SumFactorized),
            (Variant::Pa, PaStage::SumFacVoigt),
            (Variant::Paop, PaStage::Baseline),
        ]
    } else {
        config
            .bench_variants
            .iter()
            .map(|&v| (v, config.pa_stage))
            .collect()
    };

    for &p in &config.bench_orders {
        let base_cells = match config.target_dofs {
            Some(t) => {
                // the budget counts the DOFs of the solved (refined) mesh
                let fine = cells_for_budget(p, t) >> config.refinements;
                [fine.max(1); 3]
            }
            None => config.base_cells,
        };
        let mut iters_seen: Option<usize> = None;
        for &(variant, stage) in &stages {
            let outcome = run_solve_one(config, variant, stage, p, base_cells)?;
            if outcome.record.status == RunStatus::Completed {
                if let Some(it) = iters_seen {
                    if it != outcome.record.iters {
                        return Err(Error::Internal(format!(
                            "iteration counts diverged across variants at p = {p}: {it} vs {}",
                            outcome.record.iters
                        )));
                    }
                } else {
                    iters_seen = Some(outcome.record.iters);
                }
            }
            records.push(outcome.record);
        }
    }
    if let Some(path) = &config.csv_path {
        crate::output::emit_csv(&records, path)?;
    }
    Ok(records)
}

/// Linux VmHWM in bytes, when the platform exposes it.
pub fn peak_memory_bytes() -> Option<u64> {
    let status = std::fs::read_to_string("/proc/self/status").ok()?;
    for line in status.lines() {
        if let Some(rest) = line.strip_prefix("VmHWM:") {
            let kb: u64 = rest.trim().trim_end_matches("kB").trim().parse().ok()?;
            return Some(kb * 1024);
        }
    }
    None
}
