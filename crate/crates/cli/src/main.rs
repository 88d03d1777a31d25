//! Command-line front end: solve, bench, converge, verify.
//!
//! Exit status: 0 on success, 2 on usage errors, 1 on runtime failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use mfelast::harness::{
    peak_memory_bytes, run_benchmark, run_solve, PrecondKind, RunConfig, RunStatus,
    Subcommand as RunKind,
};
use mfelast::mesh::BoundaryFace;
use mfelast::operators::{PaStage, Variant};
use mfelast::verify::{convergence_study, patch_test, ManufacturedCase, Poly3};
use mfelast::{Error, FESpace};

#[derive(Parser)]
#[command(
    name = "mfelast",
    about = "High-order matrix-free elasticity on structured hex meshes",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve the clamped-cube benchmark problem once
    Solve(SolveArgs),
    /// Compare operator realizations (or kernel stages) and emit CSV
    Bench(BenchArgs),
    /// h-convergence study of the smooth manufactured solution
    Converge(ConvergeArgs),
    /// Patch tests and manufactured-solution verification
    Verify(VerifyArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// Polynomial order
    #[arg(long, short = 'p', default_value_t = 2, value_parser = clap::value_parser!(u8).range(1..=8))]
    order: u8,
    /// Base mesh cells per axis: "n" or "nx,ny,nz"
    #[arg(long, default_value = "2")]
    cells: String,
    /// Uniform refinements of the base mesh (GMG depth = refine + 1)
    #[arg(long, default_value_t = 1)]
    refine: usize,
    /// Operator realization: fa | pa | paop
    #[arg(long, default_value = "paop")]
    assembly: String,
    /// PA kernel stage: baseline | sumfac | voigt
    #[arg(long, default_value = "baseline")]
    kernel_stage: String,
    /// Preconditioner: gmg | jacobi | none
    #[arg(long, default_value = "gmg")]
    pc: String,
    /// First Lame parameter
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    /// Shear modulus
    #[arg(long, default_value_t = 1.0)]
    mu: f64,
    /// File with the 21 upper-triangle values of an anisotropic 6x6 stiffness
    #[arg(long)]
    material_config: Option<PathBuf>,
    /// Dirichlet faces, comma separated (xmin,xmax,ymin,ymax,zmin,zmax)
    #[arg(long, default_value = "xmin")]
    bc_faces: String,
    /// Constrained components, comma separated (x,y,z)
    #[arg(long, default_value = "x,y,z")]
    bc_components: String,
    /// Body force components
    #[arg(long, default_value = "0,0,-1", allow_hyphen_values = true)]
    force: String,
    #[arg(long, default_value_t = 1e-8)]
    rel_tol: f64,
    #[arg(long, default_value_t = 2000)]
    max_iters: usize,
    /// Chebyshev smoother order
    #[arg(long, default_value_t = 3)]
    cheby_order: usize,
    /// Pre- and post-smoothing sweeps per level
    #[arg(long, default_value_t = 1)]
    smooth_steps: usize,
    /// Benchmark CSV output path
    #[arg(long)]
    csv: Option<PathBuf>,
    /// VTK output path for the displacement field
    #[arg(long)]
    vtk: Option<PathBuf>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Element-loop worker threads (1 = serial)
    #[arg(long, default_value_t = 1)]
    threads: usize,
}

#[derive(Args)]
struct SolveArgs {
    #[command(flatten)]
    common: CommonArgs,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Orders to sweep, comma separated
    #[arg(long, default_value = "2")]
    orders: String,
    /// Realizations to compare, comma separated
    #[arg(long, default_value = "fa,pa,paop")]
    variants: String,
    /// Run the four kernel stages (baseline, +sumfac, +voigt, fused)
    /// instead of the variant comparison
    #[arg(long)]
    ablation: bool,
    /// Per-order mesh chosen to hit this many vector DOFs
    #[arg(long)]
    target_dofs: Option<usize>,
    /// Report a structured OOM record when the predicted operator
    /// storage exceeds this many bytes
    #[arg(long)]
    mem_cap_bytes: Option<u64>,
}

#[derive(Args)]
struct ConvergeArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Refinement levels in the study
    #[arg(long, default_value_t = 4)]
    levels: usize,
    /// Amplitude of the sine-product case
    #[arg(long, default_value_t = 0.1)]
    amplitude: f64,
}

#[derive(Args)]
struct VerifyArgs {
    #[command(flatten)]
    common: CommonArgs,
}

fn parse_triple(s: &str, what: &str) -> Result<[usize; 3], Error> {
    let parts: Vec<&str> = s.split(',').collect();
    let parse = |t: &str| -> Result<usize, Error> {
        t.trim()
            .parse()
            .map_err(|e| Error::invalid(format!("{what} `{t}`: {e}")))
    };
    match parts.len() {
        1 => {
            let n = parse(parts[0])?;
            Ok([n, n, n])
        }
        3 => Ok([parse(parts[0])?, parse(parts[1])?, parse(parts[2])?]),
        _ => Err(Error::invalid(format!(
            "{what} must be one value or three comma-separated values"
        ))),
    }
}

fn parse_force(s: &str) -> Result<[f64; 3], Error> {
    let parts: Vec<&str> = s.split(',').collect();
    if parts.len() != 3 {
        return Err(Error::invalid("force needs three components"));
    }
    let mut out = [0.0; 3];
    for (k, t) in parts.iter().enumerate() {
        out[k] = t
            .trim()
            .parse()
            .map_err(|e| Error::invalid(format!("force component `{t}`: {e}")))?;
    }
    Ok(out)
}

fn parse_components(s: &str) -> Result<Vec<usize>, Error> {
    s.split(',')
        .map(|t| match t.trim() {
            "x" | "0" => Ok(0),
            "y" | "1" => Ok(1),
            "z" | "2" => Ok(2),
            other => Err(Error::invalid(format!("unknown component `{other}`"))),
        })
        .collect()
}

fn build_config(common: &CommonArgs, kind: RunKind) -> Result<RunConfig, Error> {
    let faces = common
        .bc_faces
        .split(',')
        .filter(|t| !t.trim().is_empty())
        .map(|t| BoundaryFace::parse(t.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    let config = RunConfig {
        subcommand: kind,
        order: common.order as usize,
        base_cells: parse_triple(&common.cells, "cell count")?,
        refinements: common.refine,
        variant: Variant::parse(&common.assembly)?,
        pa_stage: PaStage::parse(&common.kernel_stage)?,
        precond: PrecondKind::parse(&common.pc)?,
        lambda: common.lambda,
        mu: common.mu,
        material_config: common.material_config.clone(),
        bc_faces: faces,
        bc_components: parse_components(&common.bc_components)?,
        body_force: parse_force(&common.force)?,
        rel_tol: common.rel_tol,
        max_iters: common.max_iters,
        chebyshev_order: common.cheby_order,
        smooth_steps: common.smooth_steps,
        csv_path: common.csv.clone(),
        vtk_path: common.vtk.clone(),
        seed: common.seed,
        threads: common.threads,
        ..RunConfig::default()
    };
    config.validate()?;
    Ok(config)
}

fn cmd_solve(args: &SolveArgs) -> Result<(), Error> {
    let config = build_config(&args.common, RunKind::Solve)?;
    let outcome = run_solve(&config)?;
    let r = &outcome.record;
    println!(
        "solve: variant={} p={} levels={} ndof={}",
        r.variant, r.p, r.levels, r.ndof
    );
    println!(
        "  iterations={} converged={} final_rel_residual={:.3e}",
        r.iters, outcome.report.converged, outcome.report.final_rel_residual
    );
    println!(
        "  setup={:.4}s solve={:.4}s apply={:.4}s total={:.4}s",
        r.setup_s, r.solve_s, r.apply_s, r.total_s
    );
    println!(
        "  flops={} bytes_model={} op_intensity={:.4} mdof_per_s={:.3}",
        r.flops, r.bytes_model, r.op_intensity, r.mdof_per_s
    );
    println!("  operator_bytes={}", r.operator_bytes);
    if let Some(peak) = peak_memory_bytes() {
        println!("  peak_rss_bytes={peak}");
    }
    if !outcome.report.converged {
        return Err(Error::Solver(format!(
            "did not converge within {} iterations",
            config.max_iters
        )));
    }
    Ok(())
}

fn cmd_bench(args: &BenchArgs) -> Result<(), Error> {
    let mut config = build_config(&args.common, RunKind::Bench)?;
    config.bench_orders = args
        .orders
        .split(',')
        .map(|t| {
            t.trim()
                .parse::<usize>()
                .map_err(|e| Error::invalid(format!("order `{t}`: {e}")))
        })
        .collect::<Result<Vec<_>, _>>()?;
    config.bench_variants = args
        .variants
        .split(',')
        .map(|t| Variant::parse(t.trim()))
        .collect::<Result<Vec<_>, _>>()?;
    config.ablation = args.ablation;
    config.target_dofs = args.target_dofs;
    config.mem_cap_bytes = args.mem_cap_bytes;
    config.validate()?;

    let records = run_benchmark(&config)?;
    println!("{}", mfelast::output::CSV_HEADER);
    for r in &records {
        println!("{}", mfelast::output::record_row(r));
        if r.status == RunStatus::OutOfMemory {
            println!(
                "# {} p={}: OOM (predicted operator storage {} bytes over cap)",
                r.variant, r.p, r.operator_bytes
            );
        }
    }
    if let Some(peak) = peak_memory_bytes() {
        println!("# peak_rss_bytes={peak}");
    }
    Ok(())
}

fn cmd_converge(args: &ConvergeArgs) -> Result<(), Error> {
    let config = build_config(&args.common, RunKind::Converge)?;
    let case = ManufacturedCase::sine_product(config.lambda, config.mu, args.amplitude)?;
    let base = parse_triple(&args.common.cells, "cell count")?[0];
    let rows = convergence_study(&case, config.order, base, args.levels, config.variant)?;
    println!(
        "{:>5} {:>12} {:>10} {:>14} {:>8}",
        "level", "h", "ndof", "l2_error", "rate"
    );
    for row in &rows {
        println!(
            "{:>5} {:>12.6} {:>10} {:>14.6e} {:>8}",
            row.level,
            row.h,
            row.scalar_ndof,
            row.l2_error,
            row.rate.map_or("-".to_string(), |r| format!("{r:.2}")),
        );
    }
    if let Some(path) = &config.csv_path {
        use std::io::Write;
        let mut file = std::fs::OpenOptions::new()
            .create(true)
            .append(true)
            .open(path)?;
        for row in &rows {
            writeln!(
                file,
                "converge,{},{},{},{},{},{}",
                config.order,
                row.level,
                row.h,
                row.scalar_ndof,
                row.l2_error,
                row.rate.map_or(f64::NAN, |r| r)
            )?;
        }
    }
    Ok(())
}

fn cmd_verify(args: &VerifyArgs) -> Result<(), Error> {
    let config = build_config(&args.common, RunKind::Verify)?;
    let material = config.material()?;
    let mut failures = 0;
    let cases: Vec<(usize, ManufacturedCase)> = vec![
        (
            1,
            ManufacturedCase::polynomial(
                "linear-x",
                [Poly3::monomial(1.0, [1, 0, 0]), Poly3::zero(), Poly3::zero()],
                material.clone(),
            ),
        ),
        (
            2,
            ManufacturedCase::polynomial(
                "xy-yz",
                [
                    Poly3::monomial(1.0, [1, 1, 0]),
                    Poly3::monomial(1.0, [0, 1, 1]),
                    Poly3::zero(),
                ],
                material.clone(),
            ),
        ),
        (
            3,
            ManufacturedCase::polynomial(
                "cubic-mix",
                [
                    Poly3::monomial(1.0, [3, 0, 0]),
                    Poly3::monomial(1.0, [1, 1, 1]),
                    Poly3::monomial(0.5, [0, 2, 1]),
                ],
                material.clone(),
            ),
        ),
        (
            4,
            ManufacturedCase::polynomial(
                "quartic",
                [
                    Poly3::monomial(1.0, [4, 0, 0]),
                    Poly3::monomial(-0.5, [2, 2, 0]),
                    Poly3::monomial(0.25, [1, 1, 2]),
                ],
                material.clone(),
            ),
        ),
    ];
    for (p, case) in &cases {
        let mesh = std::sync::Arc::new(mfelast::mesh::CartesianMesh::new(
            [1.0, 1.0, 1.0],
            config.base_cells,
        )?);
        let space = std::sync::Arc::new(FESpace::new(mesh, *p)?);
        let outcome = patch_test(case, &space)?;
        let status = if outcome.passed { "PASS" } else { "FAIL" };
        println!(
            "patch test p={p} case={}: {status} (l2 error {:.3e}, scale {:.3e})",
            case.name, outcome.l2_error, outcome.scale
        );
        if !outcome.passed {
            failures += 1;
        }
    }
    if failures > 0 {
        return Err(Error::Solver(format!("{failures} patch tests failed")));
    }
    println!("all patch tests passed");
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Solve(args) => cmd_solve(args),
        Command::Bench(args) => cmd_bench(args),
        Command::Converge(args) => cmd_converge(args),
        Command::Verify(args) => cmd_verify(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::InvalidArgument(_) => ExitCode::from(2),
                _ => ExitCode::from(1),
            }
        }
    }
}
