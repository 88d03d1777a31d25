//! Solver-stack checks against dense linear-algebra oracles and the
//! multigrid quality expectations.

use std::sync::Arc;

use mfelast::basis::QuadRule1D;
use mfelast::material::{MaterialField, VoigtMaterial};
use mfelast::mesh::{BoundaryFace, CartesianMesh};
use mfelast::operators::{ConstrainedOperator, ElasticOperator, LinearOp, Variant};
use mfelast::solvers::{
    build_gmg, cg_solve, power_iteration_lambda_max, ChebyshevSmoother, GmgConfig, JacobiPrecond,
};
use mfelast::space::FESpace;
use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn clamped_operator(cells: usize, p: usize) -> (Arc<FESpace>, ConstrainedOperator) {
    let mesh = Arc::new(CartesianMesh::unit_cube(cells).unwrap());
    let space = Arc::new(FESpace::new(mesh, p).unwrap());
    let rule = QuadRule1D::gauss_legendre(p + 1).unwrap();
    let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
    let op = ElasticOperator::fa(space.clone(), mat, &rule).unwrap();
    let bc = Arc::new(space.boundary_dofs(&[BoundaryFace::XMin], &[0, 1, 2]));
    let wrapped = ConstrainedOperator::new(Arc::new(op), bc);
    (space, wrapped)
}

fn dense_of(op: &dyn LinearOp) -> DMatrix<f64> {
    let n = op.dim();
    let mut m = DMatrix::zeros(n, n);
    let mut e = vec![0.0; n];
    let mut col = vec![0.0; n];
    for j in 0..n {
        e[j] = 1.0;
        op.apply(&e, &mut col);
        for i in 0..n {
            m[(i, j)] = col[i];
        }
        e[j] = 0.0;
    }
    m
}

#[test]
fn power_iteration_matches_dense_eigensolve() {
    let (_, wrapped) = clamped_operator(1, 1);
    let diag = wrapped.diagonal();
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    // oracle: exact lambda_max of D^-1/2 A D^-1/2
    let a = dense_of(&wrapped);
    let n = a.nrows();
    let mut scaled = a.clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] *= (inv_diag[i] * inv_diag[j]).sqrt();
        }
    }
    let eig = nalgebra::SymmetricEigen::new(scaled);
    let lambda_true = eig.eigenvalues.iter().cloned().fold(f64::MIN, f64::max);

    let est = power_iteration_lambda_max(&wrapped, &inv_diag, 30, 3).unwrap();
    assert!(
        est >= lambda_true * 0.9999 && est <= 1.21 * lambda_true,
        "estimate {est} vs true {lambda_true}"
    );
}

#[test]
fn chebyshev_damps_the_upper_spectrum() {
    // dense eigendecomposition oracle for the error expansion
    let (_, wrapped) = clamped_operator(1, 2);
    let n = wrapped.dim();
    let diag = wrapped.diagonal();
    let inv_diag: Vec<f64> = diag.iter().map(|d| 1.0 / d).collect();
    let lambda = power_iteration_lambda_max(&wrapped, &inv_diag, 20, 9).unwrap();
    let wrapped = Arc::new(wrapped);
    let smoother = ChebyshevSmoother::new(
        wrapped.clone() as Arc<dyn LinearOp>,
        inv_diag.clone(),
        lambda,
        3,
        0.1,
        1.1,
    )
    .unwrap();

    let a = dense_of(wrapped.as_ref());
    let mut scaled = a.clone();
    for i in 0..n {
        for j in 0..n {
            scaled[(i, j)] *= (inv_diag[i] * inv_diag[j]).sqrt();
        }
    }
    let eig = nalgebra::SymmetricEigen::new(scaled);

    // error propagation: smoothing x against b = 0 applies the error
    // propagator directly
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let e0: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mut e = e0.clone();
    let b = vec![0.0; n];
    for _ in 0..3 {
        smoother.smooth(&b, &mut e);
    }

    // expand both errors in the eigenbasis of D^-1 A
    let dsqrt: Vec<f64> = diag.iter().map(|d| d.sqrt()).collect();
    let coeffs = |v: &[f64]| -> DVector<f64> {
        let w = DVector::from_iterator(n, v.iter().zip(&dsqrt).map(|(x, s)| x * s));
        eig.eigenvectors.transpose() * w
    };
    let c0 = coeffs(&e0);
    let c3 = coeffs(&e);

    let mut lambdas: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
    lambdas.sort_by(f64::total_cmp);
    let cut = lambdas[n - n / 3];
    let mut checked = 0;
    for i in 0..n {
        if eig.eigenvalues[i] >= cut && c0[i].abs() > 1e-9 {
            assert!(
                c3[i].abs() <= c0[i].abs() / 5.0,
                "eigenvalue {}: component {} -> {}",
                eig.eigenvalues[i],
                c0[i],
                c3[i]
            );
            checked += 1;
        }
    }
    assert!(checked >= n / 4, "only {checked} upper-spectrum components checked");
}

#[test]
fn gmg_two_level_structure() {
    let base = Arc::new(CartesianMesh::unit_cube(2).unwrap());
    let gmg = build_gmg(
        base,
        2,
        1,
        VoigtMaterial::isotropic(1.0, 1.0).unwrap(),
        &[BoundaryFace::XMin],
        &[0, 1, 2],
        &GmgConfig::default(),
        None,
    )
    .unwrap();
    assert_eq!(gmg.num_levels(), 2);
    assert_eq!(gmg.coarse_ndof(), 81); // 27 nodes x 3 components
    assert!(gmg.coarse_is_direct());
}

#[test]
fn gmg_level_operators_match_fa() {
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let base = Arc::new(CartesianMesh::unit_cube(2).unwrap());
    let gmg = build_gmg(
        base,
        3,
        2,
        VoigtMaterial::isotropic(1.0, 1.0).unwrap(),
        &[BoundaryFace::XMin],
        &[0, 1, 2],
        &GmgConfig::default(),
        None,
    )
    .unwrap();
    let rule = QuadRule1D::gauss_legendre(3).unwrap();
    for level in 1..gmg.num_levels() {
        let op = gmg.level_operator(level);
        let space = gmg.space(level).clone();
        let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
        let fa = ElasticOperator::fa(space.clone(), mat, &rule).unwrap();
        let bc = op.bc().clone();
        let fa_wrapped = ConstrainedOperator::new(Arc::new(fa), bc);
        let n = space.vector_ndof();
        let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mut ya = vec![0.0; n];
        let mut yb = vec![0.0; n];
        op.apply_add(&x, &mut ya);
        fa_wrapped.apply_add(&x, &mut yb);
        let num: f64 = ya.iter().zip(&yb).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
        let den: f64 = ya.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!(num / den < 1e-12, "level {level}");
    }
}

#[test]
fn vcycle_is_linear_symmetric_and_bc_consistent() {
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let base = Arc::new(CartesianMesh::unit_cube(2).unwrap());
    let gmg = build_gmg(
        base,
        2,
        1,
        VoigtMaterial::isotropic(1.0, 1.0).unwrap(),
        &[BoundaryFace::XMin],
        &[0, 1, 2],
        &GmgConfig::default(),
        None,
    )
    .unwrap();
    let n = gmg.finest_space().vector_ndof();

    // b = 0 -> z = 0
    let z0 = gmg.vcycle(&vec![0.0; n]);
    assert!(z0.iter().all(|&v| v == 0.0));

    // identity action on a constrained DOF
    let bc = gmg.level_operator(gmg.num_levels() - 1).bc().clone();
    let dof = bc.indices()[0];
    let mut b = vec![0.0; n];
    b[dof] = 2.5;
    let z = gmg.vcycle(&b);
    assert_eq!(z[dof], 2.5);

    // symmetry of the preconditioner as a bilinear form
    let x: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let y: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    let mx = gmg.vcycle(&x);
    let my = gmg.vcycle(&y);
    let xmy: f64 = x.iter().zip(&my).map(|(a, b)| a * b).sum();
    let mxy: f64 = mx.iter().zip(&y).map(|(a, b)| a * b).sum();
    let scale: f64 = x.iter().map(|v| v * v).sum::<f64>().sqrt()
        * y.iter().map(|v| v * v).sum::<f64>().sqrt();
    assert!(
        (xmy - mxy).abs() <= 1e-10 * scale.max(1.0),
        "asymmetry {} at scale {scale}",
        (xmy - mxy).abs()
    );

    // positivity of the Rayleigh quotients
    for _ in 0..100 {
        let r: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let mr = gmg.vcycle(&r);
        let q: f64 = r.iter().zip(&mr).map(|(a, b)| a * b).sum();
        assert!(q > 0.0);
    }
}

#[test]
fn two_level_cg_convergence_factor() {
    let base = Arc::new(CartesianMesh::unit_cube(2).unwrap());
    let gmg = build_gmg(
        base.clone(),
        2,
        1,
        VoigtMaterial::isotropic(1.0, 1.0).unwrap(),
        &[BoundaryFace::XMin],
        &[0, 1, 2],
        &GmgConfig::default(),
        None,
    )
    .unwrap();
    let (space, wrapped) = {
        let mesh = Arc::new(base.refine_uniform());
        let space = Arc::new(FESpace::new(mesh, 1).unwrap());
        let rule = QuadRule1D::gauss_legendre(2).unwrap();
        let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
        let op = ElasticOperator::paop(space.clone(), mat, &rule).unwrap();
        let bc = Arc::new(space.boundary_dofs(&[BoundaryFace::XMin], &[0, 1, 2]));
        (space.clone(), ConstrainedOperator::new(Arc::new(op), bc))
    };
    let n = space.vector_ndof();
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let mut b: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    wrapped.bc().zero_constrained(&mut b);
    let (_, report) = cg_solve(&wrapped, &gmg, &b, 1e-8, 100).unwrap();
    assert!(report.converged);
    let k = report.iterations as f64;
    let factor = (report.final_rel_residual).powf(1.0 / k);
    assert!(factor <= 0.5, "convergence factor {factor}");
}

#[test]
fn gmg_beats_jacobi_on_clamped_problem() {
    // 3^3 cells, p = 2, clamped face, GMG within 25 iterations and
    // strictly fewer than Jacobi
    let base = Arc::new(CartesianMesh::unit_cube(3).unwrap());
    let mesh = Arc::new(base.refine_uniform());
    let p = 2;
    let space = Arc::new(FESpace::new(mesh, p).unwrap());
    let rule = QuadRule1D::gauss_legendre(p + 1).unwrap();
    let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
    let op = ElasticOperator::paop(space.clone(), mat, &rule).unwrap();
    let bc = Arc::new(space.boundary_dofs(&[BoundaryFace::XMin], &[0, 1, 2]));
    let wrapped = ConstrainedOperator::new(Arc::new(op), bc.clone());

    let force = [0.0, 0.0, -1.0];
    let mut b = mfelast::verify::manufactured_rhs(&move |_| force, &space, &rule).unwrap();
    bc.zero_constrained(&mut b);

    let gmg = build_gmg(
        base,
        2,
        p,
        VoigtMaterial::isotropic(1.0, 1.0).unwrap(),
        &[BoundaryFace::XMin],
        &[0, 1, 2],
        &GmgConfig::default(),
        None,
    )
    .unwrap();
    let (_, gmg_report) = cg_solve(&wrapped, &gmg, &b, 1e-8, 100).unwrap();
    assert!(gmg_report.converged);
    assert!(
        gmg_report.iterations <= 25,
        "GMG took {} iterations",
        gmg_report.iterations
    );

    // Jacobi gets exactly the GMG budget; not converging by then means
    // it needs strictly more iterations
    let jacobi = JacobiPrecond::new(&wrapped.diagonal()).unwrap();
    let (_, jacobi_report) = cg_solve(&wrapped, &jacobi, &b, 1e-8, gmg_report.iterations).unwrap();
    assert!(
        !jacobi_report.converged,
        "Jacobi matched GMG at {} iterations",
        jacobi_report.iterations
    );
}

#[test]
fn gmg_works_with_all_fine_variants() {
    let base = Arc::new(CartesianMesh::unit_cube(2).unwrap());
    let mut iters = Vec::new();
    for variant in [Variant::Fa, Variant::Pa, Variant::Paop] {
        let config = GmgConfig {
            fine_variant: variant,
            ..GmgConfig::default()
        };
        let gmg = build_gmg(
            base.clone(),
            2,
            2,
            VoigtMaterial::isotropic(1.0, 1.0).unwrap(),
            &[BoundaryFace::XMin],
            &[0, 1, 2],
            &config,
            None,
        )
        .unwrap();
        let space = gmg.finest_space().clone();
        let rule = QuadRule1D::gauss_legendre(3).unwrap();
        let mat = MaterialField::Constant(VoigtMaterial::isotropic(1.0, 1.0).unwrap());
        let op = ElasticOperator::build(variant, space.clone(), mat, &rule).unwrap();
        let bc = Arc::new(space.boundary_dofs(&[BoundaryFace::XMin], &[0, 1, 2]));
        let wrapped = ConstrainedOperator::new(Arc::new(op), bc.clone());
        let force = [0.0, 0.0, -1.0];
        let mut b = mfelast::verify::manufactured_rhs(&move |_| force, &space, &rule).unwrap();
        bc.zero_constrained(&mut b);
        let (_, report) = cg_solve(&wrapped, &gmg, &b, 1e-8, 100).unwrap();
        assert!(report.converged, "{variant:?}");
        iters.push(report.iterations);
    }
    assert_eq!(iters[0], iters[1]);
    assert_eq!(iters[0], iters[2]);
}
