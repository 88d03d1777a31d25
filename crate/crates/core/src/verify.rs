//! Correctness instrumentation: manufactured solutions with analytic
//! right-hand sides, L2 error evaluation, patch tests, and h-convergence
//! studies.

use std::sync::Arc;

use crate::basis::{Basis1D, QuadRule1D};
use crate::material::{MaterialField, VoigtMaterial};
use crate::mesh::BoundaryFace;
use crate::operators::{ConstrainedOperator, ElasticOperator, GeometryFactors, LinearOp, Variant};
use crate::solvers::{build_gmg, cg_solve, GmgConfig, JacobiPrecond, SolveReport};
use crate::space::FESpace;
use crate::{Error, Result};

/// Trivariate polynomial, a sum of monomial terms.
#[derive(Clone, Debug, Default)]
pub struct Poly3 {
    /// (coefficient, exponents per axis); terms kept combined and sorted.
    terms: Vec<(f64, [u32; 3])>,
}

impl Poly3 {
    pub fn zero() -> Self {
        Poly3 { terms: Vec::new() }
    }

    pub fn monomial(coeff: f64, exps: [u32; 3]) -> Self {
        let mut p = Poly3 {
            terms: vec![(coeff, exps)],
        };
        p.normalize();
        p
    }

    pub fn constant(c: f64) -> Self {
        Poly3::monomial(c, [0, 0, 0])
    }

    pub fn add(&self, other: &Poly3) -> Poly3 {
        let mut terms = self.terms.clone();
        terms.extend_from_slice(&other.terms);
        let mut p = Poly3 { terms };
        p.normalize();
        p
    }

    pub fn scale(&self, s: f64) -> Poly3 {
        let mut p = self.clone();
        for t in &mut p.terms {
            t.0 *= s;
        }
        p.normalize();
        p
    }

    pub fn derivative(&self, axis: usize) -> Poly3 {
        let mut terms = Vec::new();
        for &(c, e) in &self.terms {
            if e[axis] > 0 {
                let mut en = e;
                en[axis] -= 1;
                terms.push((c * e[axis] as f64, en));
            }
        }
        let mut p = Poly3 { terms };
        p.normalize();
        p
    }

    pub fn eval(&self, x: [f64; 3]) -> f64 {
        self.terms
            .iter()
            .map(|&(c, e)| {
                c * x[0].powi(e[0] as i32) * x[1].powi(e[1] as i32) * x[2].powi(e[2] as i32)
            })
            .sum()
    }

    /// Largest per-direction degree.
    pub fn degree_per_direction(&self) -> u32 {
        self.terms
            .iter()
            .flat_map(|&(_, e)| e)
            .max()
            .unwrap_or(0)
    }

    fn normalize(&mut self) {
        self.terms.sort_by_key(|&(_, e)| e);
        let mut out: Vec<(f64, [u32; 3])> = Vec::with_capacity(self.terms.len());
        for &(c, e) in &self.terms {
            if let Some(last) = out.last_mut() {
                if last.1 == e {
                    last.0 += c;
                    continue;
                }
            }
            out.push((c, e));
        }
        out.retain(|&(c, _)| c != 0.0);
        self.terms = out;
    }
}

/// Exact displacement field with closed-form gradient and the matching
/// body force f = -div sigma(u).
pub struct ManufacturedCase {
    pub name: String,
    pub material: VoigtMaterial,
    pub displacement: Box<dyn Fn([f64; 3]) -> [f64; 3] + Sync + Send>,
    pub gradient: Box<dyn Fn([f64; 3]) -> [[f64; 3]; 3] + Sync + Send>,
    pub body_force: Box<dyn Fn([f64; 3]) -> [f64; 3] + Sync + Send>,
}

impl ManufacturedCase {
    /// Builds a case from polynomial displacement components; the body
    /// force is derived exactly by polynomial differentiation of
    /// sigma(u) = C eps(u).
    pub fn polynomial(name: &str, comps: [Poly3; 3], material: VoigtMaterial) -> Self {
        let grads: Vec<Vec<Poly3>> = (0..3)
            .map(|i| (0..3).map(|j| comps[i].derivative(j)).collect())
            .collect();
        // Voigt strain polynomials (engineering shear)
        let eps: [Poly3; 6] = [
            grads[0][0].clone(),
            grads[1][1].clone(),
            grads[2][2].clone(),
            grads[1][2].add(&grads[2][1]),
            grads[0][2].add(&grads[2][0]),
            grads[0][1].add(&grads[1][0]),
        ];
        let c = material.stiffness_matrix();
        let sigma_v: Vec<Poly3> = (0..6)
            .map(|k| {
                let mut acc = Poly3::zero();
                for j in 0..6 {
                    if c[k][j] != 0.0 {
                        acc = acc.add(&eps[j].scale(c[k][j]));
                    }
                }
                acc
            })
            .collect();
        // symmetric stress matrix entries by Voigt position
        let sig = |i: usize, j: usize| -> &Poly3 {
            const V: [[usize; 3]; 3] = [[0, 5, 4], [5, 1, 3], [4, 3, 2]];
            &sigma_v[V[i][j]]
        };
        let force: Vec<Poly3> = (0..3)
            .map(|i| {
                let mut acc = Poly3::zero();
                for j in 0..3 {
                    acc = acc.add(&sig(i, j).derivative(j));
                }
                acc.scale(-1.0)
            })
            .collect();

        let comps_d = comps.clone();
        let grads_g = grads.clone();
        ManufacturedCase {
            name: name.to_string(),
            material,
            displacement: Box::new(move |x| {
                [comps_d[0].eval(x), comps_d[1].eval(x), comps_d[2].eval(x)]
            }),
            gradient: Box::new(move |x| {
                let mut g = [[0.0; 3]; 3];
                for i in 0..3 {
                    for j in 0..3 {
                        g[i][j] = grads_g[i][j].eval(x);
                    }
                }
                g
            }),
            body_force: Box::new(move |x| {
                [force[0].eval(x), force[1].eval(x), force[2].eval(x)]
            }),
        }
    }

    /// The smooth verification case u = a sin(pi x) sin(pi y) sin(pi z)
    /// in every component, with homogeneous trace on the unit cube.
    /// The hard-coded body force was derived from
    /// f_i = -(lambda + mu) d_i(div u) - mu laplace(u_i);
    /// the finite-difference oracle in the tests re-checks it.
    pub fn sine_product(lambda: f64, mu: f64, amplitude: f64) -> Result<Self> {
        let material = VoigtMaterial::isotropic(lambda, mu)?;
        let pi = std::f64::consts::PI;
        let a = amplitude;
        let s = move |x: f64| (pi * x).sin();
        let c = move |x: f64| (pi * x).cos();
        Ok(ManufacturedCase {
            name: "sine-product".into(),
            material,
            displacement: Box::new(move |x| {
                let v = a * s(x[0]) * s(x[1]) * s(x[2]);
                [v, v, v]
            }),
            gradient: Box::new(move |x| {
                let d = [
                    a * pi * c(x[0]) * s(x[1]) * s(x[2]),
                    a * pi * s(x[0]) * c(x[1]) * s(x[2]),
                    a * pi * s(x[0]) * s(x[1]) * c(x[2]),
                ];
                [d, d, d]
            }),
            body_force: Box::new(move |x| {
                let (s1, s2, s3) = (s(x[0]), s(x[1]), s(x[2]));
                let (c1, c2, c3) = (c(x[0]), c(x[1]), c(x[2]));
                let big_s = s1 * s2 * s3;
                let lp = lambda + mu;
                let f = |ci_cj_sk: f64, ci_sj_ck: f64| {
                    a * pi * pi * (lp * (big_s - ci_cj_sk - ci_sj_ck) + 3.0 * mu * big_s)
                };
                [
                    f(c1 * c2 * s3, c1 * s2 * c3),
                    f(c1 * c2 * s3, s1 * c2 * c3),
                    f(c1 * s2 * c3, s1 * c2 * c3),
                ]
            }),
        })
    }
}

/// One row of an h-convergence study.
#[derive(Clone, Debug)]
pub struct ConvergenceRow {
    pub level: usize,
    pub h: f64,
    pub scalar_ndof: usize,
    pub l2_error: f64,
    /// log2(previous error / this error); defined from level 1 onward.
    pub rate: Option<f64>,
}

/// Load vector F_i = integral of f . phi_i with the given quadrature.
pub fn manufactured_rhs(
    force: &(dyn Fn([f64; 3]) -> [f64; 3] + Sync),
    space: &FESpace,
    rule: &QuadRule1D,
) -> Result<Vec<f64>> {
    let basis = Basis1D::new(space.order(), rule)?;
    let geom = GeometryFactors::compute(space, rule)?;
    let n = basis.ndof();
    let q = rule.len();
    let nloc = space.dofs_per_element();
    let ns = space.scalar_ndof();
    let h = space.mesh().cell_size();
    let mut out = vec![0.0; space.vector_ndof()];
    let mut fvals = vec![0.0; 3 * q * q * q];
    let mut local = vec![0.0; 3 * nloc];

    for e in 0..space.num_elements() {
        let cell = space.mesh().cell_coords(e);
        let mut pt = 0;
        for &zq in &rule.points {
            for &yq in &rule.points {
                for &xq in &rule.points {
                    let x = [
                        (cell[0] as f64 + xq) * h[0],
                        (cell[1] as f64 + yq) * h[1],
                        (cell[2] as f64 + zq) * h[2],
                    ];
                    let f = force(x);
                    let wdet = geom.weight(pt) * geom.det_at(e, pt);
                    for cdim in 0..3 {
                        fvals[cdim * q * q * q + pt] = wdet * f[cdim];
                    }
                    pt += 1;
                }
            }
        }
        local.fill(0.0);
        for cdim in 0..3 {
            let vals = &fvals[cdim * q * q * q..(cdim + 1) * q * q * q];
            let dst = &mut local[cdim * nloc..(cdim + 1) * nloc];
            // adjoint of value interpolation: F_i = sum_q B3d[q][i] v[q]
            for q3 in 0..q {
                for q2 in 0..q {
                    for q1 in 0..q {
                        let v = vals[(q3 * q + q2) * q + q1];
                        if v == 0.0 {
                            continue;
                        }
                        for i3 in 0..n {
                            let bz = basis.b[q3 * n + i3] * v;
                            for i2 in 0..n {
                                let byz = basis.b[q2 * n + i2] * bz;
                                for i1 in 0..n {
                                    dst[(i3 * n + i2) * n + i1] += basis.b[q1 * n + i1] * byz;
                                }
                            }
                        }
                    }
                }
            }
        }
        space.scatter_add(e, &local, &mut out);
    }
    let _ = ns;
    Ok(out)
}

/// sqrt of the integral of |u_h - u_exact|^2, by element-wise quadrature.
pub fn l2_error(
    space: &FESpace,
    solution: &[f64],
    exact: &(dyn Fn([f64; 3]) -> [f64; 3] + Sync),
    rule: &QuadRule1D,
) -> Result<f64> {
    let basis = Basis1D::new(space.order(), rule)?;
    let geom = GeometryFactors::compute(space, rule)?;
    let n = basis.ndof();
    let nloc = space.dofs_per_element();
    let h = space.mesh().cell_size();
    let mut local = vec![0.0; 3 * nloc];
    let mut total = 0.0;

    for e in 0..space.num_elements() {
        space.gather(e, solution, &mut local);
        let cell = space.mesh().cell_coords(e);
        let mut pt = 0;
        for (kz, &zq) in rule.points.iter().enumerate() {
            for (ky, &yq) in rule.points.iter().enumerate() {
                for (kx, &xq) in rule.points.iter().enumerate() {
                    let x = [
                        (cell[0] as f64 + xq) * h[0],
                        (cell[1] as f64 + yq) * h[1],
                        (cell[2] as f64 + zq) * h[2],
                    ];
                    let ue = exact(x);
                    let wdet = geom.weight(pt) * geom.det_at(e, pt);
                    for cdim in 0..3 {
                        let mut uh = 0.0;
                        for i3 in 0..n {
                            let bz = basis.b[kz * n + i3];
                            for i2 in 0..n {
                                let byz = basis.b[ky * n + i2] * bz;
                                for i1 in 0..n {
                                    uh += basis.b[kx * n + i1]
                                        * byz
                                        * local[cdim * nloc + (i3 * n + i2) * n + i1];
                                }
                            }
                        }
                        let d = uh - ue[cdim];
                        total += wdet * d * d;
                    }
                    pt += 1;
                }
            }
        }
    }
    Ok(total.sqrt())
}

/// Interpolates the exact trace onto the constrained DOFs and assembles
/// the lifted right-hand side b = F - A g (with b = g on constraints).
pub fn dirichlet_system(
    case: &ManufacturedCase,
    space: &Arc<FESpace>,
    op: &ConstrainedOperator,
    rule: &QuadRule1D,
) -> Result<Vec<f64>> {
    let bc = op.bc();
    let mut g = vec![0.0; space.vector_ndof()];
    let ns = space.scalar_ndof();
    for &dof in bc.indices() {
        let node = dof % ns;
        let comp = dof / ns;
        g[dof] = (case.displacement)(space.node_coords(node))[comp];
    }
    let mut b = manufactured_rhs(case.body_force.as_ref(), space, rule)?;
    if bc.indices().iter().any(|&i| g[i] != 0.0) {
        let mut ag = vec![0.0; space.vector_ndof()];
        op.inner().apply_add(&g, &mut ag);
        for i in 0..b.len() {
            b[i] -= ag[i];
        }
    }
    for &i in bc.indices() {
        b[i] = g[i];
    }
    Ok(b)
}

/// Result of one patch test.
#[derive(Clone, Debug)]
pub struct PatchOutcome {
    pub passed: bool,
    pub l2_error: f64,
    pub scale: f64,
}

/// Solves the case with Dirichlet data on all faces and checks that the
/// discrete solution reproduces it to solver precision. Exact for
/// polynomial solutions of degree <= p per direction.
pub fn patch_test(case: &ManufacturedCase, space: &Arc<FESpace>) -> Result<PatchOutcome> {
    let p = space.order();
    let rule = QuadRule1D::gauss_legendre(p + 1)?;
    let material = MaterialField::Constant(case.material.clone());
    let op = ElasticOperator::paop(space.clone(), material, &rule)?;
    let bc = Arc::new(space.boundary_dofs(&BoundaryFace::ALL, &[0, 1, 2]));
    let wrapped = ConstrainedOperator::new(Arc::new(op), bc);
    let b = dirichlet_system(case, space, &wrapped, &rule)?;
    let precond = JacobiPrecond::new(&wrapped.diagonal())?;
    let (x, report) = cg_solve(&wrapped, &precond, &b, 1e-12, 20000)?;
    if !report.converged {
        return Err(Error::Solver(format!(
            "patch-test CG stalled at {}",
            report.final_rel_residual
        )));
    }
    let err_rule = QuadRule1D::gauss_legendre(p + 2)?;
    let err = l2_error(space, &x, case.displacement.as_ref(), &err_rule)?;
    let zero = vec![0.0; space.vector_ndof()];
    let scale = l2_error(space, &zero, case.displacement.as_ref(), &err_rule)?.max(1e-30);
    Ok(PatchOutcome {
        passed: err <= 1e-9 * scale,
        l2_error: err,
        scale,
    })
}

/// Solves the case on `max_levels` successive refinements of the base
/// mesh with CG + GMG, returning errors and observed rates.
pub fn convergence_study(
    case: &ManufacturedCase,
    p: usize,
    base_cells: usize,
    max_levels: usize,
    variant: Variant,
) -> Result<Vec<ConvergenceRow>> {
    let base = Arc::new(crate::mesh::CartesianMesh::unit_cube(base_cells)?);
    let rule = QuadRule1D::gauss_legendre(p + 1)?;
    let err_rule = QuadRule1D::gauss_legendre(p + 2)?;
    let mut rows: Vec<ConvergenceRow> = Vec::new();

    let mut mesh = base.clone();
    for level in 0..max_levels {
        let space = Arc::new(FESpace::new(mesh.clone(), p)?);
        let material = MaterialField::Constant(case.material.clone());
        let op = match variant {
            Variant::Fa => ElasticOperator::fa(space.clone(), material, &rule)?,
            Variant::Pa => ElasticOperator::pa(
                space.clone(),
                material,
                &rule,
                crate::operators::PaStage::Baseline,
            )?,
            Variant::Paop => ElasticOperator::paop(space.clone(), material, &rule)?,
        };
        let bc = Arc::new(space.boundary_dofs(&BoundaryFace::ALL, &[0, 1, 2]));
        let wrapped = ConstrainedOperator::new(Arc::new(op), bc);
        let b = dirichlet_system(case, &space, &wrapped, &rule)?;

        let (x, report) = if level == 0 {
            let precond = JacobiPrecond::new(&wrapped.diagonal())?;
            cg_solve(&wrapped, &precond, &b, 1e-10, 20000)?
        } else {
            let gmg_config = GmgConfig {
                fine_variant: variant,
                ..GmgConfig::default()
            };
            let gmg = build_gmg(
                base.clone(),
                level + 1,
                p,
                case.material.clone(),
                &BoundaryFace::ALL,
                &[0, 1, 2],
                &gmg_config,
                None,
            )?;
            cg_solve(&wrapped, &gmg, &b, 1e-10, 500)?
        };
        if !report.converged {
            return Err(Error::Solver(format!(
                "convergence study: solver stalled on level {level}"
            )));
        }
        let err = l2_error(&space, &x, case.displacement.as_ref(), &err_rule)?;
        let rate = rows
            .last()
            .map(|prev: &ConvergenceRow| (prev.l2_error / err).log2());
        rows.push(ConvergenceRow {
            level,
            h: mesh.h_max(),
            scalar_ndof: space.scalar_ndof(),
            l2_error: err,
            rate,
        });
        mesh = Arc::new(mesh.refine_uniform());
    }
    Ok(rows)
}

/// Lifted solve of a case on a given space with GMG; used by the CLI
/// verify path and tests.
pub fn solve_case_gmg(
    case: &ManufacturedCase,
    base_cells: usize,
    refinements: usize,
    p: usize,
) -> Result<(Arc<FESpace>, Vec<f64>, SolveReport)> {
    let base = Arc::new(crate::mesh::CartesianMesh::unit_cube(base_cells)?);
    let mut mesh = base.clone();
    for _ in 0..refinements {
        mesh = Arc::new(mesh.refine_uniform());
    }
    let rule = QuadRule1D::gauss_legendre(p + 1)?;
    let space = Arc::new(FESpace::new(mesh, p)?);
    let material = MaterialField::Constant(case.material.clone());
    let op = ElasticOperator::paop(space.clone(), material, &rule)?;
    let bc = Arc::new(space.boundary_dofs(&BoundaryFace::ALL, &[0, 1, 2]));
    let wrapped = ConstrainedOperator::new(Arc::new(op), bc);
    let b = dirichlet_system(case, &space, &wrapped, &rule)?;
    let (x, report) = if refinements == 0 {
        let precond = JacobiPrecond::new(&wrapped.diagonal())?;
        cg_solve(&wrapped, &precond, &b, 1e-10, 20000)?
    } else {
        let gmg = build_gmg(
            base,
            refinements + 1,
            p,
            case.material.clone(),
            &BoundaryFace::ALL,
            &[0, 1, 2],
            &GmgConfig::default(),
            None,
        )?;
        cg_solve(&wrapped, &gmg, &b, 1e-10, 500)?
    };
    Ok((space, x, report))
}
