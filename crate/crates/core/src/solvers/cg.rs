//! Preconditioned conjugate gradient.

use crate::operators::LinearOp;
use crate::{Error, Result};

/// Application of an SPD preconditioner: z = M r.
pub trait Preconditioner {
    fn apply_precond(&self, r: &[f64], z: &mut [f64]);
}

pub struct IdentityPrecond;

impl Preconditioner for IdentityPrecond {
    fn apply_precond(&self, r: &[f64], z: &mut [f64]) {
        z.copy_from_slice(r);
    }
}

pub struct JacobiPrecond {
    inv_diag: Vec<f64>,
}

impl JacobiPrecond {
    pub fn new(diag: &[f64]) -> Result<Self> {
        let mut inv_diag = vec![0.0; diag.len()];
        for (i, &d) in diag.iter().enumerate() {
            if !(d > 0.0) {
                return Err(Error::Solver(format!(
                    "non-positive diagonal entry {d} at dof {i}"
                )));
            }
            inv_diag[i] = 1.0 / d;
        }
        Ok(JacobiPrecond { inv_diag })
    }
}

impl Preconditioner for JacobiPrecond {
    fn apply_precond(&self, r: &[f64], z: &mut [f64]) {
        for i in 0..r.len() {
            z[i] = self.inv_diag[i] * r[i];
        }
    }
}

/// Outcome of an iterative solve.
#[derive(Clone, Debug)]
pub struct SolveReport {
    pub iterations: usize,
    /// Preconditioned residual norm sqrt(<r, z>) per iteration, starting
    /// with the initial residual.
    pub residual_history: Vec<f64>,
    pub converged: bool,
    pub final_rel_residual: f64,
}

/// Preconditioned CG from a zero initial guess; convergence is tested on
/// the preconditioned residual norm relative to its initial value.
/// Exhausting `max_iters` reports `converged = false`; a detected
/// indefiniteness is an error.
pub fn cg_solve(
    op: &dyn LinearOp,
    precond: &dyn Preconditioner,
    b: &[f64],
    rel_tol: f64,
    max_iters: usize,
) -> Result<(Vec<f64>, SolveReport)> {
    let n = op.dim();
    if b.len() != n {
        return Err(Error::invalid(format!(
            "rhs length {} does not match operator dimension {n}",
            b.len()
        )));
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = vec![0.0; n];
    precond.apply_precond(&r, &mut z);
    let mut rz: f64 = dot(&r, &z);
    if rz < 0.0 {
        return Err(Error::Solver(format!(
            "preconditioner produced negative <r, z> = {rz}"
        )));
    }
    let res0 = rz.sqrt();
    if res0 == 0.0 {
        return Ok((
            x,
            SolveReport {
                iterations: 0,
                residual_history: Vec::new(),
                converged: true,
                final_rel_residual: 0.0,
            },
        ));
    }
    let mut history = vec![res0];
    let mut d = z.clone();
    let mut q = vec![0.0; n];
    let mut iterations = 0;
    let mut converged = false;
    let mut res = res0;

    while iterations < max_iters {
        op.apply(&d, &mut q);
        let dq = dot(&d, &q);
        if dq <= 0.0 {
            return Err(Error::Solver(format!(
                "indefiniteness detected: <d, A d> = {dq} at iteration {iterations}"
            )));
        }
        let alpha = rz / dq;
        for i in 0..n {
            x[i] += alpha * d[i];
            r[i] -= alpha * q[i];
        }
        precond.apply_precond(&r, &mut z);
        let rz_next = dot(&r, &z);
        iterations += 1;
        res = rz_next.max(0.0).sqrt();
        if res > 0.0 {
            history.push(res);
        }
        if res <= rel_tol * res0 {
            converged = true;
            break;
        }
        if rz_next <= 0.0 {
            return Err(Error::Solver(format!(
                "preconditioned residual lost positivity: {rz_next}"
            )));
        }
        let beta = rz_next / rz;
        for i in 0..n {
            d[i] = z[i] + beta * d[i];
        }
        rz = rz_next;
    }

    Ok((
        x,
        SolveReport {
            iterations,
            residual_history: history,
            converged,
            final_rel_residual: res / res0,
        },
    ))
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}
