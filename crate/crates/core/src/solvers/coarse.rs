//! Coarse-grid solve on the assembled, constrained matrix: dense
//! Cholesky up to a size cap, diagonally-preconditioned CG beyond it.

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::operators::SparseMatrix;
use crate::{Error, Result};

use super::cg::{cg_solve, JacobiPrecond};

const ITERATIVE_TOL: f64 = 1e-10;

pub enum CoarseSolver {
    Dense {
        chol: Cholesky<f64, Dyn>,
        dim: usize,
    },
    Iterative {
        matrix: SparseMatrix,
        precond: JacobiPrecond,
    },
}

impl CoarseSolver {
    /// Factorizes or wraps the (already constrained) coarse matrix.
    pub fn new(matrix: SparseMatrix, dense_cap: usize) -> Result<Self> {
        let n = matrix.dim();
        if n <= dense_cap {
            let dense: DMatrix<f64> = matrix.to_dense();
            let chol = Cholesky::new(dense).ok_or_else(|| {
                Error::Solver("coarse matrix is not SPD (Cholesky breakdown)".into())
            })?;
            Ok(CoarseSolver::Dense { chol, dim: n })
        } else {
            let precond = JacobiPrecond::new(&matrix.diagonal())?;
            Ok(CoarseSolver::Iterative { matrix, precond })
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            CoarseSolver::Dense { dim, .. } => *dim,
            CoarseSolver::Iterative { matrix, .. } => matrix.dim(),
        }
    }

    pub fn is_direct(&self) -> bool {
        matches!(self, CoarseSolver::Dense { .. })
    }

    pub fn solve(&self, b: &[f64], x: &mut [f64]) -> Result<()> {
        match self {
            CoarseSolver::Dense { chol, .. } => {
                let rhs = DVector::from_column_slice(b);
                let sol = chol.solve(&rhs);
                x.copy_from_slice(sol.as_slice());
                Ok(())
            }
            CoarseSolver::Iterative { matrix, precond } => {
                let iters = 50 * matrix.dim().max(100);
                let (sol, report) = cg_solve(matrix, precond, b, ITERATIVE_TOL, iters)?;
                if !report.converged {
                    return Err(Error::Solver(format!(
                        "coarse CG stalled at relative residual {}",
                        report.final_rel_residual
                    )));
                }
                x.copy_from_slice(&sol);
                Ok(())
            }
        }
    }
}
