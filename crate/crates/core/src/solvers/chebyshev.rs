//! Chebyshev polynomial smoother: k operator applications, diagonal
//! scaling, and vector updates; no matrix entries needed.

use std::sync::Arc;

use crate::operators::LinearOp;
use crate::{Error, Result};

/// Fixed polynomial-in-the-operator relaxation tuned to damp the
/// eigenvalue interval [lo, hi] of the diagonally-scaled operator. The
/// update is x <- x + p_k(D^-1 A) D^-1 (b - A x) realized by the standard
/// three-term recurrence, so smoothing is linear in the residual.
pub struct ChebyshevSmoother {
    op: Arc<dyn LinearOp>,
    inv_diag: Vec<f64>,
    order: usize,
    eig_lo: f64,
    eig_hi: f64,
}

impl ChebyshevSmoother {
    /// `lambda_max` is the (safety-inflated) top eigenvalue estimate of
    /// D^-1 A; the damped interval is [alpha, beta] * lambda_max.
    pub fn new(
        op: Arc<dyn LinearOp>,
        inv_diag: Vec<f64>,
        lambda_max: f64,
        order: usize,
        alpha: f64,
        beta: f64,
    ) -> Result<Self> {
        if !(lambda_max > 0.0) {
            return Err(Error::invalid("lambda_max must be positive"));
        }
        if order == 0 {
            return Err(Error::invalid("smoother order must be at least 1"));
        }
        if !(alpha > 0.0 && alpha < beta) {
            return Err(Error::invalid("need 0 < alpha < beta"));
        }
        Ok(ChebyshevSmoother {
            op,
            inv_diag,
            order,
            eig_lo: alpha * lambda_max,
            eig_hi: beta * lambda_max,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    /// One smoothing sweep (k operator applications) updating `x`.
    pub fn smooth(&self, b: &[f64], x: &mut [f64]) {
        let n = x.len();
        debug_assert_eq!(b.len(), n);
        let theta = 0.5 * (self.eig_hi + self.eig_lo);
        let delta = 0.5 * (self.eig_hi - self.eig_lo);

        let mut r = b.to_vec();
        let mut ax = vec![0.0; n];
        self.op.apply(x, &mut ax);
        for i in 0..n {
            r[i] -= ax[i];
        }
        let mut d: Vec<f64> = (0..n).map(|i| self.inv_diag[i] * r[i] / theta).collect();

        // degenerate interval: fall back to Richardson steps at 1/theta
        let degenerate = delta <= 1e-14 * theta;
        let sigma = theta / delta.max(1e-300);
        let mut rho = 1.0 / sigma;

        for step in 0..self.order {
            for i in 0..n {
                x[i] += d[i];
            }
            if step + 1 == self.order {
                break;
            }
            self.op.apply(&d, &mut ax);
            for i in 0..n {
                r[i] -= ax[i];
            }
            if degenerate {
                for i in 0..n {
                    d[i] = self.inv_diag[i] * r[i] / theta;
                }
            } else {
                let rho_next = 1.0 / (2.0 * sigma - rho);
                for i in 0..n {
                    d[i] = rho_next * rho * d[i] + 2.0 * rho_next / delta * self.inv_diag[i] * r[i];
                }
                rho = rho_next;
            }
        }
    }
}
