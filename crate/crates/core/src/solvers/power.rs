//! Power iteration on the diagonally-scaled operator.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::operators::LinearOp;
use crate::{Error, Result};

/// Estimates the largest eigenvalue of D^-1 A by `iters` power steps from
/// a seeded random vector, and returns it inflated by a 1.1 safety
/// factor. Deterministic for a given seed.
pub fn power_iteration_lambda_max(
    op: &dyn LinearOp,
    inv_diag: &[f64],
    iters: usize,
    seed: u64,
) -> Result<f64> {
    let n = op.dim();
    if iters == 0 {
        return Err(Error::invalid("power iteration needs at least one step"));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut v: Vec<f64> = (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect();
    normalize(&mut v)?;
    let mut w = vec![0.0; n];
    let mut lambda = 0.0;
    for _ in 0..iters {
        op.apply(&v, &mut w);
        for (wi, di) in w.iter_mut().zip(inv_diag) {
            *wi *= di;
        }
        // Rayleigh quotient of the scaled operator (v normalized)
        lambda = v.iter().zip(&w).map(|(a, b)| a * b).sum();
        v.copy_from_slice(&w);
        normalize(&mut v)?;
    }
    if !(lambda > 0.0) {
        return Err(Error::Solver(format!(
            "power iteration produced non-positive estimate {lambda}"
        )));
    }
    Ok(1.1 * lambda)
}

fn normalize(v: &mut [f64]) -> Result<()> {
    let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
    if norm == 0.0 {
        return Err(Error::Solver("power iteration hit a zero vector".into()));
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    Ok(())
}
