//! Krylov solver, smoother, and the geometric multigrid preconditioner.

pub mod cg;
pub mod chebyshev;
pub mod coarse;
pub mod gmg;
pub mod power;

pub use cg::{cg_solve, IdentityPrecond, JacobiPrecond, Preconditioner, SolveReport};
pub use chebyshev::ChebyshevSmoother;
pub use coarse::CoarseSolver;
pub use gmg::{build_gmg, GmgConfig, GmgPreconditioner};
pub use power::power_iteration_lambda_max;
