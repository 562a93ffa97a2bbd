//! Relaxed fixed-point driver for the coupled `(u, w)` system and error
//! norms.

mod driver;
mod norms;

pub use driver::{
    fixed_point_solve, FixedPointConfig, IterationRecord, LinearSolverChoice, MonodomainProblem, SolveResult, Source,
    Stabilization, ThetaSource, DIRECT_DOF_LIMIT,
};
pub use norms::{l2_error, L2Error};
