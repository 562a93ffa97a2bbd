//! Spline Upwind stabilization: `τ_k`, the activation coefficient Θ, its
//! low-rank compression and the resulting Kronecker terms.

mod lowrank;
mod matrices;
mod tau;
mod theta;

pub use lowrank::{lowrank_factorize, LowRankTheta};
pub use matrices::{interp_linear, StabilizationMatrices, Stabilizer};
pub use tau::{compute_tau, TauFunctions, TAU_FAILURE_RESIDUAL};
pub use theta::{compute_theta, residual_summary, strong_residual, ResidualSummary, ThetaTensor};
