//! Krylov solvers, eigendecompositions, the fast-diagonalization
//! preconditioner and the recovery-variable solver.

mod decomp;
mod direct;
mod krylov;
mod precond;
mod wsolve;

pub use decomp::{build_time_pencil, generalized_eig, SpaceEigen, TimePencil, C64};
pub use direct::{sparse_solve, DirectSolver};
pub use krylov::{gmres, pcg, IdentityPreconditioner, KrylovOutput, LinearOperator, Preconditioner};
pub use precond::{ArrowheadBlock, FastDiagPreconditioner, MassPreconditioner, IMAGINARY_TOLERANCE};
pub use wsolve::{solve_w_dense, solve_w_system, MassSolver, WSolution};
