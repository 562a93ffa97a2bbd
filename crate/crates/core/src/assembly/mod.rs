//! Quadrature, univariate and spatial matrices, Kronecker operators and
//! space-time assembly.

mod cells;
mod kron;
mod space;
mod spacetime;
mod univariate;

pub use cells::{Cell1D, Cells1D};
pub use kron::{apply_mode, kron_apply, KronTerm, KroneckerOperator};
pub use space::{spatial_operators, SpaceFactor, SpaceOperator, SpaceQuadrature, SpatialOperators};
pub use spacetime::{SourceFn, SpaceKind, SpaceTimeAssembler, SpaceTimeQuadrature};
pub use univariate::{
    constrain, time_matrices, univariate_matrices, weighted_derivative_matrix, TimeMatrices, UnivariateMatrices,
};
