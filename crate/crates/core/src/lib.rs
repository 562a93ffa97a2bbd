//! Space-time isogeometric solver for the monodomain equation with the
//! Rogers-McCulloch ionic model.

pub mod assembly;
pub mod error;
pub mod field;
pub mod geometry;
pub mod linalg;
pub mod params;
pub mod quadrature;
pub mod solver;
pub mod sparse;
pub mod spline;
pub mod su_stab;

pub use error::{Error, Result};
pub use params::Parameters;
