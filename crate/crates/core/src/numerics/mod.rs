//! Dense numerical primitives used by the optimizers.

mod eig;
mod ellipsoid;
mod golden;

pub use eig::{hermitian_eig, top_eigenpair, EigenResult};
pub(crate) use eig::fix_phase;
pub use ellipsoid::{ellipsoid_maximize, ellipsoid_maximize_until, Ellipsoid, EllipsoidOutcome, EllipsoidSettings};
pub use golden::golden_section;
