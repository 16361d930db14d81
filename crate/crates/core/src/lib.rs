//! hp-adaptive interior penalty discontinuous Galerkin solver for the 2D
//! biharmonic problem, with a residual a posteriori error estimator,
//! h- and hp-adaptive drivers, and a numerical verification lab for
//! hp-explicit polynomial inverse estimates.

pub mod basis;
pub mod mesh;
pub mod solve;
pub mod system;
pub mod adaptivity;
pub mod estimator;

pub use basis::ElemKind;
