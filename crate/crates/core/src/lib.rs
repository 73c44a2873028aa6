//! High-order ADER discontinuous Galerkin solver for 3D linear
//! elastodynamics on curvilinear hexahedral meshes.
//!
//! The state has 9 components per node, velocities first and then stresses
//! in Voigt order: `(vx, vy, vz, sxx, syy, szz, sxy, sxz, syz)`.

#![allow(clippy::needless_range_loop, clippy::neg_cmp_op_on_partial_ord)]

pub mod diagnostics;
pub mod discretization;
pub mod error;
pub mod exec;
pub mod geometry;
pub mod material;
pub mod riemann;
pub mod scenario;
pub mod sources;
pub mod specops;
pub mod timeint;
pub mod verify;

pub use error::{Error, Result};
