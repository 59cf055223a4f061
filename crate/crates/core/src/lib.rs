//! Smooth orthogonal projections built from Hestenes operators, and the
//! machinery to verify their averaging identities numerically.
//!
//! * [`bell`]: the cutoff `s` with `s²(t) + s²(-t) = 1`.
//! * [`hestenes1d`]: projections `P_[α,β]` on the line and their algebra.
//! * [`lattice`]: tensor projections on `ℝ^d`, fundamental-domain tilings and
//!   the decomposition of identity under lattice shifts.
//! * [`circle`]: projections on arcs of `S¹` and their rotation averages.
//! * [`spheregeom`]: coordinates, rotations and quadrature on `S²` and `SO(3)`.
//! * [`sphereops`]: latitudinal, lifted and patch projections on the sphere.
//! * [`frame`]: the localized continuous Parseval frame on the sphere.
//! * [`report`]: the machine-readable verification report.

pub mod bell;
pub mod circle;
pub mod error;
pub mod frame;
pub mod hestenes1d;
pub mod lattice;
pub mod quadrature;
pub mod report;
pub mod spheregeom;
pub mod sphereops;

pub use error::{Error, Result};
