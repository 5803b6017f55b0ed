//! Numerical laboratory for harmonic measure on low-dimensional Lipschitz graphs.
//!
//! The crate builds, piece by piece, the objects needed to study the degenerate
//! elliptic operator `L = -div D^{d+1-n} grad` on the complement of a
//! d-dimensional Lipschitz graph in R^n:
//!
//! * [`geometry`] — graph families, mollified parameterizations and their jets;
//! * [`frames`] — orthonormal frames adapted to the approximate tangent plane;
//! * [`distance`] — the soft distance `D_alpha`, the density `lambda`, and the
//!   scale function `h`;
//! * [`chvar`] — the change of variables `rho`, its Jacobian algebra and the
//!   conjugated coefficient matrix;
//! * [`geonum`] — Jones beta numbers, Wasserstein distances and Tolsa alpha
//!   numbers;
//! * [`carleson`] — Carleson norm estimation over dyadic box sweeps;
//! * [`solver`] — a finite-volume discretization of the weighted operator with
//!   discrete harmonic measure;
//! * [`diagnostics`] — square function / non-tangential maximal function
//!   statistics and the A-infinity scatter.
//!
//! Everything is deterministic for a fixed seed; all tolerances are explicit
//! arguments or config fields and are echoed in the reports.

pub mod carleson;
pub mod chvar;
pub mod diagnostics;
pub mod distance;
pub mod error;
pub mod frames;
pub mod geometry;
pub mod geonum;
pub mod opt;
pub mod quad;
pub mod solver;
pub mod sparse;
pub mod verify;

pub use error::{Error, Result};
