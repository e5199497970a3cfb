//! Numerical workbench for SU(2) coherent states, reflection positivity,
//! chessboard estimates and spin-wave free energies of classical and
//! quantum spin models on small tori.

// Negated comparisons such as `!(x > 0.0)` are deliberate: they reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod classical_mc;
pub mod error;
pub mod linalg;
pub mod models;
pub mod quantum_lab;
pub mod spinwave;
pub mod stats;
pub mod su2kit;
pub mod symbols;
pub mod torus;

pub use error::{Error, Result};
pub use linalg::{CMat, CVec, C64};
pub use su2kit::{
    ClassicalConfig, CoherentVector, DistanceBundle, SphericalPoint, SpinMagnitude, SpinOperators,
    Vec3,
};
