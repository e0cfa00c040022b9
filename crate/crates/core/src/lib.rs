//! Finite-dimensional operator-system toolkit.
//!
//! Builds q-commuting and Λ-commuting unitary tuples, decides UCP-map
//! existence and matrix-range membership through semidefinite feasibility
//! over Choi matrices, classifies irreducible pairs, probes maximality of
//! UCP maps and computes q-commuting dilation constants with certified
//! error bounds.

pub mod error;
pub mod numerics;
pub mod sdp;
pub mod tuples;
pub mod cpmaps;
pub mod matrange;
pub mod extremal;
pub mod spectral;
pub mod acceptance;

pub use error::{Error, Result};
pub use numerics::{ComplexMatrix, C64};
