//! Pseudospectral solver for L²-normalized solitary waves of the
//! Maxwell–Dirac and Coulomb–Dirac equations.
//!
//! The computation is two-level: for a fixed unit direction `w` in the
//! positive spectral subspace the energy is maximized over the negative
//! part of the fiber ([`fiber`]); the resulting value is then minimized
//! over `w` on the unit sphere ([`minimizer`]). [`verify`] evaluates the
//! functional inequalities that the construction relies on.

pub mod cli;
pub mod coulomb;
pub mod dirac;
pub mod error;
pub mod fiber;
pub mod functional;
pub mod minimizer;
pub mod spectral;
pub mod verify;

pub use error::{Error, Result};
