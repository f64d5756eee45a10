//! Periodic grid, Fourier transforms, fields and quadrature inner products.

mod fft;
mod field;
mod grid;
pub mod snapshot;

pub use field::{
    Direction, Field, Representation, ScalarField, SpinorField, TwoSpinorField, VectorField3,
    l2_inner, sobolev_inner, sobolev_norm_sq,
};
pub use grid::GridSpec;
