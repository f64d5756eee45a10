use std::f64::consts::PI;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Periodic cubic grid with `n` points per axis on a box of side `l`.
///
/// Positions are `x_j = j h` read with the minimum-image convention, momenta
/// are `p_k = 2πk/l` with `k ∈ {-n/2, …, n/2 - 1}` stored in FFT order.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    n: usize,
    l: f64,
}

impl GridSpec {
    pub fn new(n: usize, l: f64) -> Result<Self> {
        if n < 8 || n % 2 != 0 {
            return Err(Error::InvalidGrid(format!(
                "n must be even and >= 8, got {n}"
            )));
        }
        if !(l.is_finite() && l > 0.0) {
            return Err(Error::InvalidGrid(format!("l must be positive, got {l}")));
        }
        Ok(Self { n, l })
    }

    #[inline]
    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn l(&self) -> f64 {
        self.l
    }

    /// Total number of grid points, `n³`.
    #[inline]
    pub fn len(&self) -> usize {
        self.n * self.n * self.n
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        false
    }

    #[inline]
    pub fn spacing(&self) -> f64 {
        self.l / self.n as f64
    }

    /// Quadrature weight `h³` of a position-space sum.
    #[inline]
    pub fn position_weight(&self) -> f64 {
        self.spacing().powi(3)
    }

    /// Quadrature weight `(2π/l)³` of a momentum-space sum.
    #[inline]
    pub fn momentum_weight(&self) -> f64 {
        (2.0 * PI / self.l).powi(3)
    }

    #[inline]
    pub fn momentum_spacing(&self) -> f64 {
        2.0 * PI / self.l
    }

    /// Row-major flat index, z fastest.
    #[inline]
    pub fn index(&self, ix: usize, iy: usize, iz: usize) -> usize {
        (ix * self.n + iy) * self.n + iz
    }

    #[inline]
    pub fn unflatten(&self, i: usize) -> [usize; 3] {
        let n = self.n;
        [i / (n * n), (i / n) % n, i % n]
    }

    /// Signed lattice index in `{-n/2, …, n/2 - 1}`.
    #[inline]
    pub fn signed(&self, j: usize) -> i64 {
        let n = self.n as i64;
        let j = j as i64;
        if j < n / 2 { j } else { j - n }
    }

    /// Minimum-image position of flat index `i`.
    #[inline]
    pub fn position(&self, i: usize) -> [f64; 3] {
        let h = self.spacing();
        let [a, b, c] = self.unflatten(i);
        [
            self.signed(a) as f64 * h,
            self.signed(b) as f64 * h,
            self.signed(c) as f64 * h,
        ]
    }

    /// Momentum of flat index `i` (FFT ordering).
    #[inline]
    pub fn momentum(&self, i: usize) -> [f64; 3] {
        let dp = self.momentum_spacing();
        let [a, b, c] = self.unflatten(i);
        [
            self.signed(a) as f64 * dp,
            self.signed(b) as f64 * dp,
            self.signed(c) as f64 * dp,
        ]
    }

    /// Flat index of the lattice momentum `-p` (the Nyquist plane maps to itself).
    #[inline]
    pub fn negated(&self, i: usize) -> usize {
        let n = self.n;
        let [a, b, c] = self.unflatten(i);
        self.index((n - a) % n, (n - b) % n, (n - c) % n)
    }

    pub fn check_same(&self, other: &GridSpec) -> Result<()> {
        if self.n != other.n || self.l.to_bits() != other.l.to_bits() {
            return Err(Error::GridMismatch {
                left_n: self.n,
                left_l: self.l,
                right_n: other.n,
                right_l: other.l,
            });
        }
        Ok(())
    }
}
