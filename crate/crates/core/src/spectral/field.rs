use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft;
use super::grid::GridSpec;
use crate::error::{Error, Result};

/// Which basis the samples of a field are expressed in.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Representation {
    Position,
    Momentum,
}

impl Representation {
    pub fn tag(self) -> u8 {
        match self {
            Representation::Position => 0,
            Representation::Momentum => 1,
        }
    }

    pub fn from_tag(tag: u8) -> Option<Self> {
        match tag {
            0 => Some(Representation::Position),
            1 => Some(Representation::Momentum),
            _ => None,
        }
    }
}

/// Direction of a Fourier transform; `Forward` goes position → momentum.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Forward,
    Inverse,
}

impl Direction {
    pub fn source(self) -> Representation {
        match self {
            Direction::Forward => Representation::Position,
            Direction::Inverse => Representation::Momentum,
        }
    }
}

/// `C`-component complex field sampled on a [`GridSpec`].
///
/// The representation is an explicit tag: nothing converts implicitly, so
/// every transform in a computation is visible at the call site.
#[derive(Debug, Clone, PartialEq)]
pub struct Field<const C: usize> {
    grid: GridSpec,
    repr: Representation,
    comps: [Vec<Complex64>; C],
}

pub type ScalarField = Field<1>;
pub type TwoSpinorField = Field<2>;
pub type VectorField3 = Field<3>;
pub type SpinorField = Field<4>;

impl<const C: usize> Field<C> {
    pub fn zeros(grid: GridSpec, repr: Representation) -> Self {
        Self {
            grid,
            repr,
            comps: std::array::from_fn(|_| vec![Complex64::new(0.0, 0.0); grid.len()]),
        }
    }

    /// Samples `f` at the minimum-image positions of the grid.
    pub fn from_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [Complex64; C]) -> Self {
        let mut out = Self::zeros(grid, Representation::Position);
        for i in 0..grid.len() {
            let v = f(grid.position(i));
            for (c, value) in v.into_iter().enumerate() {
                out.comps[c][i] = value;
            }
        }
        out
    }

    /// Samples `f` at the lattice momenta (momentum representation).
    pub fn from_momentum_fn(grid: GridSpec, f: impl Fn([f64; 3]) -> [Complex64; C]) -> Self {
        let mut out = Self::zeros(grid, Representation::Momentum);
        for i in 0..grid.len() {
            let v = f(grid.momentum(i));
            for (c, value) in v.into_iter().enumerate() {
                out.comps[c][i] = value;
            }
        }
        out
    }

    pub fn from_components(
        grid: GridSpec,
        repr: Representation,
        comps: [Vec<Complex64>; C],
    ) -> Result<Self> {
        for (c, v) in comps.iter().enumerate() {
            if v.len() != grid.len() {
                return Err(Error::InvalidArgument(format!(
                    "component {c} has {} samples, grid needs {}",
                    v.len(),
                    grid.len()
                )));
            }
        }
        Ok(Self { grid, repr, comps })
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn repr(&self) -> Representation {
        self.repr
    }

    #[inline]
    pub fn components(&self) -> &[Vec<Complex64>; C] {
        &self.comps
    }

    #[inline]
    pub fn components_mut(&mut self) -> &mut [Vec<Complex64>; C] {
        &mut self.comps
    }

    #[inline]
    pub fn component(&self, c: usize) -> &[Complex64] {
        &self.comps[c]
    }

    #[inline]
    pub fn into_components(self) -> [Vec<Complex64>; C] {
        self.comps
    }

    /// All `C` values at flat index `i`.
    #[inline]
    pub fn at(&self, i: usize) -> [Complex64; C] {
        std::array::from_fn(|c| self.comps[c][i])
    }

    #[inline]
    pub fn set(&mut self, i: usize, v: [Complex64; C]) {
        for (c, value) in v.into_iter().enumerate() {
            self.comps[c][i] = value;
        }
    }

    pub fn check_compatible(&self, other: &Self) -> Result<()> {
        self.grid.check_same(&other.grid)?;
        if self.repr != other.repr {
            return Err(Error::RepresentationMismatch {
                expected: self.repr,
                found: other.repr,
            });
        }
        Ok(())
    }

    /// Quadrature weight of sums in the current representation.
    #[inline]
    pub fn weight(&self) -> f64 {
        match self.repr {
            Representation::Position => self.grid.position_weight(),
            Representation::Momentum => self.grid.momentum_weight(),
        }
    }

    pub fn transform_in_place(&mut self, direction: Direction) -> Result<()> {
        if self.repr != direction.source() {
            return Err(Error::RepresentationMismatch {
                expected: direction.source(),
                found: self.repr,
            });
        }
        let g = self.grid;
        let plan = fft::plan(g.n());
        let (forward, factor, target) = match direction {
            Direction::Forward => (
                true,
                g.position_weight() / (2.0 * PI).powf(1.5),
                Representation::Momentum,
            ),
            Direction::Inverse => (
                false,
                g.momentum_weight() / (2.0 * PI).powf(1.5),
                Representation::Position,
            ),
        };
        for comp in self.comps.iter_mut() {
            plan.process(comp, forward);
            for v in comp.iter_mut() {
                *v *= factor;
            }
        }
        self.repr = target;
        Ok(())
    }

    pub fn transform(&self, direction: Direction) -> Result<Self> {
        let mut out = self.clone();
        out.transform_in_place(direction)?;
        Ok(out)
    }

    pub fn into_momentum(mut self) -> Self {
        if self.repr == Representation::Position {
            self.transform_in_place(Direction::Forward)
                .expect("source representation checked");
        }
        self
    }

    pub fn into_position(mut self) -> Self {
        if self.repr == Representation::Momentum {
            self.transform_in_place(Direction::Inverse)
                .expect("source representation checked");
        }
        self
    }

    pub fn to_momentum(&self) -> Self {
        self.clone().into_momentum()
    }

    pub fn to_position(&self) -> Self {
        self.clone().into_position()
    }

    pub fn into_repr(self, repr: Representation) -> Self {
        match repr {
            Representation::Position => self.into_position(),
            Representation::Momentum => self.into_momentum(),
        }
    }

    /// `‖f‖²_{L²}` as a quadrature sum in the current representation.
    pub fn norm_sq(&self) -> f64 {
        let s: f64 = self
            .comps
            .iter()
            .map(|c| c.iter().map(|v| v.norm_sqr()).sum::<f64>())
            .sum();
        s * self.weight()
    }

    pub fn norm(&self) -> f64 {
        self.norm_sq().sqrt()
    }

    pub fn scale(&mut self, alpha: Complex64) {
        for comp in self.comps.iter_mut() {
            for v in comp.iter_mut() {
                *v *= alpha;
            }
        }
    }

    pub fn scale_real(&mut self, alpha: f64) {
        for comp in self.comps.iter_mut() {
            for v in comp.iter_mut() {
                *v *= alpha;
            }
        }
    }

    pub fn scaled(&self, alpha: f64) -> Self {
        let mut out = self.clone();
        out.scale_real(alpha);
        out
    }

    /// `self += alpha * other`.
    pub fn add_scaled(&mut self, alpha: f64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.comps.iter_mut().zip(other.comps.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    pub fn add_scaled_complex(&mut self, alpha: Complex64, other: &Self) -> Result<()> {
        self.check_compatible(other)?;
        for (a, b) in self.comps.iter_mut().zip(other.comps.iter()) {
            for (x, y) in a.iter_mut().zip(b.iter()) {
                *x += alpha * y;
            }
        }
        Ok(())
    }

    /// `self + alpha * other` as a new field.
    pub fn plus_scaled(&self, alpha: f64, other: &Self) -> Result<Self> {
        let mut out = self.clone();
        out.add_scaled(alpha, other)?;
        Ok(out)
    }

    /// Largest absolute sample, used in tests and diagnostics.
    pub fn max_abs(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.norm()))
    }

    /// Largest |imaginary part| over all samples.
    pub fn max_imag(&self) -> f64 {
        self.comps
            .iter()
            .flat_map(|c| c.iter())
            .fold(0.0f64, |m, v| m.max(v.im.abs()))
    }

    /// Cyclic shift by whole grid steps (position representation only).
    pub fn shifted(&self, shift: [usize; 3]) -> Result<Self> {
        if self.repr != Representation::Position {
            return Err(Error::RepresentationMismatch {
                expected: Representation::Position,
                found: self.repr,
            });
        }
        let g = self.grid;
        let n = g.n();
        let mut out = Self::zeros(g, Representation::Position);
        for i in 0..g.len() {
            let [a, b, c] = g.unflatten(i);
            let j = g.index((a + shift[0]) % n, (b + shift[1]) % n, (c + shift[2]) % n);
            for k in 0..C {
                out.comps[k][j] = self.comps[k][i];
            }
        }
        Ok(out)
    }
}

impl ScalarField {
    /// Real scalar field from samples in position space.
    pub fn from_real(grid: GridSpec, values: &[f64]) -> Result<Self> {
        Self::from_components(
            grid,
            Representation::Position,
            [values.iter().map(|&v| Complex64::new(v, 0.0)).collect()],
        )
    }

    pub fn real_values(&self) -> Vec<f64> {
        self.comps[0].iter().map(|v| v.re).collect()
    }
}

impl TwoSpinorField {
    /// Places the two components into the upper (`upper = true`) or lower
    /// block of a four-spinor; the other block is zero.
    pub fn to_four(&self, upper: bool) -> SpinorField {
        let mut out = SpinorField::zeros(self.grid, self.repr);
        let off = if upper { 0 } else { 2 };
        out.comps[off] = self.comps[0].clone();
        out.comps[off + 1] = self.comps[1].clone();
        out
    }
}

impl SpinorField {
    /// Upper (`true`) or lower two-spinor block.
    pub fn block(&self, upper: bool) -> TwoSpinorField {
        let off = if upper { 0 } else { 2 };
        TwoSpinorField {
            grid: self.grid,
            repr: self.repr,
            comps: [self.comps[off].clone(), self.comps[off + 1].clone()],
        }
    }
}

/// `⟨f|g⟩_{L²}`, conjugate-linear in the first slot.
pub fn l2_inner<const C: usize>(f: &Field<C>, g: &Field<C>) -> Result<Complex64> {
    f.check_compatible(g)?;
    let mut acc = Complex64::new(0.0, 0.0);
    for (a, b) in f.comps.iter().zip(g.comps.iter()) {
        for (x, y) in a.iter().zip(b.iter()) {
            acc += x.conj() * y;
        }
    }
    Ok(acc * f.weight())
}

/// `Σ_p λ(p)^{2s} (f̂, ĝ) w_p` with `λ(p) = √(|p|² + 1)`, for `s ∈ {-1/2, 1/2, 1}`.
///
/// Both fields are brought to momentum space first; `s = 1/2` is the
/// `H^{1/2}` product, `s = -1/2` its dual.
pub fn sobolev_inner<const C: usize>(f: &Field<C>, g: &Field<C>, s: f64) -> Result<Complex64> {
    let exponent = if s == 0.5 {
        SobolevOrder::Half
    } else if s == -0.5 {
        SobolevOrder::MinusHalf
    } else if s == 1.0 {
        SobolevOrder::One
    } else {
        return Err(Error::UnsupportedSobolevOrder(s));
    };
    f.grid.check_same(&g.grid)?;
    let fm = f.to_momentum();
    let gm = g.to_momentum();
    let grid = f.grid;
    let mut acc = Complex64::new(0.0, 0.0);
    for i in 0..grid.len() {
        let p = grid.momentum(i);
        let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        let w = exponent.weight(p2);
        let mut local = Complex64::new(0.0, 0.0);
        for c in 0..C {
            local += fm.comps[c][i].conj() * gm.comps[c][i];
        }
        acc += w * local;
    }
    Ok(acc * grid.momentum_weight())
}

pub fn sobolev_norm_sq<const C: usize>(f: &Field<C>, s: f64) -> Result<f64> {
    Ok(sobolev_inner(f, f, s)?.re)
}

#[derive(Clone, Copy)]
enum SobolevOrder {
    MinusHalf,
    Half,
    One,
}

impl SobolevOrder {
    #[inline]
    fn weight(self, p2: f64) -> f64 {
        match self {
            SobolevOrder::MinusHalf => 1.0 / (p2 + 1.0).sqrt(),
            SobolevOrder::Half => (p2 + 1.0).sqrt(),
            SobolevOrder::One => p2 + 1.0,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_field<const C: usize>(grid: GridSpec, seed: u64) -> Field<C> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut f = Field::<C>::zeros(grid, Representation::Position);
        for comp in f.comps.iter_mut() {
            for v in comp.iter_mut() {
                *v = Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            }
        }
        f
    }

    #[test]
    fn constant_field_is_a_delta_at_zero_momentum() {
        let g = GridSpec::new(8, 6.0).unwrap();
        let c = Complex64::new(0.7, -0.2);
        let f = ScalarField::from_fn(g, |_| [c]).into_momentum();
        let expected = c * 6.0f64.powi(3) / (2.0 * PI).powf(1.5);
        assert!((f.component(0)[0] - expected).norm() < 1e-12);
        for i in 1..g.len() {
            assert!(f.component(0)[i].norm() < 1e-12);
        }
    }

    #[test]
    fn plane_wave_is_a_delta_at_its_momentum() {
        let g = GridSpec::new(8, 6.0).unwrap();
        let target = g.index(1, 7, 2);
        let k = g.momentum(target);
        let f = ScalarField::from_fn(g, |x| {
            [Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])]
        })
        .into_momentum();
        let peak = f.component(0)[target];
        assert!((peak.norm() - 6.0f64.powi(3) / (2.0 * PI).powf(1.5)).abs() < 1e-10);
        for i in (0..g.len()).filter(|&i| i != target) {
            assert!(f.component(0)[i].norm() < 1e-10);
        }
    }

    #[test]
    fn round_trip_is_identity() {
        let g = GridSpec::new(12, 9.0).unwrap();
        let f: SpinorField = random_field(g, 3);
        let back = f.transform(Direction::Forward).unwrap().transform(Direction::Inverse).unwrap();
        let mut diff = back.clone();
        diff.add_scaled(-1.0, &f).unwrap();
        assert!(diff.norm() <= 1e-12 * f.norm());
    }

    #[test]
    fn transform_rejects_wrong_source() {
        let g = GridSpec::new(8, 4.0).unwrap();
        let f = ScalarField::zeros(g, Representation::Momentum);
        assert!(matches!(
            f.transform(Direction::Forward),
            Err(Error::RepresentationMismatch { .. })
        ));
    }

    #[test]
    fn parseval_holds() {
        let g = GridSpec::new(10, 7.0).unwrap();
        let f: SpinorField = random_field(g, 1);
        let h: SpinorField = random_field(g, 2);
        let pos = l2_inner(&f, &h).unwrap();
        let mom = l2_inner(&f.to_momentum(), &h.to_momentum()).unwrap();
        assert!((pos - mom).norm() <= 1e-12 * pos.norm().max(1.0));
        assert!(l2_inner(&f, &f).unwrap().im.abs() < 1e-12);
    }

    #[test]
    fn orthogonal_plane_waves() {
        let g = GridSpec::new(8, 5.0).unwrap();
        let wave = |i: usize| {
            let k = g.momentum(i);
            ScalarField::from_fn(g, move |x| {
                [Complex64::from_polar(1.0, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])]
            })
        };
        let a = wave(g.index(1, 0, 0));
        let b = wave(g.index(0, 3, 1));
        assert!(l2_inner(&a, &b).unwrap().norm() < 1e-12);
    }

    #[test]
    fn mixed_inputs_are_rejected() {
        let g1 = GridSpec::new(8, 5.0).unwrap();
        let g2 = GridSpec::new(8, 6.0).unwrap();
        let a = ScalarField::zeros(g1, Representation::Position);
        let b = ScalarField::zeros(g2, Representation::Position);
        assert!(matches!(l2_inner(&a, &b), Err(Error::GridMismatch { .. })));
        let c = ScalarField::zeros(g1, Representation::Momentum);
        assert!(matches!(l2_inner(&a, &c), Err(Error::RepresentationMismatch { .. })));
    }

    #[test]
    fn sobolev_weights() {
        let g = GridSpec::new(8, 2.0 * PI).unwrap();
        // Constant normalized field: every norm equals the L² norm.
        let c = 1.0 / (2.0 * PI).powf(1.5);
        let f = ScalarField::from_fn(g, |_| [Complex64::new(c, 0.0)]);
        for s in [-0.5, 0.5, 1.0] {
            assert!((sobolev_norm_sq(&f, s).unwrap() - 1.0).abs() < 1e-12);
        }
        // |p| = √3 at k = (1,1,1) on l = 2π, so λ = 2.
        let k = g.momentum(g.index(1, 1, 1));
        let w = ScalarField::from_fn(g, |x| {
            [Complex64::from_polar(c, k[0] * x[0] + k[1] * x[1] + k[2] * x[2])]
        });
        assert!((sobolev_norm_sq(&w, 0.5).unwrap() - 2.0 * w.norm_sq()).abs() < 1e-12);
        assert!(matches!(sobolev_inner(&f, &f, 0.25), Err(Error::UnsupportedSobolevOrder(_))));
    }
}
