//! Free Dirac operator, spectral projectors and the Foldy–Wouthuysen
//! transform, all realized as per-momentum 4×4 multiplications.
//!
//! Conventions: `α_k = [[0, σ_k], [σ_k, 0]]`, `β = diag(1, 1, -1, -1)`,
//! `H = -iα·∇ + β` with symbol `Ĥ(p) = α·p + β`, and `D = -H`.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::spectral::{Direction, GridSpec, Representation, SpinorField, TwoSpinorField};

type C = Complex64;

const ZERO: C = C::new(0.0, 0.0);

/// Which of the two self-interacting Dirac models is being solved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum ModelKind {
    /// Operator `D = iα·∇ - β`, density and current interaction with prefactor `e²/2`.
    #[serde(rename = "md")]
    MaxwellDirac,
    /// Operator `H = -iα·∇ + β`, density-only interaction with prefactor `e²`.
    #[serde(rename = "cd")]
    CoulombDirac,
}

impl ModelKind {
    /// Interaction prefactor divided by `e²`.
    #[inline]
    pub fn coupling_factor(self) -> f64 {
        match self {
            ModelKind::MaxwellDirac => 0.5,
            ModelKind::CoulombDirac => 1.0,
        }
    }

    /// Whether the current–current term enters the interaction.
    #[inline]
    pub fn includes_current(self) -> bool {
        matches!(self, ModelKind::MaxwellDirac)
    }

    /// Sign `s` such that the model operator is `s·H`.
    #[inline]
    pub fn operator_sign(self) -> f64 {
        match self {
            ModelKind::MaxwellDirac => -1.0,
            ModelKind::CoulombDirac => 1.0,
        }
    }

    pub fn short_name(self) -> &'static str {
        match self {
            ModelKind::MaxwellDirac => "md",
            ModelKind::CoulombDirac => "cd",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    #[inline]
    fn value(self) -> f64 {
        match self {
            Sign::Plus => 1.0,
            Sign::Minus => -1.0,
        }
    }
}

/// Pauli matrices with `σ₃ = diag(1, -1)`.
pub fn pauli(k: usize) -> [[C; 2]; 2] {
    let one = C::new(1.0, 0.0);
    let i = C::new(0.0, 1.0);
    match k {
        0 => [[ZERO, one], [one, ZERO]],
        1 => [[ZERO, -i], [i, ZERO]],
        2 => [[one, ZERO], [ZERO, -one]],
        _ => panic!("pauli index {k} out of range"),
    }
}

pub fn alpha(k: usize) -> [[C; 4]; 4] {
    let s = pauli(k);
    let mut a = [[ZERO; 4]; 4];
    for r in 0..2 {
        for c in 0..2 {
            a[r][c + 2] = s[r][c];
            a[r + 2][c] = s[r][c];
        }
    }
    a
}

pub fn beta() -> [[C; 4]; 4] {
    let mut b = [[ZERO; 4]; 4];
    for (d, row) in b.iter_mut().enumerate() {
        row[d] = C::new(if d < 2 { 1.0 } else { -1.0 }, 0.0);
    }
    b
}

pub fn mat_vec(m: &[[C; 4]; 4], v: &[C; 4]) -> [C; 4] {
    std::array::from_fn(|r| (0..4).map(|c| m[r][c] * v[c]).sum())
}

/// `(σ·q) v` for a real 3-vector `q`.
#[inline]
pub(crate) fn sigma_dot(q: [f64; 3], v0: C, v1: C) -> (C, C) {
    let minus = C::new(q[0], -q[1]);
    let plus = C::new(q[0], q[1]);
    (q[2] * v0 + minus * v1, plus * v0 - q[2] * v1)
}

/// Tabulated symbol data of the free Dirac operator on a grid.
#[derive(Debug, Clone)]
pub struct DiracSpectralData {
    grid: GridSpec,
    lambda: Vec<f64>,
    u_plus: Vec<f64>,
    u_minus: Vec<f64>,
    momentum: Vec<[f64; 3]>,
    unit_p: Vec<[f64; 3]>,
}

impl DiracSpectralData {
    pub fn new(grid: GridSpec) -> Self {
        let len = grid.len();
        let mut lambda = Vec::with_capacity(len);
        let mut u_plus = Vec::with_capacity(len);
        let mut u_minus = Vec::with_capacity(len);
        let mut momentum = Vec::with_capacity(len);
        let mut unit_p = Vec::with_capacity(len);
        for i in 0..len {
            let p = grid.momentum(i);
            let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
            let lam = (p2 + 1.0).sqrt();
            let norm = p2.sqrt();
            lambda.push(lam);
            u_plus.push((0.5 * (1.0 + 1.0 / lam)).sqrt());
            u_minus.push((0.5 * (1.0 - 1.0 / lam)).sqrt());
            momentum.push(p);
            unit_p.push(if norm > 0.0 {
                [p[0] / norm, p[1] / norm, p[2] / norm]
            } else {
                [0.0; 3]
            });
        }
        Self {
            grid,
            lambda,
            u_plus,
            u_minus,
            momentum,
            unit_p,
        }
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn lambda(&self) -> &[f64] {
        &self.lambda
    }

    #[inline]
    pub fn u_plus(&self) -> &[f64] {
        &self.u_plus
    }

    #[inline]
    pub fn u_minus(&self) -> &[f64] {
        &self.u_minus
    }

    #[inline]
    pub fn unit_p(&self) -> &[[f64; 3]] {
        &self.unit_p
    }

    /// `Ĥ(p) v` at momentum index `i`.
    #[inline]
    pub fn symbol_h(&self, i: usize, v: [C; 4]) -> [C; 4] {
        let p = self.momentum[i];
        let (a0, a1) = sigma_dot(p, v[2], v[3]);
        let (b0, b1) = sigma_dot(p, v[0], v[1]);
        [v[0] + a0, v[1] + a1, b0 - v[2], b1 - v[3]]
    }

    /// `Λ_±(H) v = ½(v ± Ĥ(p)v/λ(p))` at momentum index `i`.
    #[inline]
    pub fn projector_h(&self, i: usize, v: [C; 4], sign: Sign) -> [C; 4] {
        let hv = self.symbol_h(i, v);
        let s = 0.5 * sign.value() / self.lambda[i];
        std::array::from_fn(|c| 0.5 * v[c] + s * hv[c])
    }

    /// Projector of the model operator: `Λ_±(D) = Λ_∓(H)`.
    #[inline]
    pub fn projector(&self, i: usize, v: [C; 4], sign: Sign, kind: ModelKind) -> [C; 4] {
        let sign = match (kind, sign) {
            (ModelKind::CoulombDirac, s) => s,
            (ModelKind::MaxwellDirac, Sign::Plus) => Sign::Minus,
            (ModelKind::MaxwellDirac, Sign::Minus) => Sign::Plus,
        };
        self.projector_h(i, v, sign)
    }

    /// `U(p) v = u₊ v + u₋ β(α·p̂) v`.
    #[inline]
    pub fn apply_u(&self, i: usize, v: [C; 4]) -> [C; 4] {
        self.apply_u_signed(i, v, 1.0)
    }

    /// `U(p)⁻¹ v = u₊ v - u₋ β(α·p̂) v`.
    #[inline]
    pub fn apply_u_inverse(&self, i: usize, v: [C; 4]) -> [C; 4] {
        self.apply_u_signed(i, v, -1.0)
    }

    #[inline]
    fn apply_u_signed(&self, i: usize, v: [C; 4], s: f64) -> [C; 4] {
        let q = self.unit_p[i];
        let up = self.u_plus[i];
        let um = s * self.u_minus[i];
        let (a0, a1) = sigma_dot(q, v[2], v[3]);
        let (b0, b1) = sigma_dot(q, v[0], v[1]);
        [
            up * v[0] + um * a0,
            up * v[1] + um * a1,
            up * v[2] - um * b0,
            up * v[3] - um * b1,
        ]
    }

    /// Dense `U(p)` at momentum index `i`, for checks.
    pub fn u_matrix(&self, i: usize) -> [[C; 4]; 4] {
        self.dense(|v| self.apply_u(i, v))
    }

    pub fn u_inverse_matrix(&self, i: usize) -> [[C; 4]; 4] {
        self.dense(|v| self.apply_u_inverse(i, v))
    }

    fn dense(&self, f: impl Fn([C; 4]) -> [C; 4]) -> [[C; 4]; 4] {
        let mut m = [[ZERO; 4]; 4];
        for c in 0..4 {
            let mut e = [ZERO; 4];
            e[c] = C::new(1.0, 0.0);
            let col = f(e);
            for r in 0..4 {
                m[r][c] = col[r];
            }
        }
        m
    }

    fn check_grid(&self, psi: &SpinorField) -> Result<()> {
        self.grid.check_same(psi.grid())
    }

    /// Applies `f(i, ψ̂(p_i))` pointwise in momentum space and returns the
    /// result in the caller's representation.
    pub(crate) fn map_momentum(
        &self,
        psi: &SpinorField,
        f: impl Fn(usize, [C; 4]) -> [C; 4],
    ) -> Result<SpinorField> {
        self.check_grid(psi)?;
        let repr = psi.repr();
        let mut m = psi.to_momentum();
        for i in 0..self.grid.len() {
            let v = f(i, m.at(i));
            m.set(i, v);
        }
        Ok(m.into_repr(repr))
    }

    /// Projector applied to a momentum-space field.
    pub(crate) fn project_momentum(&self, m: &SpinorField, sign: Sign, kind: ModelKind) -> SpinorField {
        debug_assert_eq!(m.repr(), Representation::Momentum);
        let mut out = m.clone();
        for i in 0..self.grid.len() {
            out.set(i, self.projector(i, m.at(i), sign, kind));
        }
        out
    }

    /// Multiplies a momentum-space field by `f(λ(p))`.
    pub(crate) fn scale_by_lambda(&self, m: &SpinorField, f: impl Fn(f64) -> f64) -> SpinorField {
        debug_assert_eq!(m.repr(), Representation::Momentum);
        let mut out = m.clone();
        for comp in out.components_mut().iter_mut() {
            for (v, lam) in comp.iter_mut().zip(&self.lambda) {
                *v *= f(*lam);
            }
        }
        out
    }

    /// `‖f‖²_{H^{1/2}}` of a momentum-space field.
    pub(crate) fn half_norm_sq_momentum(&self, m: &SpinorField) -> f64 {
        debug_assert_eq!(m.repr(), Representation::Momentum);
        let mut s = 0.0;
        for comp in m.components() {
            for (v, lam) in comp.iter().zip(&self.lambda) {
                s += lam * v.norm_sqr();
            }
        }
        s * self.grid.momentum_weight()
    }

    /// `Hψ` (Coulomb–Dirac) or `Dψ = -Hψ` (Maxwell–Dirac).
    pub fn apply_operator(&self, psi: &SpinorField, kind: ModelKind) -> Result<SpinorField> {
        let s = kind.operator_sign();
        self.map_momentum(psi, |i, v| self.symbol_h(i, v).map(|x| s * x))
    }

    pub fn project(&self, psi: &SpinorField, sign: Sign, kind: ModelKind) -> Result<SpinorField> {
        self.map_momentum(psi, |i, v| self.projector(i, v, sign, kind))
    }

    /// `U_FW = F⁻¹ U(p) F` (forward) or its inverse.
    pub fn fw_transform(&self, psi: &SpinorField, direction: Direction) -> Result<SpinorField> {
        match direction {
            Direction::Forward => self.map_momentum(psi, |i, v| self.apply_u(i, v)),
            Direction::Inverse => self.map_momentum(psi, |i, v| self.apply_u_inverse(i, v)),
        }
    }

    /// `(‖Λ₊ψ‖²_{H^{1/2}}, ‖Λ₋ψ‖²_{H^{1/2}})` for the model's projectors.
    pub fn kinetic_split(&self, psi: &SpinorField, kind: ModelKind) -> Result<(f64, f64)> {
        self.check_grid(psi)?;
        let m = psi.to_momentum();
        Ok(self.kinetic_split_momentum(&m, kind))
    }

    pub(crate) fn kinetic_split_momentum(&self, m: &SpinorField, kind: ModelKind) -> (f64, f64) {
        debug_assert_eq!(m.repr(), Representation::Momentum);
        let mut plus = 0.0;
        let mut minus = 0.0;
        for i in 0..self.grid.len() {
            let v = m.at(i);
            let pv = self.projector(i, v, Sign::Plus, kind);
            let np: f64 = pv.iter().map(|x| x.norm_sqr()).sum();
            let nt: f64 = v.iter().map(|x| x.norm_sqr()).sum();
            // Orthogonal split: |Λ₋v|² = |v|² - |Λ₊v|².
            plus += self.lambda[i] * np;
            minus += self.lambda[i] * (nt - np).max(0.0);
        }
        let w = self.grid.momentum_weight();
        (plus * w, minus * w)
    }

    /// Lifts a two-spinor into the model's positive spectral subspace:
    /// `U_FW⁻¹(0, v)` for Maxwell–Dirac, `U_FW⁻¹(v, 0)` for Coulomb–Dirac.
    /// `v` is renormalized to unit L² norm first.
    pub fn embed_two_spinor(&self, v: &TwoSpinorField, kind: ModelKind) -> Result<SpinorField> {
        self.grid.check_same(v.grid())?;
        let norm = v.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateInput(
                "two-spinor profile has zero norm".into(),
            ));
        }
        let four = v.scaled(1.0 / norm).to_four(kind == ModelKind::CoulombDirac);
        self.fw_transform(&four, Direction::Inverse)
    }
}
