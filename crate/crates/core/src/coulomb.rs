//! Charge densities, Dirac currents and Coulomb convolutions on the torus.

use std::f64::consts::PI;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::dirac::ModelKind;
use crate::error::{Error, Result};
use crate::spectral::{GridSpec, Representation, ScalarField, SpinorField, VectorField3};

/// Kato constant in `∫|f|²/|x| ≤ γ_K ‖(-Δ)^{1/4} f‖²`.
pub const GAMMA_K: f64 = PI / 2.0;
/// Hardy constant in `∫|f|²/|x|² ≤ 4 ‖∇f‖²`.
pub const HARDY_C: f64 = 4.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelVariant {
    /// `4π/|p|²` with the zero mode dropped (neutralizing background).
    Plain,
    /// `4π(1 - cos(R|p|))/|p|²`, `R = l/2`: exact free-space convolution for
    /// densities supported in a ball of radius `l/4`.
    Truncated,
}

impl KernelVariant {
    pub fn name(self) -> &'static str {
        match self {
            KernelVariant::Plain => "plain",
            KernelVariant::Truncated => "truncated",
        }
    }
}

/// Tabulated Fourier symbol of `1/|x|` (times `(2π)^{3/2}`) on a grid.
#[derive(Debug, Clone)]
pub struct InteractionKernel {
    variant: KernelVariant,
    grid: GridSpec,
    table: Vec<f64>,
}

impl InteractionKernel {
    pub fn new(grid: GridSpec, variant: KernelVariant) -> Self {
        let r = grid.l() / 2.0;
        let table = (0..grid.len())
            .map(|i| {
                let p = grid.momentum(i);
                let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                match (variant, p2 == 0.0) {
                    (KernelVariant::Plain, true) => 0.0,
                    (KernelVariant::Plain, false) => 4.0 * PI / p2,
                    (KernelVariant::Truncated, true) => 2.0 * PI * r * r,
                    (KernelVariant::Truncated, false) => {
                        // 1 - cos(x) = 2 sin²(x/2), without cancellation.
                        let s = (0.5 * r * p2.sqrt()).sin();
                        8.0 * PI * s * s / p2
                    }
                }
            })
            .collect();
        Self {
            variant,
            grid,
            table,
        }
    }

    #[inline]
    pub fn variant(&self) -> KernelVariant {
        self.variant
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        &self.grid
    }

    #[inline]
    pub fn table(&self) -> &[f64] {
        &self.table
    }
}

/// Fixed constants of the functional inequalities plus the coupling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AnalyticConstants {
    pub gamma_k: f64,
    pub hardy_c: f64,
    pub e2: f64,
}

impl AnalyticConstants {
    pub fn new(e2: f64) -> Self {
        Self {
            gamma_k: GAMMA_K,
            hardy_c: HARDY_C,
            e2,
        }
    }

    /// `e² γ_K < 1/9`, the strictest smallness condition the bounds need.
    pub fn is_small_coupling(&self) -> bool {
        self.e2 * self.gamma_k < 1.0 / 9.0
    }
}

/// Electron-convention charge `e = -√(e²)`.
pub fn electron_charge(e2: f64) -> f64 {
    -e2.sqrt()
}

fn require_position(psi: &SpinorField) -> Result<()> {
    if psi.repr() != Representation::Position {
        return Err(Error::RepresentationMismatch {
            expected: Representation::Position,
            found: psi.repr(),
        });
    }
    Ok(())
}

pub(crate) fn density_values(psi: &SpinorField) -> Vec<f64> {
    let c = psi.components();
    (0..psi.grid().len())
        .map(|i| c.iter().map(|comp| comp[i].norm_sqr()).sum())
        .collect()
}

/// `J_k = (ψ, α_k ψ) = 2 Re(ψ_up† σ_k ψ_low)`.
pub(crate) fn current_values(psi: &SpinorField) -> [Vec<f64>; 3] {
    let c = psi.components();
    let len = psi.grid().len();
    let mut j: [Vec<f64>; 3] = std::array::from_fn(|_| Vec::with_capacity(len));
    for i in 0..len {
        let (u0, u1, l0, l1) = (c[0][i].conj(), c[1][i].conj(), c[2][i], c[3][i]);
        j[0].push(2.0 * (u0 * l1 + u1 * l0).re);
        j[1].push(2.0 * (u0 * l1 * Complex64::new(0.0, -1.0) + u1 * l0 * Complex64::new(0.0, 1.0)).re);
        j[2].push(2.0 * (u0 * l0 - u1 * l1).re);
    }
    j
}

pub fn density(psi: &SpinorField) -> Result<ScalarField> {
    require_position(psi)?;
    ScalarField::from_real(*psi.grid(), &density_values(psi))
}

pub fn current(psi: &SpinorField) -> Result<VectorField3> {
    require_position(psi)?;
    let [a, b, c] = current_values(psi);
    let re = |v: Vec<f64>| v.into_iter().map(|x| Complex64::new(x, 0.0)).collect();
    VectorField3::from_components(*psi.grid(), Representation::Position, [re(a), re(b), re(c)])
}

/// Potentials `F⁻¹[K f̂]` of real position-space fields, two per complex
/// transform pair (the kernel is real and even, so real and imaginary
/// parts do not mix).
pub(crate) fn potentials_of(
    grid: GridSpec,
    fields: &[&[f64]],
    kernel: &InteractionKernel,
) -> Vec<Vec<f64>> {
    let mut out = Vec::with_capacity(fields.len());
    for pair in fields.chunks(2) {
        let packed: Vec<Complex64> = match pair {
            [a, b] => a.iter().zip(b.iter()).map(|(&x, &y)| Complex64::new(x, y)).collect(),
            [a] => a.iter().map(|&x| Complex64::new(x, 0.0)).collect(),
            _ => unreachable!(),
        };
        let f = ScalarField::from_components(grid, Representation::Position, [packed])
            .expect("length matches grid");
        let mut m = f.into_momentum();
        for (v, k) in m.components_mut()[0].iter_mut().zip(kernel.table()) {
            *v *= *k;
        }
        let [v] = m.into_position().into_components();
        out.push(v.iter().map(|z| z.re).collect());
        if pair.len() == 2 {
            out.push(v.iter().map(|z| z.im).collect());
        }
    }
    out
}

fn real_values(f: &ScalarField) -> Result<Vec<f64>> {
    if f.repr() != Representation::Position {
        return Err(Error::RepresentationMismatch {
            expected: Representation::Position,
            found: f.repr(),
        });
    }
    Ok(f.real_values())
}

/// `F⁻¹[K(p) f̂(p)]`, the Coulomb potential of a real density (position
/// representation in and out; the imaginary part of `f` is ignored).
pub fn coulomb_potential(f: &ScalarField, kernel: &InteractionKernel) -> Result<ScalarField> {
    kernel.grid().check_same(f.grid())?;
    let values = real_values(f)?;
    let v = potentials_of(*f.grid(), &[&values], kernel);
    ScalarField::from_real(*f.grid(), &v[0])
}

/// `B(f, g) = Σ_p K(p) f̂(p) conj(ĝ(p)) w_p` (real part) for real fields.
pub fn coulomb_bilinear(f: &ScalarField, g: &ScalarField, kernel: &InteractionKernel) -> Result<f64> {
    kernel.grid().check_same(f.grid())?;
    f.check_compatible(g)?;
    let fm = f.to_momentum();
    let gm = g.to_momentum();
    let s: f64 = fm.component(0)
        .iter()
        .zip(gm.component(0))
        .zip(kernel.table())
        .map(|((a, b), k)| k * (a * b.conj()).re)
        .sum();
    Ok(s * f.grid().momentum_weight())
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Density, current and their potentials for one spinor, reused by the
/// energy, gradient and Hessian.
pub(crate) struct SelfFields {
    pub rho: Vec<f64>,
    pub v_rho: Vec<f64>,
    pub current: Option<([Vec<f64>; 3], [Vec<f64>; 3])>,
    weight: f64,
}

impl SelfFields {
    pub fn new(psi: &SpinorField, kernel: &InteractionKernel, with_current: bool) -> Self {
        let grid = *psi.grid();
        let rho = density_values(psi);
        if with_current {
            let j = current_values(psi);
            let mut v = potentials_of(grid, &[&rho, &j[0], &j[1], &j[2]], kernel).into_iter();
            let v_rho = v.next().unwrap();
            let vj = [v.next().unwrap(), v.next().unwrap(), v.next().unwrap()];
            Self {
                rho,
                v_rho,
                current: Some((j, vj)),
                weight: grid.position_weight(),
            }
        } else {
            let v_rho = potentials_of(grid, &[&rho], kernel).pop().unwrap();
            Self {
                rho,
                v_rho,
                current: None,
                weight: grid.position_weight(),
            }
        }
    }

    pub fn density_energy(&self) -> f64 {
        dot(&self.rho, &self.v_rho) * self.weight
    }

    pub fn current_energy(&self) -> f64 {
        match &self.current {
            Some((j, vj)) => (0..3).map(|k| dot(&j[k], &vj[k])).sum::<f64>() * self.weight,
            None => 0.0,
        }
    }

    /// `B(ρ,ρ) - Σ_k B(J_k,J_k)` if currents are present, else `B(ρ,ρ)`.
    pub fn interaction(&self) -> f64 {
        self.density_energy() - self.current_energy()
    }
}

/// `Q_MD = B(ρ,ρ) - Σ_k B(J_k,J_k)` or `Q_CD = B(ρ,ρ)`.
pub fn interaction_energy(psi: &SpinorField, model: ModelKind, kernel: &InteractionKernel) -> Result<f64> {
    require_position(psi)?;
    kernel.grid().check_same(psi.grid())?;
    Ok(SelfFields::new(psi, kernel, model.includes_current()).interaction())
}

/// `A₀ = e·(ρ ∗ 1/|x|)` and `A_k = e·(J_k ∗ 1/|x|)` for a given charge `e`.
pub fn potentials(
    psi: &SpinorField,
    kernel: &InteractionKernel,
    charge: f64,
) -> Result<(ScalarField, VectorField3)> {
    require_position(psi)?;
    kernel.grid().check_same(psi.grid())?;
    let grid = *psi.grid();
    let fields = SelfFields::new(psi, kernel, true);
    let a0: Vec<f64> = fields.v_rho.iter().map(|v| charge * v).collect();
    let (_, vj) = fields.current.expect("current requested");
    let comp = |v: &Vec<f64>| v.iter().map(|x| Complex64::new(charge * x, 0.0)).collect();
    let a = VectorField3::from_components(
        grid,
        Representation::Position,
        [comp(&vj[0]), comp(&vj[1]), comp(&vj[2])],
    )?;
    Ok((ScalarField::from_real(grid, &a0)?, a))
}
