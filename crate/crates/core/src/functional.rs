//! The energy family `I^(m)`, its derivatives, the multiplier `ω` and the
//! eigenvalue residual.
//!
//! `I^(m)(ψ) = ‖ψ₊‖²_{H^{1/2}} - ‖ψ₋‖²_{H^{1/2}} - m κ Q(ψ)` where `κ = e²/2`,
//! `Q = B(ρ,ρ) - Σ_k B(J_k,J_k)` for Maxwell–Dirac and `κ = e²`, `Q = B(ρ,ρ)`
//! for Coulomb–Dirac. Gradients are L² gradients: `dI[h] = 2 Re⟨g|h⟩`.

use std::sync::Arc;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::coulomb::{InteractionKernel, KernelVariant, SelfFields, dot, potentials_of};
use crate::dirac::{DiracSpectralData, ModelKind, sigma_dot};
use crate::error::{Error, Result};
use crate::spectral::{GridSpec, Representation, SpinorField, l2_inner, sobolev_norm_sq};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EnergyBreakdown {
    pub kinetic_plus: f64,
    pub kinetic_minus: f64,
    pub interaction: f64,
    pub total: f64,
    pub m: f64,
    pub model: ModelKind,
}

impl EnergyBreakdown {
    /// `‖ψ₊‖²_{H^{1/2}} - ‖ψ₋‖²_{H^{1/2}}`.
    pub fn kinetic(&self) -> f64 {
        self.kinetic_plus - self.kinetic_minus
    }

    /// Rough size of the rounding error in `total`.
    pub(crate) fn noise_floor(&self) -> f64 {
        64.0 * f64::EPSILON * (self.kinetic_plus + self.kinetic_minus + self.total.abs())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MultiplierEstimate {
    pub omega: f64,
    /// Set when the input was not unit-norm and was rescaled first.
    pub renormalized: bool,
}

/// The functional for one model, mass parameter and coupling on a grid.
#[derive(Debug, Clone)]
pub struct Functional {
    model: ModelKind,
    m: f64,
    e2: f64,
    dirac: Arc<DiracSpectralData>,
    kernel: Arc<InteractionKernel>,
}

pub(crate) struct Evaluation {
    pub breakdown: EnergyBreakdown,
    /// Momentum-space gradient, when requested.
    pub gradient: Option<SpinorField>,
}

pub(crate) fn check_mass(m: f64) -> Result<()> {
    if !(m > 0.0 && m <= 1.0) {
        return Err(Error::InvalidMassParameter(m));
    }
    Ok(())
}

impl Functional {
    pub fn new(grid: GridSpec, model: ModelKind, m: f64, e2: f64, kernel: KernelVariant) -> Result<Self> {
        Self::with_parts(
            Arc::new(DiracSpectralData::new(grid)),
            Arc::new(InteractionKernel::new(grid, kernel)),
            model,
            m,
            e2,
        )
    }

    pub fn with_parts(
        dirac: Arc<DiracSpectralData>,
        kernel: Arc<InteractionKernel>,
        model: ModelKind,
        m: f64,
        e2: f64,
    ) -> Result<Self> {
        check_mass(m)?;
        if !(e2 >= 0.0 && e2.is_finite()) {
            return Err(Error::InvalidArgument(format!("coupling e2 must be >= 0, got {e2}")));
        }
        dirac.grid().check_same(kernel.grid())?;
        Ok(Self {
            model,
            m,
            e2,
            dirac,
            kernel,
        })
    }

    pub fn with_mass(&self, m: f64) -> Result<Self> {
        check_mass(m)?;
        Ok(Self { m, ..self.clone() })
    }

    #[inline]
    pub fn model(&self) -> ModelKind {
        self.model
    }

    #[inline]
    pub fn m(&self) -> f64 {
        self.m
    }

    #[inline]
    pub fn e2(&self) -> f64 {
        self.e2
    }

    #[inline]
    pub fn grid(&self) -> &GridSpec {
        self.dirac.grid()
    }

    #[inline]
    pub fn dirac(&self) -> &Arc<DiracSpectralData> {
        &self.dirac
    }

    #[inline]
    pub fn kernel(&self) -> &Arc<InteractionKernel> {
        &self.kernel
    }

    /// Model prefactor `κ` (`e²/2` or `e²`), without `m`.
    #[inline]
    pub fn kappa(&self) -> f64 {
        self.model.coupling_factor() * self.e2
    }

    /// `m κ`, the full prefactor of the interaction.
    #[inline]
    pub fn coupling(&self) -> f64 {
        self.m * self.kappa()
    }

    pub(crate) fn evaluate_momentum(&self, psi_hat: &SpinorField, want_gradient: bool) -> Evaluation {
        debug_assert_eq!(psi_hat.repr(), Representation::Momentum);
        let (kp, km) = self.dirac.kinetic_split_momentum(psi_hat, self.model);
        let coupling = self.coupling();
        let with_current = self.model.includes_current();
        let (interaction, gradient) = if coupling == 0.0 && !want_gradient {
            (self.interaction_of(&psi_hat.to_position()), None)
        } else {
            let psi = psi_hat.to_position();
            let fields = SelfFields::new(&psi, &self.kernel, with_current);
            let q = fields.interaction();
            let gradient = want_gradient.then(|| {
                let mut nl = self.nonlinear_term(&psi, &fields).into_momentum();
                let s = self.model.operator_sign();
                let factor = -2.0 * coupling;
                for i in 0..self.grid().len() {
                    let hv = self.dirac.symbol_h(i, psi_hat.at(i));
                    let n = nl.at(i);
                    nl.set(i, std::array::from_fn(|c| s * hv[c] + factor * n[c]));
                }
                nl
            });
            (q, gradient)
        };
        let breakdown = EnergyBreakdown {
            kinetic_plus: kp,
            kinetic_minus: km,
            interaction,
            total: kp - km - coupling * interaction,
            m: self.m,
            model: self.model,
        };
        Evaluation { breakdown, gradient }
    }

    fn interaction_of(&self, psi: &SpinorField) -> f64 {
        SelfFields::new(psi, &self.kernel, self.model.includes_current()).interaction()
    }

    /// `V_ρ ψ - Σ_k V_{J_k} α_k ψ` in position space.
    fn nonlinear_term(&self, psi: &SpinorField, fields: &SelfFields) -> SpinorField {
        let mut out = SpinorField::zeros(*psi.grid(), Representation::Position);
        for i in 0..psi.grid().len() {
            let v = psi.at(i);
            let vr = fields.v_rho[i];
            let mut r = v.map(|x| vr * x);
            if let Some((_, vj)) = &fields.current {
                let q = [vj[0][i], vj[1][i], vj[2][i]];
                let (a0, a1) = sigma_dot(q, v[2], v[3]);
                let (b0, b1) = sigma_dot(q, v[0], v[1]);
                r[0] -= a0;
                r[1] -= a1;
                r[2] -= b0;
                r[3] -= b1;
            }
            out.set(i, r);
        }
        out
    }

    fn check_grid(&self, psi: &SpinorField) -> Result<()> {
        self.grid().check_same(psi.grid())
    }

    pub fn energy(&self, psi: &SpinorField) -> Result<EnergyBreakdown> {
        self.check_grid(psi)?;
        Ok(self.evaluate_momentum(&psi.to_momentum(), false).breakdown)
    }

    /// L² gradient in the caller's representation.
    pub fn gradient(&self, psi: &SpinorField) -> Result<SpinorField> {
        Ok(self.energy_and_gradient(psi)?.1)
    }

    pub fn energy_and_gradient(&self, psi: &SpinorField) -> Result<(EnergyBreakdown, SpinorField)> {
        self.check_grid(psi)?;
        let ev = self.evaluate_momentum(&psi.to_momentum(), true);
        let g = ev.gradient.expect("gradient requested").into_repr(psi.repr());
        Ok((ev.breakdown, g))
    }

    /// `ω = Re⟨g|ψ⟩ = ½ dI(ψ)[ψ]` at `ψ/‖ψ‖`.
    pub fn omega_estimate(&self, psi: &SpinorField) -> Result<MultiplierEstimate> {
        self.check_grid(psi)?;
        let norm = psi.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::DegenerateInput("ω of the zero field".into()));
        }
        let renormalized = (norm - 1.0).abs() > 1e-10;
        let psi_hat = psi.to_momentum().scaled(1.0 / norm);
        let ev = self.evaluate_momentum(&psi_hat, true);
        let g = ev.gradient.expect("gradient requested");
        Ok(MultiplierEstimate {
            omega: l2_inner(&g, &psi_hat)?.re,
            renormalized,
        })
    }

    /// Second derivative `d²I^(m)(ψ)[h; k]`.
    pub fn hessian_form(&self, psi: &SpinorField, h: &SpinorField, k: &SpinorField) -> Result<f64> {
        self.check_grid(psi)?;
        self.check_grid(h)?;
        self.check_grid(k)?;
        let op_k = self.dirac.apply_operator(&k.to_momentum(), self.model)?;
        let kinetic = 2.0 * l2_inner(&h.to_momentum(), &op_k)?.re;
        let coupling = self.coupling();
        if coupling == 0.0 {
            return Ok(kinetic);
        }
        let grid = *psi.grid();
        let (psi, h, k) = (psi.to_position(), h.to_position(), k.to_position());
        let w = grid.position_weight();
        let rho = pointwise(&psi, &psi, None);
        let ph = pointwise(&psi, &h, None);
        let pk = pointwise(&psi, &k, None);
        let hk = pointwise(&h, &k, None);
        let v = potentials_of(grid, &[&rho, &ph], &self.kernel);
        let mut d2q = 4.0 * dot(&v[0], &hk) + 8.0 * dot(&v[1], &pk);
        if self.model.includes_current() {
            for j in 0..3 {
                let cur = pointwise(&psi, &psi, Some(j));
                let ph = pointwise(&psi, &h, Some(j));
                let pk = pointwise(&psi, &k, Some(j));
                let hk = pointwise(&h, &k, Some(j));
                let v = potentials_of(grid, &[&cur, &ph], &self.kernel);
                d2q -= 4.0 * dot(&v[0], &hk) + 8.0 * dot(&v[1], &pk);
            }
        }
        Ok(kinetic - coupling * d2q * w)
    }

    /// `‖g(ψ) - ωψ‖_{H^{-1/2}}`.
    pub fn residual(&self, psi: &SpinorField, omega: f64) -> Result<f64> {
        let (_, g) = self.energy_and_gradient(psi)?;
        let r = g.plus_scaled(-omega, psi)?;
        Ok(sobolev_norm_sq(&r, -0.5)?.max(0.0).sqrt())
    }
}

/// Pointwise `Re(a, b)` or, with `Some(j)`, `Re(a, α_j b)` (a factor 2 is
/// left to the caller's bookkeeping: `ρ = Re(ψ,ψ)`, `J_j = Re(ψ, α_j ψ)`).
fn pointwise(a: &SpinorField, b: &SpinorField, alpha: Option<usize>) -> Vec<f64> {
    (0..a.grid().len())
        .map(|i| {
            let x = a.at(i);
            let y = b.at(i);
            let y = match alpha {
                None => y,
                Some(j) => {
                    let mut q = [0.0; 3];
                    q[j] = 1.0;
                    let (a0, a1) = sigma_dot(q, y[2], y[3]);
                    let (b0, b1) = sigma_dot(q, y[0], y[1]);
                    [a0, a1, b0, b1]
                }
            };
            x.iter()
                .zip(y.iter())
                .map(|(u, v): (&Complex64, &Complex64)| (u.conj() * v).re)
                .sum()
        })
        .collect()
}
