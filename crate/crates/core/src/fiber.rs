//! Maximization of the energy over the fiber `{a(η) w + η : η ∈ X₋}` for
//! a fixed unit direction `w` in the positive spectral subspace, with
//! `a(η) = √(1 - ‖η‖²)`.
//!
//! The objective `F(η) = I^(m)(a(η) w + η)` is concave near its maximizer;
//! ascent uses the fiber gradient `G_F = Λ₋g - a⁻¹ Re⟨g|w⟩ η` with an
//! optional `1/(λ(p) + 1)` preconditioner and Armijo backtracking.

use std::fmt;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::coulomb::GAMMA_K;
use crate::dirac::Sign;
use crate::error::{Error, Result};
use crate::functional::{EnergyBreakdown, Functional};
use crate::spectral::{Representation, SpinorField, l2_inner};
use crate::verify::CheckReport;

/// Upper bound on `‖η‖²` keeping `a(η)` real and away from zero.
pub const ETA_CAP: f64 = 1.0 - 1e-6;

const ARMIJO_C: f64 = 1e-4;
const ARMIJO_SHRINK: f64 = 0.5;
const MIN_STEP: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FiberConfig {
    pub tol_inner: f64,
    pub max_inner: usize,
    /// Relative slack for the certified bounds.
    pub check_slack: f64,
    pub precondition: bool,
}

impl Default for FiberConfig {
    fn default() -> Self {
        Self {
            tol_inner: 1e-9,
            max_inner: 5000,
            check_slack: 1e-8,
            precondition: true,
        }
    }
}

/// A point `ψ = a w + η` of the fiber. All fields are kept in momentum
/// representation.
#[derive(Debug, Clone)]
pub struct FiberPoint {
    pub w: SpinorField,
    pub eta: SpinorField,
    pub a: f64,
    pub psi: SpinorField,
}

impl FiberPoint {
    fn new(w: &SpinorField, eta: SpinorField) -> Self {
        let a = (1.0 - eta.norm_sq()).max(0.0).sqrt();
        let mut psi = w.scaled(a);
        psi.add_scaled(1.0, &eta).expect("same grid and representation");
        Self {
            w: w.clone(),
            eta,
            a,
            psi,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MaximizerResult {
    pub point: FiberPoint,
    pub omega: f64,
    pub breakdown: EnergyBreakdown,
    pub iterations: usize,
    pub converged: bool,
    /// `‖G_F‖_{L²}` at the returned point.
    pub gradient_norm: f64,
    /// Objective after each accepted step, starting with the initial value.
    pub values: Vec<f64>,
    /// Certified bounds at the maximizer, see [`property_report`].
    pub property_report: Vec<CheckReport>,
    /// L² gradient of the energy at `ψ` (momentum representation).
    pub(crate) gradient: SpinorField,
}

impl MaximizerResult {
    /// `λ_W(m)`, the maximal value on the fiber.
    pub fn value(&self) -> f64 {
        self.breakdown.total
    }

    pub fn properties_hold(&self) -> bool {
        self.property_report.iter().all(|r| r.pass)
    }
}

/// Diagnostic error of a failed fiber maximization, carrying the last iterate.
pub struct FiberFailure {
    pub reason: String,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub last: FiberPoint,
}

impl fmt::Display for FiberFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "fiber maximization {} after {} iterations (|G_F| = {:.3e}, |eta|^2 = {:.3e})",
            self.reason,
            self.iterations,
            self.gradient_norm,
            self.last.eta.norm_sq()
        )
    }
}

impl fmt::Debug for FiberFailure {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Display::fmt(self, f)
    }
}

impl std::error::Error for FiberFailure {}

fn fail(reason: impl Into<String>, iterations: usize, gradient_norm: f64, last: FiberPoint) -> Error {
    Error::Fiber(Box::new(FiberFailure {
        reason: reason.into(),
        iterations,
        gradient_norm,
        last,
    }))
}

/// Checks that `w` is a unit vector of `X₊` (to 1e-6) and returns it
/// re-projected and renormalized in momentum representation.
pub(crate) fn normalize_direction(f: &Functional, w: &SpinorField) -> Result<SpinorField> {
    f.grid().check_same(w.grid())?;
    let wm = w.to_momentum();
    let p = f.dirac().project_momentum(&wm, Sign::Plus, f.model());
    let norm = p.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::DegenerateInput("direction has no positive part".into()));
    }
    let drift = wm.plus_scaled(-1.0, &p)?.norm();
    if drift > 1e-6 || (wm.norm() - 1.0).abs() > 1e-6 {
        return Err(Error::InvalidArgument(format!(
            "direction must be a unit vector of the positive subspace (norm {:.3e}, off-subspace {:.3e})",
            wm.norm(),
            drift
        )));
    }
    Ok(p.scaled(1.0 / norm))
}

struct Iterate {
    point: FiberPoint,
    breakdown: EnergyBreakdown,
    gradient: SpinorField,
}

fn evaluate(f: &Functional, w: &SpinorField, eta: SpinorField) -> Iterate {
    let point = FiberPoint::new(w, eta);
    let ev = f.evaluate_momentum(&point.psi, true);
    Iterate {
        point,
        breakdown: ev.breakdown,
        gradient: ev.gradient.expect("gradient requested"),
    }
}

/// `G_F = Λ₋g - a⁻¹ Re⟨g|w⟩ η`.
fn fiber_gradient(f: &Functional, it: &Iterate) -> SpinorField {
    let mut gf = f
        .dirac()
        .project_momentum(&it.gradient, Sign::Minus, f.model());
    let gw = l2_inner(&it.gradient, &it.point.w).expect("same grid").re;
    gf.add_scaled(-gw / it.point.a, &it.point.eta)
        .expect("same grid");
    gf
}

/// Maximizes `I^(m)` over the fiber through `w`, starting from `η = 0` or
/// from `warm_start` (projected onto `X₋`).
pub fn maximize(
    f: &Functional,
    w: &SpinorField,
    cfg: &FiberConfig,
    warm_start: Option<&SpinorField>,
) -> Result<MaximizerResult> {
    let w = normalize_direction(f, w)?;
    let dirac = f.dirac();
    let eta0 = match warm_start {
        Some(eta) => {
            f.grid().check_same(eta.grid())?;
            dirac.project_momentum(&eta.to_momentum(), Sign::Minus, f.model())
        }
        None => SpinorField::zeros(*f.grid(), Representation::Momentum),
    };
    if eta0.norm_sq() > ETA_CAP {
        return Err(Error::InvalidArgument("warm start outside the trust region".into()));
    }
    maximize_from(f, &w, cfg, eta0, cfg.tol_inner)
}

pub(crate) fn maximize_from(
    f: &Functional,
    w: &SpinorField,
    cfg: &FiberConfig,
    eta0: SpinorField,
    tol: f64,
) -> Result<MaximizerResult> {
    let dirac = f.dirac();
    let mut it = evaluate(f, w, eta0);
    let mut values = vec![it.breakdown.total];
    let mut iterations = 0;
    let mut gf = fiber_gradient(f, &it);
    let mut gnorm = gf.norm();
    while gnorm > tol {
        if iterations >= cfg.max_inner {
            return Err(fail("did not converge", iterations, gnorm, it.point));
        }
        let dir = if cfg.precondition {
            dirac.scale_by_lambda(&gf, |lam| 1.0 / (lam + 1.0))
        } else {
            gf.clone()
        };
        let slope = 2.0 * l2_inner(&gf, &dir)?.re;
        let noise = it.breakdown.noise_floor();
        let mut t = 1.0;
        let next = loop {
            let eta = it.point.eta.plus_scaled(t, &dir)?;
            if eta.norm_sq() > ETA_CAP {
                return Err(fail("left the trust region", iterations, gnorm, it.point));
            }
            let trial = evaluate(f, w, eta);
            if trial.breakdown.total >= it.breakdown.total + ARMIJO_C * t * slope - noise {
                break trial;
            }
            t *= ARMIJO_SHRINK;
            if t < MIN_STEP {
                return Err(fail("line search stalled", iterations, gnorm, it.point));
            }
        };
        it = next;
        iterations += 1;
        values.push(it.breakdown.total);
        gf = fiber_gradient(f, &it);
        gnorm = gf.norm();
    }
    let omega = l2_inner(&it.gradient, &it.point.psi)?.re;
    let property_report = property_report(f, &it.point, omega, &it.breakdown, cfg.check_slack);
    Ok(MaximizerResult {
        point: it.point,
        omega,
        breakdown: it.breakdown,
        iterations,
        converged: true,
        gradient_norm: gnorm,
        values,
        property_report,
        gradient: it.gradient,
    })
}

/// Certified bounds of a fiber maximizer:
/// `0 < ω ≤ λ_W`, `‖ψ₋‖² < ‖ψ₊‖²`, `‖ψ₊‖²_{H^{1/2}} - ‖ψ₋‖²_{H^{1/2}} ≥ 1`,
/// `‖ψ₋‖²_{H^{1/2}} ≤ mκγ_K ‖w‖²_{H^{1/2}}` and
/// `(1 - mκγ_K)‖w‖²_{H^{1/2}} ≤ λ_W ≤ ‖w‖²_{H^{1/2}}`.
pub fn property_report(
    f: &Functional,
    point: &FiberPoint,
    omega: f64,
    breakdown: &EnergyBreakdown,
    slack: f64,
) -> Vec<CheckReport> {
    let w_half = f.dirac().half_norm_sq_momentum(&point.w.to_momentum());
    let value = breakdown.total;
    let c = f.coupling() * GAMMA_K;
    let abs = 1e-12;
    vec![
        CheckReport::lt("fiber.omega_positive", 0.0, omega),
        CheckReport::leq("fiber.omega_below_value", omega, value, slack, abs),
        CheckReport::lt("fiber.positive_part_dominates", point.eta.norm_sq(), point.a * point.a),
        CheckReport::leq("fiber.kinetic_at_least_one", 1.0, breakdown.kinetic(), slack, abs),
        CheckReport::leq("fiber.negative_part_small", breakdown.kinetic_minus, c * w_half, slack, abs),
        CheckReport::leq("fiber.value_window_lower", (1.0 - c) * w_half, value, slack, abs),
        CheckReport::leq("fiber.value_window_upper", value, w_half, slack, abs),
    ]
}

/// Random element of `X₋` (momentum representation) with unit L² norm.
pub(crate) fn random_negative(f: &Functional, rng: &mut ChaCha8Rng) -> SpinorField {
    let grid = *f.grid();
    let mut x = SpinorField::zeros(grid, Representation::Momentum);
    for comp in x.components_mut().iter_mut() {
        for v in comp.iter_mut() {
            *v = Complex64::new(rng.sample(StandardNormal), rng.sample(StandardNormal));
        }
    }
    let x = f.dirac().project_momentum(&x, Sign::Minus, f.model());
    x.scaled(1.0 / x.norm())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ConcavityReport {
    /// `2(1 - 12κγ_K)`; equals `2(1 - 6e²γ_K)` for Maxwell–Dirac.
    pub constant: f64,
    pub probes: Vec<CheckReport>,
    pub violations: usize,
}

/// Probes `d²I(ψ)[h;h] - 2ω‖h‖² ≤ -c‖h‖²_{H^{1/2}}` along random tangent
/// directions `h = da(η)[ξ] w + ξ`, `ξ ∈ X₋`, `da(η)[ξ] = -a⁻¹ Re⟨η|ξ⟩`.
pub fn certify_concavity(
    f: &Functional,
    result: &MaximizerResult,
    num_probes: usize,
    seed: u64,
    slack: f64,
) -> Result<ConcavityReport> {
    if !result.converged {
        return Err(Error::InvalidArgument("concavity needs a converged maximizer".into()));
    }
    let constant = 2.0 * (1.0 - 12.0 * f.kappa() * GAMMA_K);
    let p = &result.point;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut probes = Vec::with_capacity(num_probes);
    for k in 0..num_probes {
        let xi = random_negative(f, &mut rng).scaled(rng.random_range(0.1..1.0));
        let da = -l2_inner(&p.eta, &xi)?.re / p.a;
        let h = xi.plus_scaled(da, &p.w)?;
        let lhs = f.hessian_form(&p.psi, &h, &h)? - 2.0 * result.omega * h.norm_sq();
        let rhs = -constant * f.dirac().half_norm_sq_momentum(&h);
        probes.push(
            CheckReport::leq("fiber.concavity", lhs, rhs, slack, 1e-12)
                .with_provenance(format!("seed {seed} probe {k}")),
        );
    }
    let violations = probes.iter().filter(|r| !r.pass).count();
    Ok(ConcavityReport {
        constant,
        probes,
        violations,
    })
}

/// `min_θ ‖a - e^{iθ} b‖_{L²}`.
pub fn phase_distance(a: &SpinorField, b: &SpinorField) -> Result<f64> {
    let overlap = l2_inner(b, a)?.norm();
    Ok((a.norm_sq() + b.norm_sq() - 2.0 * overlap).max(0.0).sqrt())
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct UniquenessReport {
    pub values: Vec<f64>,
    pub value_spread: f64,
    /// Largest distance modulo phase between the start-from-zero maximizer
    /// and the others.
    pub max_distance: f64,
}

/// Re-runs the maximization from `starts` random initial `η` of norm at most
/// `radius` and compares with the `η = 0` run.
pub fn uniqueness_probe(
    f: &Functional,
    w: &SpinorField,
    cfg: &FiberConfig,
    starts: usize,
    radius: f64,
    seed: u64,
) -> Result<UniquenessReport> {
    let reference = maximize(f, w, cfg, None)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut values = vec![reference.value()];
    let mut max_distance = 0.0f64;
    for _ in 0..starts {
        let eta = random_negative(f, &mut rng).scaled(radius * rng.random_range(0.5..=1.0));
        let r = maximize(f, w, cfg, Some(&eta))?;
        values.push(r.value());
        max_distance = max_distance.max(phase_distance(&r.point.psi, &reference.point.psi)?);
    }
    let lo = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    Ok(UniquenessReport {
        values,
        value_spread: hi - lo,
        max_distance,
    })
}
