//! Numerical falsification harness for the functional inequalities used by
//! the solver: Kato and Hardy, Coulomb positivity, `|J| ≤ ρ`, the lower
//! bounds on the interaction of spinors built from a two-spinor profile,
//! and the postconditions of a solve.

mod report;

pub use report::{CheckReport, all_pass};

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::coulomb::{
    GAMMA_K, HARDY_C, InteractionKernel, SelfFields, coulomb_bilinear, current_values, density_values, electron_charge,
    potentials,
};
use crate::dirac::{DiracSpectralData, ModelKind, Sign, beta, mat_vec, sigma_dot};
use crate::error::{Error, Result};
use crate::fiber::{self, FiberConfig};
use crate::functional::Functional;
use crate::minimizer::{SolveConfig, SolveResult};
use crate::spectral::{Field, GridSpec, ScalarField, SpinorField, TwoSpinorField, sobolev_norm_sq};

/// Default relative slack of the inequality checks.
pub const SLACK: f64 = 0.01;
/// Default absolute slack of the inequality checks.
pub const ABS_SLACK: f64 = 1e-10;

/// Weight functions are centered half a cell off the origin so that no grid
/// point sits on the `1/|x|` singularity.
fn weight_radius(grid: &GridSpec, i: usize) -> f64 {
    let h = grid.spacing();
    let l = grid.l();
    let x = grid.position(i);
    x.iter()
        .map(|&c| {
            let mut d = c - 0.5 * h;
            d -= l * (d / l).round();
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

fn pointwise_sq<const C: usize>(f: &Field<C>) -> Vec<f64> {
    let c = f.components();
    (0..f.grid().len())
        .map(|i| c.iter().map(|comp| comp[i].norm_sqr()).sum())
        .collect()
}

/// Rejects fields with more than `1e-8` of their mass outside radius `l/4`.
fn require_localized<const C: usize>(f: &Field<C>) -> Result<Vec<f64>> {
    let f = f.to_position();
    let grid = *f.grid();
    let d = pointwise_sq(&f);
    let total: f64 = d.iter().sum();
    let outside: f64 = (0..grid.len())
        .filter(|&i| weight_radius(&grid, i) > grid.l() / 4.0)
        .map(|i| d[i])
        .sum();
    if outside > 1e-8 * total {
        return Err(Error::DegenerateInput(format!(
            "field not localized: fraction {:.3e} outside radius l/4",
            outside / total
        )));
    }
    Ok(d)
}

/// `Σ_p |p|^{2s} |f̂|² w_p`.
fn homogeneous_norm_sq<const C: usize>(f: &Field<C>, s: f64) -> f64 {
    let m = f.to_momentum();
    let grid = *f.grid();
    let mut acc = 0.0;
    for i in 0..grid.len() {
        let p = grid.momentum(i);
        let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
        if p2 == 0.0 {
            continue;
        }
        let w = p2.powf(s);
        acc += w * m.components().iter().map(|c| c[i].norm_sqr()).sum::<f64>();
    }
    acc * grid.momentum_weight()
}

/// `∫|f|²/|x| ≤ γ_K ‖(-Δ)^{1/4} f‖²`.
pub fn check_kato<const C: usize>(f: &Field<C>) -> Result<CheckReport> {
    let d = require_localized(f)?;
    let grid = *f.grid();
    let lhs: f64 = (0..grid.len()).map(|i| d[i] / weight_radius(&grid, i)).sum::<f64>() * grid.position_weight();
    let rhs = GAMMA_K * homogeneous_norm_sq(f, 0.5);
    Ok(CheckReport::leq("kato", lhs, rhs, SLACK, ABS_SLACK))
}

/// `∫|f|²/|x|² ≤ 4 ‖∇f‖²`.
pub fn check_hardy<const C: usize>(f: &Field<C>) -> Result<CheckReport> {
    let d = require_localized(f)?;
    let grid = *f.grid();
    let lhs: f64 = (0..grid.len())
        .map(|i| d[i] / weight_radius(&grid, i).powi(2))
        .sum::<f64>()
        * grid.position_weight();
    let rhs = HARDY_C * homogeneous_norm_sq(f, 1.0);
    Ok(CheckReport::leq("hardy", lhs, rhs, SLACK, ABS_SLACK))
}

/// Coulomb bounds on one spinor:
/// `B(ρ,ρ) ≤ γ_K ‖ρ‖_{L¹} ‖(-Δ)^{1/4}ψ‖²`, `Σ_k B(J_k,J_k) ≥ 0`,
/// `Σ_k B(J_k,J_k) ≤ B(ρ,ρ)` and pointwise `|J| ≤ ρ`.
pub fn check_interaction_bounds(psi: &SpinorField, kernel: &InteractionKernel) -> Result<Vec<CheckReport>> {
    require_localized(psi)?;
    kernel.grid().check_same(psi.grid())?;
    let psi = psi.to_position();
    let fields = SelfFields::new(&psi, kernel, true);
    let b_rho = fields.density_energy();
    let b_j = fields.current_energy();
    let mass = psi.norm_sq();
    let rho = density_values(&psi);
    let j = current_values(&psi);
    let excess = (0..rho.len())
        .map(|i| (j[0][i].powi(2) + j[1][i].powi(2) + j[2][i].powi(2)).sqrt() - rho[i])
        .fold(f64::NEG_INFINITY, f64::max);
    let scale = rho.iter().cloned().fold(0.0, f64::max);
    Ok(vec![
        CheckReport::leq(
            "coulomb.kato_bound",
            b_rho,
            GAMMA_K * mass * homogeneous_norm_sq(&psi, 0.5),
            SLACK,
            ABS_SLACK,
        ),
        CheckReport::leq("coulomb.current_energy_nonnegative", -b_j, 0.0, SLACK, ABS_SLACK),
        CheckReport::leq("coulomb.current_below_density", b_j, b_rho, SLACK, ABS_SLACK),
        CheckReport::leq("coulomb.pointwise_current_bound", excess, 0.0, 0.0, 1e-12 * scale.max(1.0)),
    ])
}

fn q_md(psi: &SpinorField, kernel: &InteractionKernel) -> f64 {
    SelfFields::new(&psi.to_position(), kernel, true).interaction()
}

fn profile_gradient_sq(v: &TwoSpinorField) -> f64 {
    homogeneous_norm_sq(v, 1.0)
}

fn profile_self_energy(v: &TwoSpinorField, kernel: &InteractionKernel) -> Result<f64> {
    let rho = ScalarField::from_real(*v.grid(), &pointwise_sq(&v.to_position()))?;
    coulomb_bilinear(&rho, &rho, kernel)
}

/// Lower bounds on `Q_MD(ψ)` for `ψ = a w + ψ₋` with `w = U_FW⁻¹(0, v)`,
/// `‖ψ‖ = 1`:
/// `Q(ψ) ≥ Q(w) - 8γ_K(‖w‖²_{H^{1/2}} - 1) - 10γ_K(‖ψ₋‖²‖w‖²_{H^{1/2}} + ‖ψ₋‖²_{H^{1/2}})`
/// and the same with `Q(w) - 8γ_K(‖w‖²_{H^{1/2}} - 1)` replaced by
/// `B(ρ_v,ρ_v) - 8γ_K‖∇v‖²`. `psi_minus` is projected onto `X₋(D)` and
/// must have L² norm below 1.
pub fn check_key_lemma(
    dirac: &DiracSpectralData,
    kernel: &InteractionKernel,
    v: &TwoSpinorField,
    psi_minus: &SpinorField,
) -> Result<Vec<CheckReport>> {
    let model = ModelKind::MaxwellDirac;
    let w = dirac.embed_two_spinor(v, model)?;
    let eta = dirac.project(&psi_minus.to_momentum(), Sign::Minus, model)?;
    let eta_sq = eta.norm_sq();
    if eta_sq >= 1.0 {
        return Err(Error::InvalidArgument("negative part must have norm below 1".into()));
    }
    let a = (1.0 - eta_sq).sqrt();
    let psi = w.to_momentum().scaled(a).plus_scaled(1.0, &eta)?;
    let q_psi = q_md(&psi, kernel);
    let q_w = q_md(&w, kernel);
    let w_half = sobolev_norm_sq(&w, 0.5)?;
    let vn = v.scaled(1.0 / v.norm());
    let v_half = sobolev_norm_sq(&vn, 0.5)?;
    let eta_half = sobolev_norm_sq(&eta, 0.5)?;
    let first = q_w - 8.0 * GAMMA_K * (w_half - 1.0) - 10.0 * GAMMA_K * (eta_sq * w_half + eta_half);
    let second = profile_self_energy(&vn, kernel)?
        - 8.0 * GAMMA_K * profile_gradient_sq(&vn)
        - 10.0 * GAMMA_K * (eta_sq * v_half + eta_half);
    Ok(vec![
        CheckReport::leq("key_lemma.direction_form", first, q_psi, SLACK, ABS_SLACK),
        CheckReport::leq("key_lemma.profile_form", second, q_psi, SLACK, ABS_SLACK),
    ])
}

/// For `w = U_FW⁻¹(0, v)`:
/// `Q_MD(w) ≥ B((w,βw),(w,βw)) ≥ B(ρ_v,ρ_v) - 4γ_K‖∇v‖²`.
pub fn check_fw_lower_bound(
    dirac: &DiracSpectralData,
    kernel: &InteractionKernel,
    v: &TwoSpinorField,
) -> Result<Vec<CheckReport>> {
    let w = dirac.embed_two_spinor(v, ModelKind::MaxwellDirac)?.into_position();
    let q_w = q_md(&w, kernel);
    let b = beta();
    let wbw: Vec<f64> = (0..w.grid().len())
        .map(|i| {
            let x = w.at(i);
            let y = mat_vec(&b, &x);
            x.iter().zip(y.iter()).map(|(p, q)| (p.conj() * q).re).sum()
        })
        .collect();
    let wbw = ScalarField::from_real(*w.grid(), &wbw)?;
    let b_beta = coulomb_bilinear(&wbw, &wbw, kernel)?;
    let vn = v.scaled(1.0 / v.norm());
    let lower = profile_self_energy(&vn, kernel)? - 4.0 * GAMMA_K * profile_gradient_sq(&vn);
    Ok(vec![
        CheckReport::leq("fw_bound.beta_density", b_beta, q_w, SLACK, ABS_SLACK),
        CheckReport::leq("fw_bound.profile", lower, b_beta, SLACK, ABS_SLACK),
    ])
}

/// Postconditions of a solve: residual, `ω ∈ (0,1)`, the energy window,
/// fiber bounds, a concavity certificate, and the eigenvalue equation
/// written with explicitly recomputed potentials.
pub fn check_solution(result: &SolveResult, cfg: &SolveConfig, num_probes: usize) -> Result<Vec<CheckReport>> {
    let f = cfg.functional()?;
    let mut out = Vec::new();
    out.extend(result.window_report.iter().cloned());
    out.extend(result.property_report.iter().cloned());
    out.push(CheckReport::lt("solve.big_e_positive", 0.0, result.energy_big_e));
    if cfg.e2 > 0.0 {
        out.push(CheckReport::lt("solve.big_e_below_m", result.energy_big_e, cfg.m));
    }
    let concavity = fiber::certify_concavity(&f, &result.maximizer, num_probes, cfg.seed, 1e-8)?;
    out.extend(concavity.probes);
    let explicit = explicit_residual(&f, &result.psi, result.omega)?;
    out.push(CheckReport::leq(
        "solve.explicit_potential_residual",
        explicit,
        cfg.tol_residual,
        0.0,
        0.0,
    ));
    Ok(out)
}

/// `‖Dψ - eA₀ψ + e α·Aψ - ωψ‖_{H^{-1/2}}` (Maxwell–Dirac) or
/// `‖Hψ + eA₀ψ - ωψ‖_{H^{-1/2}}` with `A₀ = -2e ρ ∗ 1/|x|` (Coulomb–Dirac),
/// the coupling of the `m`-family being `e² → m e²`.
pub fn explicit_residual(f: &Functional, psi: &SpinorField, omega: f64) -> Result<f64> {
    let psi = psi.to_position();
    let charge = electron_charge(f.m() * f.e2());
    let (a0, a) = potentials(&psi, f.kernel(), charge)?;
    let a0 = a0.real_values();
    let mut r = f.dirac().apply_operator(&psi, f.model())?;
    for i in 0..psi.grid().len() {
        let v = psi.at(i);
        let mut x = r.at(i);
        match f.model() {
            ModelKind::MaxwellDirac => {
                let q = [a.component(0)[i].re, a.component(1)[i].re, a.component(2)[i].re];
                let (u0, u1) = sigma_dot(q, v[2], v[3]);
                let (l0, l1) = sigma_dot(q, v[0], v[1]);
                let av = [u0, u1, l0, l1];
                for c in 0..4 {
                    x[c] += -charge * a0[i] * v[c] + charge * av[c] - omega * v[c];
                }
            }
            ModelKind::CoulombDirac => {
                for c in 0..4 {
                    x[c] += charge * (-2.0 * a0[i]) * v[c] - omega * v[c];
                }
            }
        }
        r.set(i, x);
    }
    Ok(sobolev_norm_sq(&r, -0.5)?.max(0.0).sqrt())
}

/// Smooth random spinor: a Gaussian envelope of random width in `[1.2, 1.8]`
/// and random center near the origin, times random affine polynomials per
/// component, normalized to unit L² norm.
pub fn random_localized_spinor(grid: GridSpec, rng: &mut ChaCha8Rng) -> SpinorField {
    let sigma = rng.random_range(1.2..1.8);
    let center: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.5..0.5));
    let coef: [[f64; 8]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
    let f = SpinorField::from_fn(grid, |x| {
        let d = [x[0] - center[0], x[1] - center[1], x[2] - center[2]];
        let env = (-(d[0] * d[0] + d[1] * d[1] + d[2] * d[2]) / (4.0 * sigma * sigma)).exp();
        std::array::from_fn(|c| {
            let a = &coef[c];
            let s = 0.5 / sigma;
            Complex64::new(
                a[0] + s * (a[1] * d[0] + a[2] * d[1] + a[3] * d[2]),
                a[4] + s * (a[5] * d[0] + a[6] * d[1] + a[7] * d[2]),
            ) * env
        })
    });
    f.scaled(1.0 / f.norm())
}

/// Random smooth two-spinor profile (Gaussian envelope, random width in
/// `[1.2, 1.8]`, random complex spin direction and a mild random tilt).
pub fn random_profile(grid: GridSpec, rng: &mut ChaCha8Rng) -> TwoSpinorField {
    let sigma = rng.random_range(1.2..1.8);
    let spin: [Complex64; 2] = std::array::from_fn(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)));
    let tilt: [f64; 3] = std::array::from_fn(|_| rng.random_range(-0.3..0.3));
    let v = TwoSpinorField::from_fn(grid, |x| {
        let env = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (4.0 * sigma * sigma)).exp();
        let t = 1.0 + (tilt[0] * x[0] + tilt[1] * x[1] + tilt[2] * x[2]) / sigma;
        [spin[0] * env * t, spin[1] * env]
    });
    v.scaled(1.0 / v.norm())
}

/// The randomized inequality suite for one seed.
pub fn run_seed(dirac: &DiracSpectralData, kernel: &InteractionKernel, seed: u64) -> Result<Vec<CheckReport>> {
    let grid = *dirac.grid();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let psi = random_localized_spinor(grid, &mut rng);
    let mut out = vec![check_kato(&psi)?, check_hardy(&psi)?];
    out.extend(check_interaction_bounds(&psi, kernel)?);
    let v = random_profile(grid, &mut rng);
    let noise = random_localized_spinor(grid, &mut rng);
    let minus = dirac.project(&noise, Sign::Minus, ModelKind::MaxwellDirac)?;
    let target = rng.random_range(0.0..0.5);
    let minus = minus.scaled(target / minus.norm());
    out.extend(check_key_lemma(dirac, kernel, &v, &minus)?);
    out.extend(check_fw_lower_bound(dirac, kernel, &v)?);
    let tag = format!("seed {seed}");
    Ok(out.into_iter().map(|r| r.with_provenance(tag.clone())).collect())
}

/// [`run_seed`] over `seeds` consecutive seeds starting at `first_seed`.
pub fn run_suite(grid: GridSpec, kernel: &InteractionKernel, first_seed: u64, seeds: usize) -> Result<Vec<CheckReport>> {
    let dirac = DiracSpectralData::new(grid);
    let mut out = Vec::new();
    for s in 0..seeds as u64 {
        out.extend(run_seed(&dirac, kernel, first_seed + s)?);
    }
    Ok(out)
}

/// Fiber certification at an embedded Gaussian direction, used by `verify`
/// and by the self-test.
pub fn check_fiber(f: &Functional, sigma: f64, cfg: &FiberConfig, probes: usize, seed: u64) -> Result<Vec<CheckReport>> {
    let w = crate::minimizer::initial_direction(f, sigma)?;
    let r = fiber::maximize(f, &w, cfg, None)?;
    let mut out = r.property_report.clone();
    out.extend(fiber::certify_concavity(f, &r, probes, seed, cfg.check_slack)?.probes);
    Ok(out)
}
