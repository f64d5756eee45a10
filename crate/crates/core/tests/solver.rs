//! Two-level solver behaviour on small grids: envelope gradient, warm
//! starts, descent invariants and the critical-point negative control.

mod common;

use dsol::coulomb::KernelVariant;
use dsol::dirac::{ModelKind, Sign};
use dsol::fiber::{self, FiberConfig};
use dsol::functional::Functional;
use dsol::minimizer::{self, SolveConfig};
use dsol::spectral::{GridSpec, SpinorField, l2_inner};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use common::smooth_spinor;

fn small(model: ModelKind, e2: f64) -> SolveConfig {
    SolveConfig {
        model,
        e2,
        grid: GridSpec::new(16, 16.0).unwrap(),
        init_sigma: 2.0,
        ..SolveConfig::default()
    }
}

/// Unit tangent vector of the positive unit sphere at `w`.
fn tangent(f: &Functional, w: &SpinorField, seed: u64) -> SpinorField {
    let h = smooth_spinor(*f.grid(), 2.5, seed);
    let h = f.dirac().project(&h, Sign::Plus, f.model()).unwrap().into_momentum();
    let wm = w.to_momentum();
    let along = l2_inner(&wm, &h).unwrap().re;
    let h = h.plus_scaled(-along, &wm).unwrap();
    h.scaled(1.0 / h.norm())
}

fn envelope_value(f: &Functional, w: &SpinorField, cfg: &FiberConfig) -> f64 {
    let w = w.scaled(1.0 / w.norm());
    fiber::maximize(f, &w, cfg, None).unwrap().value()
}

#[test]
fn envelope_gradient_matches_full_re_solves() {
    for model in [ModelKind::MaxwellDirac, ModelKind::CoulombDirac] {
        let cfg = small(model, 0.3);
        let f = cfg.functional().unwrap();
        let fc = FiberConfig {
            tol_inner: 1e-13,
            ..cfg.fiber_config()
        };
        let w = minimizer::initial_direction(&f, 2.0).unwrap();
        let r = fiber::maximize(&f, &w, &fc, None).unwrap();
        let g = minimizer::direction_gradient(&f, &w, &r).unwrap();
        for seed in 0..2 {
            let h = tangent(&f, &w, seed);
            let eps = 1e-4;
            let plus = envelope_value(&f, &w.plus_scaled(eps, &h).unwrap(), &fc);
            let minus = envelope_value(&f, &w.plus_scaled(-eps, &h).unwrap(), &fc);
            let fd = (plus - minus) / (2.0 * eps);
            let exact = 2.0 * l2_inner(&g, &h).unwrap().re;
            assert!((fd - exact).abs() < 1e-5 * exact.abs(), "{model:?}: {fd} vs {exact}");
        }
    }
}

#[test]
fn warm_start_saves_inner_iterations() {
    let cfg = small(ModelKind::MaxwellDirac, 0.3);
    let f = cfg.functional().unwrap();
    let fc = cfg.fiber_config();
    let w = minimizer::initial_direction(&f, 2.0).unwrap();
    let base = fiber::maximize(&f, &w, &fc, None).unwrap();
    let h = tangent(&f, &w, 7);
    let moved = w.plus_scaled(1e-3, &h).unwrap();
    let moved = moved.scaled(1.0 / moved.norm());
    let cold = fiber::maximize(&f, &moved, &fc, None).unwrap();
    let warm = fiber::maximize(&f, &moved, &fc, Some(&base.point.eta)).unwrap();
    assert!((cold.value() - warm.value()).abs() < 1e-12);
    // Linear convergence only buys log(1/|dw|) / log(G0/tol) of the cold
    // count, so the saving is strict but far from a fixed fraction.
    eprintln!("warm/cold inner iterations: {} / {}", warm.iterations, cold.iterations);
    assert!(warm.iterations < cold.iterations);
}

#[test]
fn descent_is_monotone_and_stays_on_the_sphere() {
    for model in [ModelKind::MaxwellDirac, ModelKind::CoulombDirac] {
        let cfg = small(model, 0.3);
        let r = minimizer::minimize(&cfg).unwrap();
        assert!(!r.flagged, "{:#?}", r.window_report);
        for pair in r.trace.windows(2) {
            assert!(pair[1].energy <= pair[0].energy + 1e-13, "{:?}", pair);
        }
        assert!((r.psi.norm_sq() - 1.0).abs() < 1e-10);
        let f = cfg.functional().unwrap();
        let w = &r.maximizer.point.w;
        assert!((w.norm() - 1.0).abs() < 1e-12);
        let off = w.plus_scaled(-1.0, &f.dirac().project(w, Sign::Plus, model).unwrap()).unwrap().norm();
        assert!(off < 1e-10);
        assert!(r.gradient_norm <= cfg.tol_outer);
        assert!(r.omega > 0.0 && r.omega < 1.0);
        assert!(r.energy_e < 1.0 && r.energy_e > 1.0 - f.coupling() * dsol::coulomb::GAMMA_K);
    }
}

#[test]
fn critical_point_check_detects_perturbations() {
    let cfg = small(ModelKind::MaxwellDirac, 0.3);
    let f = cfg.functional().unwrap();
    let r = minimizer::minimize(&cfg).unwrap();
    let fc = cfg.fiber_config();
    let clean = minimizer::check_critical_point_characterization(&f, &r.psi, &fc).unwrap();
    assert!(clean.iter().all(|c| c.pass), "{clean:#?}");

    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let mut noisy = r.psi.clone();
    let scale = 1e-2 * r.psi.max_abs();
    for comp in noisy.components_mut().iter_mut() {
        for v in comp.iter_mut() {
            *v += Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * scale;
        }
    }
    let noisy = noisy.scaled(1.0 / noisy.norm());
    let dirty = minimizer::check_critical_point_characterization(&f, &noisy, &fc).unwrap();
    assert!(dirty.iter().any(|c| !c.pass), "{dirty:#?}");
}

#[test]
fn free_case_is_exact_for_every_mass() {
    let cfg = small(ModelKind::CoulombDirac, 0.0);
    let s = minimizer::sweep(&cfg, &[0.3, 0.6, 0.9]).unwrap();
    assert!(!s.partial);
    assert_eq!(s.strictness, "non-strict (free case)");
    for r in &s.rows {
        assert!((r.big_e_m - r.m).abs() < 1e-10);
    }
}

#[test]
fn trial_bounds_dominate_the_solved_energy() {
    let cfg = small(ModelKind::MaxwellDirac, 0.3);
    let f = cfg.functional().unwrap();
    let r = minimizer::minimize(&cfg).unwrap();
    let v = minimizer::gaussian_profile(cfg.grid, 1.0);
    let t = minimizer::trial_upper_bound(&f, &v, &[0.5, 0.75, 1.0]).unwrap();
    let checks = t.check(r.energy_e, 0.0);
    assert_eq!(checks.len(), 3);
    assert!(checks.iter().all(|c| c.pass), "{checks:#?}");
    assert!((t.bound_at(t.epsilon_star) - t.bound_star).abs() < 1e-10);
}

#[test]
fn mass_family_rescales_the_coupling() {
    let g = GridSpec::new(16, 16.0).unwrap();
    let full = Functional::new(g, ModelKind::CoulombDirac, 1.0, 0.3, KernelVariant::Truncated).unwrap();
    let half = full.with_mass(0.5).unwrap();
    let psi = smooth_spinor(g, 2.0, 1);
    let a = full.energy(&psi).unwrap();
    let b = half.energy(&psi).unwrap();
    assert!((a.kinetic() - b.kinetic()).abs() < 1e-14);
    let ia = a.kinetic() - a.total;
    let ib = b.kinetic() - b.total;
    assert!((ia - 2.0 * ib).abs() < 1e-13 * ia.abs());
}

#[test]
fn initial_width_does_not_change_the_minimum() {
    let energies: Vec<f64> = [1.5, 3.0]
        .iter()
        .map(|&sigma| {
            let cfg = SolveConfig { init_sigma: sigma, ..small(ModelKind::MaxwellDirac, 0.3) };
            minimizer::minimize(&cfg).unwrap().energy_e
        })
        .collect();
    assert!((energies[0] - energies[1]).abs() < 1e-9, "{energies:?}");
}
