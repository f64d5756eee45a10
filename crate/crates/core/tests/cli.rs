//! End-to-end runs of the `dsol` binary.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use dsol::cli::RunManifest;
use dsol::spectral::{SpinorField, snapshot};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use tempfile::TempDir;

fn dsol(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_dsol"))
        .args(args)
        .env_remove("DSOL_THREADS")
        .output()
        .expect("binary runs")
}

fn code(out: &Output) -> i32 {
    out.status.code().expect("exit code")
}

fn stderr(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

const SMALL_FREE: &str = r#"{"model":"md","e2":0.0,"grid":{"n":16,"l":16},"init":{"sigma":2.0}}"#;
const SMALL_COUPLED: &str = r#"{"model":"md","e2":0.06,"grid":{"n":16,"l":16},"init":{"sigma":2.0}}"#;

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn free_solve_writes_a_consistent_manifest() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_FREE);
    let out = dir.path().join("run1");
    let r = dsol(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert!((m.energy_big_e - 1.0).abs() < 1e-10);
    assert!((m.omega - 1.0).abs() < 1e-10);
    assert!(m.checks.failed.is_empty(), "{:?}", m.checks);
    assert_eq!(m.config.e2, 0.0);
    assert_eq!(m.format_version, dsol::cli::MANIFEST_VERSION);
    let psi: SpinorField = snapshot::load(&out.join("psi.dsol")).unwrap();
    assert!((psi.norm_sq() - 1.0).abs() < 1e-10);
    let trace = fs::read_to_string(out.join("trace.csv")).unwrap();
    assert_eq!(trace.lines().next().unwrap(), "iter,E,grad_norm,omega,inner_iters");
    assert!(out.join("checks.json").exists());
}

#[test]
fn free_solve_below_unit_mass_gives_energy_m() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(
        dir.path(),
        "cfg.json",
        r#"{"e2":0.0,"m":0.5,"grid":{"n":16,"l":16},"init":{"sigma":2.0}}"#,
    );
    let out = dir.path().join("run");
    let r = dsol(&["solve", "--config", s(&cfg), "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert!((m.energy_big_e - 0.5).abs() < 1e-10);
    // The multiplier of the normalized problem does not scale with m.
    assert!((m.omega - 1.0).abs() < 1e-10);
}

#[test]
fn manifests_reproduce_bit_for_bit() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_COUPLED);
    let mut manifests = Vec::new();
    for run in ["a", "b"] {
        let out = dir.path().join(run);
        let r = dsol(&["solve", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&r), 0, "{}", stderr(&r));
        let mut m = RunManifest::load(&out.join("manifest.json")).unwrap();
        m.wall_time_s = 0.0;
        manifests.push(m);
    }
    assert_eq!(manifests[0], manifests[1]);
    // Re-running from the echoed configuration gives the same energy.
    let echo = dir.path().join("echo.json");
    fs::write(&echo, serde_json::to_string(&manifests[0].config).unwrap()).unwrap();
    let out = dir.path().join("c");
    assert_eq!(code(&dsol(&["solve", "--config", s(&echo), "--out", s(&out)])), 0);
    let m = RunManifest::load(&out.join("manifest.json")).unwrap();
    assert!((m.energy_big_e - manifests[0].energy_big_e).abs() <= 1e-12);
}

#[test]
fn sweep_writes_table_and_row_manifests() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_COUPLED);
    let out = dir.path().join("sweep");
    let r = dsol(&["sweep", "--config", s(&cfg), "--masses", "0.25,0.5,1.0", "--out", s(&out), "--jobs", "2"]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let csv = fs::read_to_string(out.join("sweep.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "m,e_m,E_m,omega,residual,converged");
    let rows: Vec<Vec<String>> = lines.map(|l| l.split(',').map(String::from).collect()).collect();
    assert_eq!(rows.len(), 3);
    let per_mass: Vec<f64> = rows
        .iter()
        .map(|r| r[2].parse::<f64>().unwrap() / r[0].parse::<f64>().unwrap())
        .collect();
    assert!(per_mass[2] < per_mass[1] && per_mass[1] < per_mass[0], "{per_mass:?}");
    assert!(rows.iter().all(|r| r[5] == "true"));
    for m in ["0.25", "0.5", "1"] {
        assert!(out.join(format!("m_{m}")).join("manifest.json").exists(), "m = {m}");
    }
}

#[test]
fn free_sweep_is_reported_non_strict() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_FREE);
    let out = dir.path().join("sweep");
    let r = dsol(&["sweep", "--config", s(&cfg), "--masses", "0.25,0.5,1.0", "--out", s(&out)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    assert!(String::from_utf8_lossy(&r.stdout).contains("non-strict (free case)"));
}

#[test]
fn sweep_needs_three_masses() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_FREE);
    let r = dsol(&["sweep", "--config", s(&cfg), "--masses", "0.5,1.0", "--out", s(&dir.path().join("x"))]);
    assert_eq!(code(&r), 1);
}

#[test]
fn verify_suite_passes_and_corrupted_fields_fail() {
    let dir = TempDir::new().unwrap();
    let r = dsol(&["verify", "--seeds", "3", "--out", s(dir.path())]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let checks: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.path().join("checks.json")).unwrap()).unwrap();
    assert_eq!(checks.as_array().unwrap().len(), 30);

    let cfg = write_config(dir.path(), "cfg.json", SMALL_COUPLED);
    let run = dir.path().join("run");
    assert_eq!(code(&dsol(&["solve", "--config", s(&cfg), "--out", s(&run)])), 0);
    let field = run.join("psi.dsol");
    let good = dsol(&["verify", "--config", s(&cfg), "--field", s(&field), "--out", s(&dir.path().join("good"))]);
    assert_eq!(code(&good), 0, "{}", stderr(&good));

    // Negative control: 1e-2 noise, renormalized.
    let psi: SpinorField = snapshot::load(&field).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut noisy = psi.clone();
    for comp in noisy.components_mut().iter_mut() {
        for v in comp.iter_mut() {
            *v += Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)) * 1e-2 * psi.max_abs();
        }
    }
    let noisy = noisy.scaled(1.0 / noisy.norm());
    let bad = dir.path().join("bad.dsol");
    snapshot::save(&noisy, &bad).unwrap();
    let r = dsol(&["verify", "--config", s(&cfg), "--field", s(&bad), "--out", s(&dir.path().join("bad"))]);
    assert_eq!(code(&r), 3, "{}", stderr(&r));

    // A truncated file is an I/O failure.
    let bytes = fs::read(&field).unwrap();
    let cut = dir.path().join("cut.dsol");
    fs::write(&cut, &bytes[..bytes.len() / 2]).unwrap();
    let r = dsol(&["verify", "--config", s(&cfg), "--field", s(&cut)]);
    assert_eq!(code(&r), 4, "{}", stderr(&r));
}

#[test]
fn export_writes_the_midplane() {
    let dir = TempDir::new().unwrap();
    let cfg = write_config(dir.path(), "cfg.json", SMALL_COUPLED);
    let run = dir.path().join("run");
    assert_eq!(code(&dsol(&["solve", "--config", s(&cfg), "--out", s(&run)])), 0);
    let csv_path = dir.path().join("plots").join("slice.csv");
    let r = dsol(&["export", "--input", s(&run.join("psi.dsol")), "--out", s(&csv_path)]);
    assert_eq!(code(&r), 0, "{}", stderr(&r));
    let csv = fs::read_to_string(&csv_path).unwrap();
    let mut lines = csv.lines();
    assert_eq!(lines.next().unwrap(), "x,y,rho,A0,J_abs");
    let rows: Vec<Vec<f64>> = lines.map(|l| l.split(',').map(|v| v.parse().unwrap()).collect()).collect();
    assert_eq!(rows.len(), 16 * 16);
    assert!(rows.iter().all(|r| r[2] >= 0.0 && r[3] <= 0.0 && r[4] <= r[2] * (1.0 + 1e-12)));
    assert!(rows.windows(2).all(|w| w[0][0] < w[1][0] || (w[0][0] == w[1][0] && w[0][1] < w[1][1])));
}

#[test]
fn configuration_errors_exit_with_one() {
    let dir = TempDir::new().unwrap();
    let out = dir.path().join("o");
    let cases = [
        (r#"{"m":1.5}"#, "m ∈ (0,1]"),
        (r#"{"kernel":"trunctaed"}"#, "did you mean \"truncated\""),
        (r#"{"tol":{"inner":1e-9,"innr":2}}"#, "tol"),
        (r#"{"grid":{"n":16,"l":-1}}"#, "grid"),
    ];
    for (json, needle) in cases {
        let cfg = write_config(dir.path(), "bad.json", json);
        let r = dsol(&["solve", "--config", s(&cfg), "--out", s(&out)]);
        assert_eq!(code(&r), 1, "{json}: {}", stderr(&r));
        assert!(stderr(&r).contains(needle), "{json}: {}", stderr(&r));
    }
    let r = dsol(&["solve", "--config", s(&dir.path().join("missing.json")), "--out", s(&out)]);
    assert_eq!(code(&r), 4);
    assert_eq!(code(&dsol(&["solve"])), 1);
    assert_eq!(code(&dsol(&["--help"])), 0);
}

#[test]
fn thread_count_comes_from_the_environment() {
    let run = |v: &str| {
        Command::new(env!("CARGO_BIN_EXE_dsol"))
            .arg("selftest")
            .env("DSOL_THREADS", v)
            .output()
            .unwrap()
    };
    assert_eq!(code(&run("zero")), 1);
    let ok = run("2");
    assert_eq!(code(&ok), 0, "{}", stderr(&ok));
}

#[test]
fn selftest_prints_one_line_per_check() {
    let r = dsol(&["selftest"]);
    assert_eq!(code(&r), 0, "{}", String::from_utf8_lossy(&r.stdout));
    let stdout = String::from_utf8_lossy(&r.stdout);
    assert!(stdout.lines().count() >= 8);
    assert!(stdout.lines().all(|l| l.starts_with("PASS ")));
}
