//! Command-line front end: JSON configuration, batch solves and sweeps,
//! the verification suite, CSV export of fields and a quick self-test.
//!
//! Exit codes: 0 success, 1 configuration error, 2 non-convergence,
//! 3 failed check, 4 I/O error.

use std::fmt;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::coulomb::{self, InteractionKernel, KernelVariant, electron_charge};
use crate::dirac::{DiracSpectralData, ModelKind, Sign};
use crate::error::Error;
use crate::fiber::{self, FiberConfig};
use crate::functional::{EnergyBreakdown, Functional};
use crate::minimizer::{self, SolveConfig, SolveResult, SweepResult, TraceRow};
use crate::spectral::{GridSpec, Representation, ScalarField, SpinorField, TwoSpinorField, snapshot, sobolev_norm_sq};
use crate::verify::{self, CheckReport};

pub const MANIFEST_VERSION: &str = "dsol-manifest/1";
/// Concavity probes attached to every solve.
const SOLVE_PROBES: usize = 20;

#[derive(Debug, Parser)]
#[command(name = "dsol", version, about = "Solitary waves of the Maxwell-Dirac and Coulomb-Dirac equations")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Minimize the energy for one configuration.
    Solve {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Independent solves over several mass parameters.
    Sweep {
        #[arg(long)]
        config: PathBuf,
        /// Comma-separated values in (0,1].
        #[arg(long, value_delimiter = ',', num_args = 1..)]
        masses: Vec<f64>,
        #[arg(long)]
        out: PathBuf,
        /// Maximum number of concurrent solves (default: one per worker).
        #[arg(long)]
        jobs: Option<usize>,
    },
    /// Randomized inequality suite, or the solution checks for `--field`.
    Verify {
        #[arg(long, default_value_t = 100)]
        seeds: usize,
        #[arg(long, default_value_t = 0)]
        first_seed: u64,
        /// Grid, kernel and model; defaults apply without it.
        #[arg(long)]
        config: Option<PathBuf>,
        /// A solved field (`.dsol`) to check against the configuration.
        #[arg(long)]
        field: Option<PathBuf>,
        #[arg(long, default_value = ".")]
        out: PathBuf,
    },
    /// Write the z = 0 plane of a solved field as CSV.
    Export {
        #[arg(long)]
        input: PathBuf,
        /// Configuration or manifest giving m, e² and the kernel; defaults to
        /// `manifest.json` next to the input.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Quick closed-form checks on small grids.
    Selftest,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    NonConvergence(String),
    CheckFailure(String),
    Io(String),
}

impl CliError {
    pub fn code(&self) -> i32 {
        match self {
            CliError::Config(_) => 1,
            CliError::NonConvergence(_) => 2,
            CliError::CheckFailure(_) => 3,
            CliError::Io(_) => 4,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::NonConvergence(m) => write!(f, "did not converge: {m}"),
            CliError::CheckFailure(m) => write!(f, "check failed: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Io(_) | Error::Format(_) => CliError::Io(e.to_string()),
            Error::Fiber(_) | Error::Solve(_) => CliError::NonConvergence(e.to_string()),
            _ => CliError::Config(e.to_string()),
        }
    }
}

fn io_err(path: &Path, e: impl fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GridSection {
    pub n: usize,
    pub l: f64,
}

impl Default for GridSection {
    fn default() -> Self {
        Self { n: 64, l: 60.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct TolSection {
    pub inner: f64,
    pub outer: f64,
    pub residual: f64,
}

impl Default for TolSection {
    fn default() -> Self {
        Self {
            inner: 1e-9,
            outer: 1e-7,
            residual: 1e-6,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MaxSection {
    pub inner: usize,
    pub outer: usize,
}

impl Default for MaxSection {
    fn default() -> Self {
        Self {
            inner: 5000,
            outer: 2000,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct InitSection {
    pub sigma: f64,
}

impl Default for InitSection {
    fn default() -> Self {
        Self { sigma: 8.0 }
    }
}

/// On-disk configuration. Every key is optional; `model` and `kernel` are
/// kept as strings so that typos can be answered with a suggestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ConfigFile {
    pub model: String,
    pub m: f64,
    pub e2: f64,
    pub grid: GridSection,
    pub kernel: String,
    pub tol: TolSection,
    pub max: MaxSection,
    pub seed: u64,
    pub init: InitSection,
}

impl Default for ConfigFile {
    fn default() -> Self {
        Self::from(&SolveConfig::default())
    }
}

impl From<&SolveConfig> for ConfigFile {
    fn from(c: &SolveConfig) -> Self {
        Self {
            model: c.model.short_name().to_string(),
            m: c.m,
            e2: c.e2,
            grid: GridSection {
                n: c.grid.n(),
                l: c.grid.l(),
            },
            kernel: c.kernel.name().to_string(),
            tol: TolSection {
                inner: c.tol_inner,
                outer: c.tol_outer,
                residual: c.tol_residual,
            },
            max: MaxSection {
                inner: c.max_inner,
                outer: c.max_outer,
            },
            seed: c.seed,
            init: InitSection { sigma: c.init_sigma },
        }
    }
}

fn pick<T: Copy>(key: &str, value: &str, choices: &[(&str, T)]) -> Result<T, CliError> {
    if let Some((_, v)) = choices.iter().find(|(name, _)| *name == value) {
        return Ok(*v);
    }
    let names: Vec<&str> = choices.iter().map(|(n, _)| *n).collect();
    let best = names
        .iter()
        .map(|n| (strsim::levenshtein(n, value), *n))
        .min()
        .filter(|(d, _)| *d <= 3);
    let hint = match best {
        Some((_, n)) => format!("; did you mean \"{n}\"?"),
        None => String::new(),
    };
    Err(CliError::Config(format!(
        "{key}: unknown value \"{value}\" (expected one of {}){hint}",
        names.join(", ")
    )))
}

impl ConfigFile {
    pub fn to_solve_config(&self) -> Result<SolveConfig, CliError> {
        let model = pick(
            "model",
            &self.model,
            &[("md", ModelKind::MaxwellDirac), ("cd", ModelKind::CoulombDirac)],
        )?;
        let kernel = pick(
            "kernel",
            &self.kernel,
            &[("truncated", KernelVariant::Truncated), ("plain", KernelVariant::Plain)],
        )?;
        if !(self.m > 0.0 && self.m <= 1.0) {
            return Err(CliError::Config(format!("m = {} rejected: need m ∈ (0,1]", self.m)));
        }
        let grid = GridSpec::new(self.grid.n, self.grid.l).map_err(|e| CliError::Config(format!("grid: {e}")))?;
        let cfg = SolveConfig {
            model,
            m: self.m,
            e2: self.e2,
            grid,
            kernel,
            tol_inner: self.tol.inner,
            tol_outer: self.tol.outer,
            tol_residual: self.tol.residual,
            max_inner: self.max.inner,
            max_outer: self.max.outer,
            seed: self.seed,
            init_sigma: self.init.sigma,
            ..SolveConfig::default()
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

/// Parses a configuration document; errors name the offending key path.
pub fn parse_config(text: &str) -> Result<SolveConfig, CliError> {
    let de = &mut serde_json::Deserializer::from_str(text);
    let file: ConfigFile = serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        CliError::Config(format!("at `{path}`: {}", e.inner()))
    })?;
    file.to_solve_config()
}

pub fn load_config(path: &Path) -> Result<SolveConfig, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    parse_config(&text).map_err(|e| match e {
        CliError::Config(m) => CliError::Config(format!("{}: {m}", path.display())),
        other => other,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationCounts {
    pub outer: usize,
    pub inner: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckSummary {
    pub total: usize,
    pub passed: usize,
    pub failed: Vec<String>,
}

impl CheckSummary {
    pub fn of(reports: &[CheckReport]) -> Self {
        let failed: Vec<String> = reports.iter().filter(|r| !r.pass).map(|r| r.name.clone()).collect();
        Self {
            total: reports.len(),
            passed: reports.len() - failed.len(),
            failed,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileRefs {
    pub psi: String,
    pub trace: String,
    pub checks: String,
}

/// Everything needed to reproduce and audit a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: String,
    pub config: ConfigFile,
    pub model: String,
    pub m: f64,
    pub e2: f64,
    pub grid: GridSection,
    #[serde(rename = "E")]
    pub energy_big_e: f64,
    #[serde(rename = "e")]
    pub energy_e: f64,
    pub omega: f64,
    pub residual: f64,
    pub gradient_norm: f64,
    pub iterations: IterationCounts,
    pub breakdown: EnergyBreakdown,
    pub flagged: bool,
    pub wall_time_s: f64,
    pub checks: CheckSummary,
    pub files: FileRefs,
}

impl RunManifest {
    pub fn new(cfg: &SolveConfig, r: &SolveResult, checks: &[CheckReport], wall_time_s: f64) -> Self {
        let config = ConfigFile::from(cfg);
        Self {
            format_version: MANIFEST_VERSION.to_string(),
            model: config.model.clone(),
            m: cfg.m,
            e2: cfg.e2,
            grid: config.grid,
            config,
            energy_big_e: r.energy_big_e,
            energy_e: r.energy_e,
            omega: r.omega,
            residual: r.residual,
            gradient_norm: r.gradient_norm,
            iterations: IterationCounts {
                outer: r.iterations,
                inner: r.inner_iterations,
            },
            breakdown: r.breakdown,
            flagged: r.flagged,
            wall_time_s,
            checks: CheckSummary::of(checks),
            files: FileRefs {
                psi: "psi.dsol".into(),
                trace: "trace.csv".into(),
                checks: "checks.json".into(),
            },
        }
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
    }
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    fs::write(path, text + "\n").map_err(|e| io_err(path, e))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    fs::create_dir_all(path).map_err(|e| io_err(path, e))
}

fn write_trace(path: &Path, trace: &[TraceRow]) -> Result<(), CliError> {
    let mut s = String::from("iter,E,grad_norm,omega,inner_iters\n");
    for r in trace {
        s.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{}\n",
            r.iter, r.energy, r.gradient_norm, r.omega, r.inner_iters
        ));
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

/// Postconditions of a solve plus the critical-point characterization.
pub fn solve_checks(cfg: &SolveConfig, r: &SolveResult) -> Result<Vec<CheckReport>, CliError> {
    let mut checks = verify::check_solution(r, cfg, SOLVE_PROBES)?;
    let f = cfg.functional()?;
    match minimizer::check_critical_point_characterization(&f, &r.psi, &cfg.fiber_config()) {
        Ok(c) => checks.extend(c),
        Err(e) if e.is_non_convergence() => {
            checks.push(CheckReport::flag("solve.critical_point_characterization", false).with_provenance(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    }
    Ok(checks)
}

/// Writes `manifest.json`, `psi.dsol`, `trace.csv` and `checks.json`.
pub fn persist_solve(
    out: &Path,
    cfg: &SolveConfig,
    r: &SolveResult,
    checks: &[CheckReport],
    wall_time_s: f64,
) -> Result<RunManifest, CliError> {
    create_dir(out)?;
    let manifest = RunManifest::new(cfg, r, checks, wall_time_s);
    let psi_path = out.join(&manifest.files.psi);
    snapshot::save(&r.psi, &psi_path).map_err(|e| io_err(&psi_path, e))?;
    write_trace(&out.join(&manifest.files.trace), &r.trace)?;
    write_json(&out.join(&manifest.files.checks), &checks)?;
    write_json(&out.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

fn check_outcome(checks: &[CheckReport], flagged: bool) -> Result<(), CliError> {
    let summary = CheckSummary::of(checks);
    if flagged || !summary.failed.is_empty() {
        return Err(CliError::CheckFailure(format!(
            "{} of {} checks failed: {}",
            summary.failed.len(),
            summary.total,
            summary.failed.join(", ")
        )));
    }
    Ok(())
}

fn cmd_solve(config: &Path, out: &Path) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let start = Instant::now();
    let r = minimizer::minimize(&cfg)?;
    let checks = solve_checks(&cfg, &r)?;
    let manifest = persist_solve(out, &cfg, &r, &checks, start.elapsed().as_secs_f64())?;
    println!(
        "E = {:.12} e = {:.12} omega = {:.12} residual = {:.3e} outer = {} inner = {}",
        manifest.energy_big_e,
        manifest.energy_e,
        manifest.omega,
        manifest.residual,
        manifest.iterations.outer,
        manifest.iterations.inner
    );
    check_outcome(&checks, r.flagged)
}

fn mass_dir(m: f64) -> String {
    format!("m_{m}")
}

pub fn write_sweep_csv(path: &Path, sweep: &SweepResult) -> Result<(), CliError> {
    let mut s = String::from("m,e_m,E_m,omega,residual,converged\n");
    for r in &sweep.rows {
        s.push_str(&format!(
            "{},{:.17e},{:.17e},{:.17e},{:.17e},{}\n",
            r.m, r.e_m, r.big_e_m, r.omega, r.residual, r.converged
        ));
    }
    fs::write(path, s).map_err(|e| io_err(path, e))
}

fn cmd_sweep(config: &Path, masses: &[f64], out: &Path, jobs: Option<usize>) -> Result<(), CliError> {
    let cfg = load_config(config)?;
    let start = Instant::now();
    let sweep = match jobs {
        Some(0) => return Err(CliError::Config("--jobs must be positive".into())),
        Some(j) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(j)
                .build()
                .map_err(|e| CliError::Config(e.to_string()))?;
            pool.install(|| minimizer::sweep(&cfg, masses))?
        }
        None => minimizer::sweep(&cfg, masses)?,
    };
    let wall = start.elapsed().as_secs_f64();
    create_dir(out)?;
    let mut all_checks = sweep.checks.clone();
    for (row, result) in sweep.rows.iter().zip(&sweep.results) {
        if let Some(r) = result {
            let c = SolveConfig { m: row.m, ..cfg };
            let checks = solve_checks(&c, r)?;
            persist_solve(&out.join(mass_dir(row.m)), &c, r, &checks, wall)?;
            all_checks.extend(checks.into_iter().map(|x| x.with_provenance(format!("m = {}", row.m))));
        }
    }
    write_sweep_csv(&out.join("sweep.csv"), &sweep)?;
    write_json(&out.join("checks.json"), &all_checks)?;
    for r in &sweep.rows {
        println!("m = {} E = {:.12} E/m = {:.12} converged = {}", r.m, r.big_e_m, r.big_e_m / r.m, r.converged);
    }
    println!("subadditivity: {}", sweep.strictness);
    if sweep.partial {
        let failed: Vec<String> = sweep
            .rows
            .iter()
            .filter(|r| !r.converged)
            .map(|r| format!("m = {}", r.m))
            .collect();
        return Err(CliError::NonConvergence(format!("sweep partial: {}", failed.join(", "))));
    }
    check_outcome(&all_checks, false)
}

/// Solution checks on a stored field: normalization, `ω ∈ (0,1)`, both
/// residual forms, the energy window and the critical-point characterization.
pub fn field_checks(cfg: &SolveConfig, psi: &SpinorField) -> Result<Vec<CheckReport>, CliError> {
    let f = cfg.functional()?;
    f.grid().check_same(psi.grid())?;
    let psi = psi.to_position();
    let mut out = vec![CheckReport::leq("field.normalized", (psi.norm_sq() - 1.0).abs(), 0.0, 0.0, 1e-10)];
    if !out[0].pass || psi.max_abs().is_nan() {
        return Ok(out);
    }
    let omega = f.omega_estimate(&psi)?.omega;
    let e = f.energy(&psi)?.total;
    out.extend(minimizer::window_report(&f, e, omega, f.residual(&psi, omega)?, cfg.tol_residual));
    out.push(CheckReport::leq(
        "field.explicit_potential_residual",
        verify::explicit_residual(&f, &psi, omega)?,
        cfg.tol_residual,
        0.0,
        0.0,
    ));
    match minimizer::check_critical_point_characterization(&f, &psi, &cfg.fiber_config()) {
        Ok(c) => out.extend(c),
        Err(e) if e.is_non_convergence() => {
            out.push(CheckReport::flag("field.critical_point_characterization", false).with_provenance(e.to_string()))
        }
        Err(e) => return Err(e.into()),
    }
    Ok(out)
}

fn cmd_verify(
    seeds: usize,
    first_seed: u64,
    config: Option<&Path>,
    field: Option<&Path>,
    out: &Path,
) -> Result<(), CliError> {
    let cfg = match config {
        Some(p) => load_config(p)?,
        None => SolveConfig::default(),
    };
    let reports = match field {
        Some(path) => {
            let psi: SpinorField = snapshot::load(path).map_err(|e| io_err(path, e))?;
            field_checks(&cfg, &psi)?
                .into_iter()
                .map(|r| r.with_provenance(path.display().to_string()))
                .collect()
        }
        None => {
            let dirac = DiracSpectralData::new(cfg.grid);
            let kernel = InteractionKernel::new(cfg.grid, cfg.kernel);
            let per_seed: Vec<_> = (0..seeds as u64)
                .into_par_iter()
                .map(|s| verify::run_seed(&dirac, &kernel, first_seed + s))
                .collect::<Result<_, _>>()?;
            per_seed.into_iter().flatten().collect::<Vec<_>>()
        }
    };
    create_dir(out)?;
    write_json(&out.join("checks.json"), &reports)?;
    let summary = CheckSummary::of(&reports);
    println!("{} checks, {} passed", summary.total, summary.passed);
    check_outcome(&reports, false)
}

/// Rows `x, y, ρ, A₀, |J|` of the `z = 0` plane, with `A₀ = e (ρ ∗ 1/|x|)`
/// and `e = -√(m e²)`.
pub fn export_slice(cfg: &SolveConfig, psi: &SpinorField) -> Result<String, CliError> {
    cfg.grid.check_same(psi.grid())?;
    let psi = psi.to_position();
    let grid = cfg.grid;
    let kernel = InteractionKernel::new(grid, cfg.kernel);
    let rho = coulomb::density(&psi)?.real_values();
    let (a0, _) = coulomb::potentials(&psi, &kernel, electron_charge(cfg.m * cfg.e2))?;
    let a0 = a0.real_values();
    let j = coulomb::current(&psi)?;
    let n = grid.n();
    // Rows in increasing x, then y.
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by_key(|&k| grid.signed(k));
    let mut s = String::from("x,y,rho,A0,J_abs\n");
    for &ix in &order {
        for &iy in &order {
            let i = grid.index(ix, iy, 0);
            let x = grid.position(i);
            let jn = (0..3).map(|k| j.component(k)[i].re.powi(2)).sum::<f64>().sqrt();
            s.push_str(&format!("{},{},{:.17e},{:.17e},{:.17e}\n", x[0], x[1], rho[i], a0[i], jn));
        }
    }
    Ok(s)
}

fn cmd_export(input: &Path, config: Option<&Path>, out: &Path) -> Result<(), CliError> {
    let cfg_path = match config {
        Some(p) => p.to_path_buf(),
        None => input.with_file_name("manifest.json"),
    };
    let text = fs::read_to_string(&cfg_path).map_err(|e| io_err(&cfg_path, e))?;
    let value: serde_json::Value =
        serde_json::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", cfg_path.display())))?;
    // A manifest carries the configuration under `config`.
    let cfg = match value.get("format_version") {
        Some(_) => RunManifest::load(&cfg_path)?.config.to_solve_config()?,
        None => load_config(&cfg_path)?,
    };
    let psi: SpinorField = snapshot::load(input).map_err(|e| io_err(input, e))?;
    let csv = export_slice(&cfg, &psi)?;
    if let Some(parent) = out.parent().filter(|p| !p.as_os_str().is_empty()) {
        create_dir(parent)?;
    }
    fs::write(out, csv).map_err(|e| io_err(out, e))
}

type SelfCheck = (&'static str, fn() -> crate::Result<bool>);

fn random_spinor(grid: GridSpec, seed: u64) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = std::array::from_fn(|_| {
        (0..grid.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    });
    SpinorField::from_components(grid, Representation::Position, comps).expect("length matches grid")
}

fn small_free_config() -> SolveConfig {
    SolveConfig {
        e2: 0.0,
        grid: GridSpec::new(16, 16.0).expect("valid grid"),
        init_sigma: 2.0,
        ..SolveConfig::default()
    }
}

const SELF_CHECKS: &[SelfCheck] = &[
    ("transform round trip", || {
        let psi = random_spinor(GridSpec::new(8, 5.0)?, 1);
        let back = psi.to_momentum().into_position();
        Ok(back.plus_scaled(-1.0, &psi)?.norm() < 1e-12 * psi.norm())
    }),
    ("projectors sum to identity", || {
        let grid = GridSpec::new(8, 5.0)?;
        let dirac = DiracSpectralData::new(grid);
        let psi = random_spinor(grid, 2);
        let mut sum = dirac.project(&psi, Sign::Plus, ModelKind::MaxwellDirac)?;
        sum.add_scaled(1.0, &dirac.project(&psi, Sign::Minus, ModelKind::MaxwellDirac)?)?;
        Ok(sum.plus_scaled(-1.0, &psi)?.norm() < 1e-12 * psi.norm())
    }),
    ("H^1/2 norm dominates L2 norm", || {
        let psi = random_spinor(GridSpec::new(8, 5.0)?, 3);
        Ok(sobolev_norm_sq(&psi, 0.5)? >= psi.norm_sq())
    }),
    ("upper-block spinor carries no current", || {
        let grid = GridSpec::new(8, 5.0)?;
        let mut psi = random_spinor(grid, 4);
        for c in 2..4 {
            psi.components_mut()[c].fill(Complex64::new(0.0, 0.0));
        }
        Ok(coulomb::current(&psi)?.max_abs() == 0.0)
    }),
    ("Coulomb energy of a real field is nonnegative", || {
        let grid = GridSpec::new(8, 5.0)?;
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let v: Vec<f64> = (0..grid.len()).map(|_| rng.random_range(-1.0..1.0)).collect();
        let f = ScalarField::from_real(grid, &v)?;
        let k = InteractionKernel::new(grid, KernelVariant::Truncated);
        Ok(coulomb::coulomb_bilinear(&f, &f, &k)? >= 0.0)
    }),
    ("free fiber maximum sits at zero", || {
        let cfg = small_free_config();
        let f = cfg.functional()?;
        let w = minimizer::initial_direction(&f, 2.0)?;
        let r = fiber::maximize(&f, &w, &FiberConfig::default(), None)?;
        let wh = sobolev_norm_sq(&w, 0.5)?;
        Ok(r.iterations == 0 && (r.value() - wh).abs() < 1e-12 && r.properties_hold())
    }),
    ("zero-momentum direction is critical in the free case", || {
        let cfg = small_free_config();
        let f = cfg.functional()?;
        let v = TwoSpinorField::from_fn(cfg.grid, |_| [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)]);
        let w = f.dirac().embed_two_spinor(&v, f.model())?;
        let r = fiber::maximize(&f, &w, &cfg.fiber_config(), None)?;
        Ok(minimizer::direction_gradient(&f, &w, &r)?.norm() < 1e-12)
    }),
    ("free solve gives e = 1 and omega = 1", || {
        let r = minimizer::minimize(&small_free_config())?;
        Ok((r.energy_e - 1.0).abs() < 1e-10 && (r.omega - 1.0).abs() < 1e-10)
    }),
    ("free sweep gives E(m) = m", || {
        let s = minimizer::sweep(&small_free_config(), &[0.25, 0.5, 1.0])?;
        Ok(!s.partial && s.checks.iter().all(|c| c.pass))
    }),
    ("Functional rejects m outside (0,1]", || {
        Ok(Functional::new(GridSpec::new(8, 5.0)?, ModelKind::MaxwellDirac, 1.5, 0.0, KernelVariant::Truncated).is_err())
    }),
];

/// Runs the self-test, printing one line per check; returns the failures.
pub fn selftest(out: &mut impl Write) -> Vec<&'static str> {
    let mut failed = Vec::new();
    for (name, check) in SELF_CHECKS {
        let ok = matches!(check(), Ok(true));
        let _ = writeln!(out, "{} {name}", if ok { "PASS" } else { "FAIL" });
        if !ok {
            failed.push(*name);
        }
    }
    failed
}

fn cmd_selftest() -> Result<(), CliError> {
    let failed = selftest(&mut std::io::stdout());
    if failed.is_empty() {
        Ok(())
    } else {
        Err(CliError::CheckFailure(failed.join(", ")))
    }
}

/// Sizes the global worker pool from `DSOL_THREADS`, if set.
pub fn configure_threads() -> Result<(), CliError> {
    let Ok(v) = std::env::var("DSOL_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Config(format!("DSOL_THREADS must be a positive integer, got \"{v}\"")))?;
    // A second initialization in the same process keeps the first pool.
    let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    Ok(())
}

pub fn run(cli: Cli) -> Result<(), CliError> {
    configure_threads()?;
    match cli.command {
        Command::Solve { config, out } => cmd_solve(&config, &out),
        Command::Sweep {
            config,
            masses,
            out,
            jobs,
        } => cmd_sweep(&config, &masses, &out, jobs),
        Command::Verify {
            seeds,
            first_seed,
            config,
            field,
            out,
        } => cmd_verify(seeds, first_seed, config.as_deref(), field.as_deref(), &out),
        Command::Export { input, config, out } => cmd_export(&input, config.as_deref(), &out),
        Command::Selftest => cmd_selftest(),
    }
}
