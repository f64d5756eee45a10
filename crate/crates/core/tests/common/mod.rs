//! Independent reference computations shared by the integration tests.
//! Nothing here calls into the solver's transforms or kernels.

#![allow(dead_code)]

use std::f64::consts::PI;

use dsol::coulomb::KernelVariant;
use dsol::spectral::{GridSpec, Representation, SpinorField};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// White-noise spinor with components uniform in the unit square.
pub fn random_spinor(grid: GridSpec, seed: u64) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let comps = std::array::from_fn(|_| {
        (0..grid.len())
            .map(|_| Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    });
    SpinorField::from_components(grid, Representation::Position, comps).unwrap()
}

/// Smooth spinor: Gaussian envelope of width `sigma` times random complex
/// affine polynomials, unit L² norm.
pub fn smooth_spinor(grid: GridSpec, sigma: f64, seed: u64) -> SpinorField {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let coef: [[f64; 8]; 4] = std::array::from_fn(|_| std::array::from_fn(|_| rng.random_range(-1.0..1.0)));
    let f = SpinorField::from_fn(grid, |x| {
        let env = (-(x[0] * x[0] + x[1] * x[1] + x[2] * x[2]) / (4.0 * sigma * sigma)).exp();
        std::array::from_fn(|c| {
            let a = &coef[c];
            let t = 1.0 / sigma;
            Complex64::new(
                a[0] + t * (a[1] * x[0] + a[2] * x[1] + a[3] * x[2]),
                a[4] + t * (a[5] * x[0] + a[6] * x[1] + a[7] * x[2]),
            ) * env
        })
    });
    f.scaled(1.0 / f.norm())
}

pub fn diff_norm(a: &SpinorField, b: &SpinorField) -> f64 {
    a.plus_scaled(-1.0, b).unwrap().norm()
}

/// Fourier symbol of the (possibly truncated) Coulomb kernel at `|p|²`.
pub fn kernel_symbol(variant: KernelVariant, p2: f64, l: f64) -> f64 {
    let r = l / 2.0;
    match variant {
        KernelVariant::Plain if p2 == 0.0 => 0.0,
        KernelVariant::Plain => 4.0 * PI / p2,
        KernelVariant::Truncated if p2 == 0.0 => 2.0 * PI * r * r,
        KernelVariant::Truncated => 4.0 * PI * (1.0 - (r * p2.sqrt()).cos()) / p2,
    }
}

/// Position-space periodic kernel `G(d) = l⁻³ Σ_p K(p) cos(p·d)` at every
/// lattice displacement, by direct summation.
fn position_kernel(n: usize, l: f64, variant: KernelVariant) -> Vec<f64> {
    let signed = |j: usize| if j < n / 2 { j as f64 } else { j as f64 - n as f64 };
    let dp = 2.0 * PI / l;
    let h = l / n as f64;
    let mut modes = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let p = [signed(a) * dp, signed(b) * dp, signed(c) * dp];
                let p2 = p[0] * p[0] + p[1] * p[1] + p[2] * p[2];
                modes.push((p, kernel_symbol(variant, p2, l)));
            }
        }
    }
    let mut g = Vec::with_capacity(n * n * n);
    for a in 0..n {
        for b in 0..n {
            for c in 0..n {
                let d = [a as f64 * h, b as f64 * h, c as f64 * h];
                let s: f64 = modes
                    .iter()
                    .map(|(p, k)| k * (p[0] * d[0] + p[1] * d[1] + p[2] * d[2]).cos())
                    .sum();
                g.push(s / (l * l * l));
            }
        }
    }
    g
}

/// `h⁶ Σ_{i,j} f_i g_j G(x_i - x_j)`: the O(n⁶) pairwise double sum.
pub fn brute_force_bilinear(n: usize, l: f64, variant: KernelVariant, f: &[f64], g: &[f64]) -> f64 {
    let kern = position_kernel(n, l, variant);
    let h = l / n as f64;
    let idx = |i: usize| [i / (n * n), (i / n) % n, i % n];
    let mut s = 0.0;
    for i in 0..n * n * n {
        let a = idx(i);
        for j in 0..n * n * n {
            let b = idx(j);
            let d = ((a[0] + n - b[0]) % n) * n * n + ((a[1] + n - b[1]) % n) * n + (a[2] + n - b[2]) % n;
            s += f[i] * g[j] * kern[d];
        }
    }
    s * h.powi(6)
}

/// `(ρ, J)` of a position-space spinor from the explicit Dirac matrices.
pub fn density_and_current(psi: &SpinorField) -> (Vec<f64>, [Vec<f64>; 3]) {
    let len = psi.grid().len();
    let mut rho = vec![0.0; len];
    let mut j: [Vec<f64>; 3] = std::array::from_fn(|_| vec![0.0; len]);
    let alphas = [dsol::dirac::alpha(0), dsol::dirac::alpha(1), dsol::dirac::alpha(2)];
    for i in 0..len {
        let v = psi.at(i);
        rho[i] = v.iter().map(|z| z.norm_sqr()).sum();
        for k in 0..3 {
            let av = dsol::dirac::mat_vec(&alphas[k], &v);
            j[k][i] = v.iter().zip(av.iter()).map(|(a, b)| (a.conj() * b).re).sum();
        }
    }
    (rho, j)
}

/// Simpson's rule on `[a, b]` with `n` (even) intervals.
pub fn simpson(f: impl Fn(f64) -> f64, a: f64, b: f64, n: usize) -> f64 {
    let h = (b - a) / n as f64;
    let mut s = f(a) + f(b);
    for k in 1..n {
        let w = if k % 2 == 1 { 4.0 } else { 2.0 };
        s += w * f(a + k as f64 * h);
    }
    s * h / 3.0
}

/// `B(ρ,ρ)` of a radial density by nested radial quadrature of the shell
/// theorem potential `U(r) = r⁻¹∫₀ʳ 4πs²ρ + ∫ᵣ^∞ 4πsρ`.
pub fn radial_self_energy(rho: impl Fn(f64) -> f64 + Copy, rmax: f64, n: usize) -> f64 {
    let h = rmax / n as f64;
    let r: Vec<f64> = (0..=n).map(|k| k as f64 * h).collect();
    // Cumulative trapezoid integrals on a fine grid.
    let mut inner = vec![0.0; n + 1];
    for k in 0..n {
        let f = |s: f64| 4.0 * PI * s * s * rho(s);
        inner[k + 1] = inner[k] + 0.5 * h * (f(r[k]) + f(r[k + 1]));
    }
    let mut outer = vec![0.0; n + 1];
    for k in (0..n).rev() {
        let f = |s: f64| 4.0 * PI * s * rho(s);
        outer[k] = outer[k + 1] + 0.5 * h * (f(r[k]) + f(r[k + 1]));
    }
    let u = |k: usize| if k == 0 { outer[0] } else { inner[k] / r[k] + outer[k] };
    let mut b = 0.0;
    for k in 0..n {
        let g = |k: usize| 4.0 * PI * r[k] * r[k] * rho(r[k]) * u(k);
        b += 0.5 * h * (g(k) + g(k + 1));
    }
    b
}

/// Result of the radial Choquard shooting.
#[derive(Debug, Clone, Copy)]
pub struct ChoquardState {
    /// Shooting parameter `W(0)` at the ground state.
    pub w0: f64,
    pub mass: f64,
    pub gradient_sq: f64,
    pub self_energy: f64,
    /// Where the integrated profile was cut off.
    pub r_cut: f64,
}

impl ChoquardState {
    /// `sup B(ρ_u,ρ_u)² / (2‖∇u‖²)` over unit `u`, the weak-coupling binding
    /// constant: `inf ½‖∇u‖² - e² B(ρ_u,ρ_u) = -C e⁴`.
    pub fn binding_constant(&self) -> f64 {
        self.self_energy.powi(2) / (2.0 * self.mass.powi(3) * self.gradient_sq)
    }
}

fn choquard_rhs(r: f64, y: [f64; 4]) -> [f64; 4] {
    let [p, dp, w, dw] = y;
    [dp, -2.0 / r * dp - w * p, dw, -2.0 / r * dw - p * p]
}

/// Integrates `φ'' + 2φ'/r = -Wφ`, `W'' + 2W'/r = -φ²`, `φ(0) = 1`,
/// `W(0) = w0` with RK4. Returns +1 if `φ` crosses zero, -1 if it turns
/// upward, 0 if neither happens before `rmax`, and the trajectory if asked.
fn choquard_shoot(w0: f64, h: f64, rmax: f64, keep: bool) -> (i32, Vec<(f64, [f64; 4])>) {
    let mut r = 1e-4;
    let mut y = [1.0 - w0 * r * r / 6.0, -w0 * r / 3.0, w0 - r * r / 6.0, -r / 3.0];
    let mut traj = vec![(r, y)];
    let add = |y: [f64; 4], k: [f64; 4], s: f64| std::array::from_fn(|i| y[i] + s * k[i]);
    while r < rmax {
        let k1 = choquard_rhs(r, y);
        let k2 = choquard_rhs(r + h / 2.0, add(y, k1, h / 2.0));
        let k3 = choquard_rhs(r + h / 2.0, add(y, k2, h / 2.0));
        let k4 = choquard_rhs(r + h, add(y, k3, h));
        y = std::array::from_fn(|i| y[i] + h / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]));
        r += h;
        if keep {
            traj.push((r, y));
        }
        if y[0] < 0.0 {
            return (1, traj);
        }
        if y[1] > 0.0 {
            return (-1, traj);
        }
    }
    (0, traj)
}

/// Positive radial ground state of the Choquard equation by bisection on
/// the central potential, with mass, kinetic and Coulomb integrals of the
/// profile up to the point where shooting loses it.
pub fn choquard_ground_state() -> ChoquardState {
    let (h, rmax) = (2e-3, 40.0);
    let (mut lo, mut hi) = (0.0, 10.0);
    for _ in 0..60 {
        let mid = 0.5 * (lo + hi);
        if choquard_shoot(mid, h, rmax, false).0 > 0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    let (_, mut traj) = choquard_shoot(lo, h, rmax, true);
    let cut = (0..traj.len())
        .min_by(|&a, &b| traj[a].1[0].total_cmp(&traj[b].1[0]))
        .unwrap();
    traj.truncate(cut + 1);
    let r: Vec<f64> = traj.iter().map(|t| t.0).collect();
    let phi: Vec<f64> = traj.iter().map(|t| t.1[0]).collect();
    let dphi: Vec<f64> = traj.iter().map(|t| t.1[1]).collect();
    let trap = |f: &dyn Fn(usize) -> f64| (0..r.len() - 1).map(|i| 0.5 * (r[i + 1] - r[i]) * (f(i) + f(i + 1))).sum::<f64>();
    let shell = |i: usize| 4.0 * PI * r[i] * r[i];
    let mass = trap(&|i| shell(i) * phi[i] * phi[i]);
    let gradient_sq = trap(&|i| shell(i) * dphi[i] * dphi[i]);
    let m = r.len();
    let mut inner = vec![0.0; m];
    for i in 0..m - 1 {
        inner[i + 1] = inner[i] + 0.5 * (r[i + 1] - r[i]) * (shell(i) * phi[i].powi(2) + shell(i + 1) * phi[i + 1].powi(2));
    }
    let mut outer = vec![0.0; m];
    for i in (0..m - 1).rev() {
        let g = |k: usize| 4.0 * PI * r[k] * phi[k] * phi[k];
        outer[i] = outer[i + 1] + 0.5 * (r[i + 1] - r[i]) * (g(i) + g(i + 1));
    }
    let self_energy = trap(&|i| shell(i) * phi[i] * phi[i] * (inner[i] / r[i] + outer[i]));
    ChoquardState {
        w0: lo,
        mass,
        gradient_sq,
        self_energy,
        r_cut: r[m - 1],
    }
}

/// Gaussian density with per-axis standard deviation `sigma`, unit mass.
pub fn gaussian_density(r: f64, sigma: f64) -> f64 {
    (2.0 * PI * sigma * sigma).powf(-1.5) * (-r * r / (2.0 * sigma * sigma)).exp()
}
