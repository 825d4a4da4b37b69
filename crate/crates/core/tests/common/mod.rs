//! Reference implementations used only by tests. They share no code with the
//! library's closed forms: CDFs come from statrs' regularized gamma and
//! integrals from adaptive Simpson quadrature.

#![allow(dead_code)]

use fasuav::blercore::FblParams;
use statrs::function::gamma::gamma_lr;

/// `P(m, x)` via statrs.
pub fn gamma_cdf(m: u32, x: f64) -> f64 {
    if x <= 0.0 {
        0.0
    } else {
        gamma_lr(f64::from(m), x)
    }
}

pub fn hop1_cdf(x: f64, vartheta: f64, m: u32) -> f64 {
    gamma_cdf(m, vartheta * x)
}

pub fn hop2_cdf(x: f64, vartheta: f64, m: u32, lambdas: &[f64]) -> f64 {
    lambdas.iter().map(|&l| gamma_cdf(m, vartheta * x / l)).product()
}

#[allow(clippy::too_many_arguments)]
fn simpson_step<F: Fn(f64) -> f64>(f: &F, a: f64, fa: f64, b: f64, fb: f64, m: f64, fm: f64, whole: f64, tol: f64, depth: u32) -> f64 {
    let lm = 0.5 * (a + m);
    let rm = 0.5 * (m + b);
    let flm = f(lm);
    let frm = f(rm);
    let left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
    let right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
    let delta = left + right - whole;
    if depth == 0 || delta.abs() <= 15.0 * tol {
        return left + right + delta / 15.0;
    }
    simpson_step(f, a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
        + simpson_step(f, m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1)
}

/// Adaptive Simpson with absolute tolerance `tol`.
pub fn simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, tol: f64) -> f64 {
    let fa = f(a);
    let fb = f(b);
    let m = 0.5 * (a + b);
    let fm = f(m);
    let whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
    simpson_step(&f, a, fa, b, fb, m, fm, whole, tol, 30)
}

pub fn composite_simpson<F: Fn(f64) -> f64>(f: F, a: f64, b: f64, panels: usize) -> f64 {
    let h = (b - a) / (2 * panels) as f64;
    let mut sum = f(a) + f(b);
    for i in 1..2 * panels {
        sum += f(a + i as f64 * h) * if i % 2 == 1 { 4.0 } else { 2.0 };
    }
    sum * h / 3.0
}

/// `χ ∫_{ρL}^{ρH} F`, refined until the relative change is below `rel`.
pub fn window_average<F: Fn(f64) -> f64>(p: &FblParams, cdf: F, rel: f64) -> f64 {
    let scale = composite_simpson(&cdf, p.rho_l, p.rho_h, 64).abs().max(1e-300);
    p.chi * simpson(&cdf, p.rho_l, p.rho_h, rel * scale)
}

pub fn hop1_oracle(p: &FblParams, vartheta: f64, m: u32) -> f64 {
    window_average(p, |x| hop1_cdf(x, vartheta, m), 1e-11)
}

pub fn hop2_oracle(p: &FblParams, vartheta: f64, m: u32, lambdas: &[f64]) -> f64 {
    window_average(p, |x| hop2_cdf(x, vartheta, m, lambdas), 1e-11)
}

/// Symmetric Jakes matrix eigenvalues via nalgebra, descending.
pub fn jakes_eigenvalues(n: usize, aperture: f64) -> Vec<f64> {
    let j0 = |x: f64| libm_free_j0(x);
    let m = nalgebra::DMatrix::from_fn(n, n, |i, k| {
        if n == 1 {
            1.0
        } else {
            let d = (i as f64 - k as f64) * aperture / (n - 1) as f64;
            j0(2.0 * std::f64::consts::PI * d)
        }
    });
    let mut ev: Vec<f64> = m.symmetric_eigen().eigenvalues.iter().copied().collect();
    ev.sort_by(|a, b| b.total_cmp(a));
    ev
}

/// `J0` by its integral representation `(1/π) ∫_0^π cos(x sin t) dt`.
pub fn libm_free_j0(x: f64) -> f64 {
    simpson(|t| (x * t.sin()).cos(), 0.0, std::f64::consts::PI, 1e-15) / std::f64::consts::PI
}

/// Deterministic xorshift stream for test-side parameter draws.
pub struct TestRng(u64);

impl TestRng {
    pub fn new(seed: u64) -> Self {
        TestRng(seed.max(1))
    }

    pub fn uniform(&mut self) -> f64 {
        self.0 ^= self.0 << 13;
        self.0 ^= self.0 >> 7;
        self.0 ^= self.0 << 17;
        (self.0 >> 11) as f64 / (1u64 << 53) as f64
    }
}
