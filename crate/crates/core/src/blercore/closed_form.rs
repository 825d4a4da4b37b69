//! Closed-form averages `χ ∫_{ρL}^{ρH} F(x) dx` for the two hops.
//!
//! The printed expansions alternate in sign and lose every significant digit
//! once `F` is small on the window. Each evaluation therefore tracks the sum
//! of absolute term magnitudes and, when the result falls far below it,
//! switches to a positive-term series of the same integral.

use crate::error::{Error, Result};
use crate::quadrature::integrate;
use crate::special::{gamma_p_int, gamma_q_int, ln_fact, unit_moments};

use super::FblParams;

/// Largest branch count expanded over all subsets.
pub const SUBSET_CAP: usize = 15;

/// A literal expansion is accepted when `|value| >= CANCELLATION_RATIO * Σ|terms|`.
const CANCELLATION_RATIO: f64 = 1e-5;

const QUADRATURE_REL_TOL: f64 = 1e-10;
const QUADRATURE_MAX_INTERVALS: usize = 400;

/// Relative cutoff for the truncated positive series.
const SERIES_EPS: f64 = 1e-17;

/// Branches whose complementary CDF stays below this on a piece are dropped.
const PRUNE_EPS: f64 = 1e-18;

/// How a hop average was evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Route {
    /// Sign-alternating finite expansion.
    Literal,
    /// Piecewise positive-term series.
    PositiveSeries,
    /// Adaptive Gauss–Kronrod on the CDF.
    Quadrature,
}

/// Antiderivative of `x^a e^{-bx}`: `−e^{−bx} Σ_{j=0}^{a} (a!/j!) x^j / b^{a−j+1}`.
///
/// Terms are formed in log space and summed from the smallest magnitude up;
/// when `e^{−bx}` underflows the limit value 0 is returned.
pub fn g_antiderivative(x: f64, a: u32, b: f64) -> f64 {
    if b * x > 745.0 {
        return 0.0;
    }
    let lb = b.ln();
    let lx = x.ln();
    let la = ln_fact(a);
    let mut terms: Vec<f64> = (0..=a)
        .filter(|&j| j == 0 || x > 0.0)
        .map(|j| {
            let pow = if j == 0 { 0.0 } else { f64::from(j) * lx };
            (-b * x + la - ln_fact(j) + pow - f64::from(a - j + 1) * lb).exp()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    -terms.iter().sum::<f64>()
}

fn check_vartheta(vartheta: f64) -> Result<()> {
    if !(vartheta > 0.0) {
        return Err(Error::domain(format!("rate parameter must be positive, got {vartheta}")));
    }
    Ok(())
}

fn poly_mul(a: &[f64], b: &[f64]) -> Vec<f64> {
    let mut out = vec![0.0; a.len() + b.len() - 1];
    for (i, &x) in a.iter().enumerate() {
        if x == 0.0 {
            continue;
        }
        for (j, &y) in b.iter().enumerate() {
            out[i + j] += x * y;
        }
    }
    out
}

/// `e^{−y} Σ_{l≤j} y^l/l!` for `j = 0..m`.
fn poisson_partial_sums(y: f64, m: u32) -> Vec<f64> {
    let mut out = Vec::with_capacity(m as usize);
    let mut acc = 0.0;
    for l in 0..m {
        let term = if l == 0 {
            (-y).exp()
        } else if y == 0.0 {
            0.0
        } else {
            (-y + f64::from(l) * y.ln() - ln_fact(l)).exp()
        };
        acc += term;
        out.push(acc);
    }
    out
}

/// Printed first-hop expansion; returns `(value, Σ|terms|)`.
fn hop1_literal(p: &FblParams, vartheta: f64, m: u32) -> (f64, f64) {
    let lo = poisson_partial_sums(p.rho_l * vartheta, m);
    let hi = poisson_partial_sums(p.rho_h * vartheta, m);
    let diff: f64 = lo.iter().zip(&hi).map(|(a, b)| a - b).sum();
    let mag: f64 = lo.iter().chain(&hi).sum();
    let width = p.rho_h - p.rho_l;
    (
        p.chi * (width - diff / vartheta),
        p.chi * (width + mag / vartheta),
    )
}

/// First-hop average BLER with Nakagami factor `m`.
pub fn avg_bler_hop1(p: &FblParams, vartheta: f64, m: u32) -> Result<f64> {
    check_vartheta(vartheta)?;
    if m == 0 {
        return Err(Error::domain("Nakagami factor must be >= 1"));
    }
    Ok(hop1_dispatch(p, vartheta, m).0)
}

pub(crate) fn hop1_dispatch(p: &FblParams, vartheta: f64, m: u32) -> (f64, Route) {
    if vartheta.is_infinite() {
        return (p.chi * (p.rho_h - p.rho_l), Route::Literal);
    }
    let (v, mag) = hop1_literal(p, vartheta, m);
    if v.is_finite() && v >= CANCELLATION_RATIO * mag {
        return (v.clamp(0.0, 1.0), Route::Literal);
    }
    let s = p.chi * positive_series(p.rho_l, p.rho_h, m, &[vartheta]);
    (s.clamp(0.0, 1.0), Route::PositiveSeries)
}

/// First-hop average evaluated by a prescribed route, without guards.
pub fn avg_bler_hop1_via(p: &FblParams, vartheta: f64, m: u32, route: Route) -> f64 {
    match route {
        Route::Literal => hop1_literal(p, vartheta, m).0,
        Route::PositiveSeries => p.chi * positive_series(p.rho_l, p.rho_h, m, &[vartheta]),
        Route::Quadrature => avg_bler_quadrature(p, vartheta, m, &[1.0]),
    }
}

/// `χ ∫ Π_n P(m, xϑ/λ_n) dx` by adaptive Gauss–Kronrod.
pub fn avg_bler_quadrature(p: &FblParams, vartheta: f64, m: u32, lambdas: &[f64]) -> f64 {
    let b: Vec<f64> = lambdas.iter().map(|&l| vartheta / l).collect();
    let f = |x: f64| b.iter().map(|&bn| gamma_p_int(m, bn * x)).product::<f64>();
    let r = integrate(f, p.rho_l, p.rho_h, QUADRATURE_REL_TOL, 0.0, QUADRATURE_MAX_INTERVALS);
    p.chi * r.value
}

/// Per-subset data of the second-hop expansion with `ϑ` factored out:
/// `b_S = ϑ s_S` and `c_a(S) = ϑ^a c̃_a(S)`.
#[derive(Debug, Clone)]
struct SubsetTable {
    inv_sum: Vec<f64>,
    odd: Vec<bool>,
    offsets: Vec<usize>,
    coeffs: Vec<f64>,
}

impl SubsetTable {
    fn new(m: u32, lambdas: &[f64]) -> Self {
        let n = lambdas.len();
        let count = 1usize << n;
        let branch: Vec<Vec<f64>> = lambdas
            .iter()
            .map(|&l| {
                let mut c = Vec::with_capacity(m as usize);
                let mut t = 1.0;
                for j in 0..m {
                    if j > 0 {
                        t *= 1.0 / (l * f64::from(j));
                    }
                    c.push(t);
                }
                c
            })
            .collect();
        let mut inv_sum = vec![0.0; count];
        let mut odd = vec![false; count];
        let mut offsets = vec![0usize; count + 1];
        let mut coeffs: Vec<f64> = vec![1.0];
        offsets[1] = 1;
        for mask in 1..count {
            let low = mask.trailing_zeros() as usize;
            let rest = mask & (mask - 1);
            inv_sum[mask] = inv_sum[rest] + 1.0 / lambdas[low];
            odd[mask] = !odd[rest];
            let prev = coeffs[offsets[rest]..offsets[rest + 1]].to_vec();
            coeffs.extend(poly_mul(&prev, &branch[low]));
            offsets[mask + 1] = coeffs.len();
        }
        SubsetTable {
            inv_sum,
            odd,
            offsets,
            coeffs,
        }
    }
}

/// `ϑ^a G(x; a, ϑs)` for `a = 0..len`, by the same-sign recurrence
/// `G_a = −x^a e^{−bx}/b + (a/b) G_{a−1}`.
fn scaled_g(x: f64, vartheta: f64, s: f64, out: &mut [f64]) {
    let b = vartheta * s;
    let y = vartheta * x;
    let mut head = (-b * x).exp() / b;
    let mut g = -head;
    out[0] = g;
    for (a, o) in out.iter_mut().enumerate().skip(1) {
        head *= y;
        g = -head + a as f64 / s * g;
        *o = g;
    }
}

/// Precomputed second-hop expansion for one Nakagami factor and spectrum.
#[derive(Debug, Clone)]
pub struct Hop2Kernel {
    m: u32,
    lambdas: Vec<f64>,
    table: Option<SubsetTable>,
}

impl Hop2Kernel {
    pub fn new(m: u32, lambdas: &[f64]) -> Result<Self> {
        if m == 0 {
            return Err(Error::domain("Nakagami factor must be >= 1"));
        }
        if lambdas.is_empty() {
            return Err(Error::domain("no eigenvalue branches"));
        }
        if lambdas.iter().any(|&l| !(l > 0.0 && l.is_finite())) {
            return Err(Error::domain("eigenvalue branches must be positive"));
        }
        let table = (lambdas.len() <= SUBSET_CAP).then(|| SubsetTable::new(m, lambdas));
        Ok(Hop2Kernel {
            m,
            lambdas: lambdas.to_vec(),
            table,
        })
    }

    pub fn m(&self) -> u32 {
        self.m
    }

    pub fn lambdas(&self) -> &[f64] {
        &self.lambdas
    }

    pub fn evaluate(&self, p: &FblParams, vartheta: f64) -> f64 {
        self.evaluate_with_route(p, vartheta).0
    }

    pub fn evaluate_with_route(&self, p: &FblParams, vartheta: f64) -> (f64, Route) {
        if vartheta.is_infinite() {
            return (p.chi * (p.rho_h - p.rho_l), Route::Literal);
        }
        if self.table.is_none() {
            let q = avg_bler_quadrature(p, vartheta, self.m, &self.lambdas);
            return (q.clamp(0.0, 1.0), Route::Quadrature);
        }
        let (v, mag) = self.literal(p, vartheta);
        if v.is_finite() && v >= CANCELLATION_RATIO * mag {
            return (v.clamp(0.0, 1.0), Route::Literal);
        }
        let b: Vec<f64> = self.lambdas.iter().map(|&l| vartheta / l).collect();
        let s = p.chi * positive_series(p.rho_l, p.rho_h, self.m, &b);
        (s.clamp(0.0, 1.0), Route::PositiveSeries)
    }

    /// Evaluation by a prescribed route, without guards or clamping.
    pub fn evaluate_via(&self, p: &FblParams, vartheta: f64, route: Route) -> f64 {
        match route {
            Route::Literal => self.literal(p, vartheta).0,
            Route::PositiveSeries => {
                let b: Vec<f64> = self.lambdas.iter().map(|&l| vartheta / l).collect();
                p.chi * positive_series(p.rho_l, p.rho_h, self.m, &b)
            }
            Route::Quadrature => avg_bler_quadrature(p, vartheta, self.m, &self.lambdas),
        }
    }

    /// Subset expansion; returns `(value, Σ|terms|)`. Falls back to NaN when
    /// the branch count exceeds [`SUBSET_CAP`].
    fn literal(&self, p: &FblParams, vartheta: f64) -> (f64, f64) {
        let Some(t) = &self.table else {
            return (f64::NAN, f64::NAN);
        };
        let width = p.rho_h - p.rho_l;
        let mut total = 0.0;
        let mut mag = 0.0;
        let max_len = (self.m as usize - 1) * self.lambdas.len() + 1;
        let mut g_hi = vec![0.0; max_len];
        let mut g_lo = vec![0.0; max_len];
        for mask in 1..t.inv_sum.len() {
            let s = t.inv_sum[mask];
            if vartheta * s * p.rho_l > 745.0 {
                continue;
            }
            let c = &t.coeffs[t.offsets[mask]..t.offsets[mask + 1]];
            scaled_g(p.rho_h, vartheta, s, &mut g_hi[..c.len()]);
            scaled_g(p.rho_l, vartheta, s, &mut g_lo[..c.len()]);
            let mut term = 0.0;
            for (a, &ca) in c.iter().enumerate() {
                term += ca * (g_hi[a] - g_lo[a]);
                mag += ca * (g_hi[a].abs() + g_lo[a].abs());
            }
            total += if t.odd[mask] { -term } else { term };
        }
        (p.chi * (width + total), p.chi * (width + mag))
    }
}

/// Second-hop average BLER over the branches `lambdas`.
pub fn avg_bler_hop2(p: &FblParams, vartheta: f64, m: u32, lambdas: &[f64]) -> Result<f64> {
    check_vartheta(vartheta)?;
    Ok(Hop2Kernel::new(m, lambdas)?.evaluate(p, vartheta))
}

/// High-SNR approximation with diversity order `m · |lambdas|`, in log space.
pub fn avg_bler_hop2_asymptotic(p: &FblParams, vartheta: f64, m: u32, lambdas: &[f64]) -> Result<f64> {
    check_vartheta(vartheta)?;
    if lambdas.is_empty() || m == 0 {
        return Err(Error::domain("need m >= 1 and at least one branch"));
    }
    let n = lambdas.len() as f64;
    let mf = f64::from(m);
    let d1 = mf * n + 1.0;
    let window = if p.rho_l > 0.0 {
        d1 * p.rho_h.ln() + (-(p.rho_l / p.rho_h).powf(d1)).ln_1p()
    } else {
        d1 * p.rho_h.ln()
    };
    let log_lambda: f64 = lambdas.iter().map(|l| l.ln()).sum();
    let ln_val = p.chi.ln() + window - d1.ln() + n * (mf * vartheta.ln() - ln_fact(m)) - mf * log_lambda;
    Ok(ln_val.exp())
}

/// `∫_u^v Π_n P(m, b_n x) dx` using only same-sign terms.
///
/// The window is cut where `b_n x = T`. On each piece, a branch with
/// `b_n x <= T` uses `P(m, y) = e^{−y} y^m/m! Σ_j y^j m!/(m+j)!`, and a branch
/// with `b_n x >= T` uses `1 − Q(m, y)` expanded over subsets, where every
/// `Q` term is at most `Q(m, T)` and the alternation is harmless.
pub(crate) fn positive_series(u: f64, v: f64, m: u32, b: &[f64]) -> f64 {
    let threshold = 2.0 * f64::from(m) + 20.0;
    let mut cuts = vec![u, v];
    cuts.extend(b.iter().map(|&bn| threshold / bn).filter(|&x| x > u && x < v));
    cuts.sort_by(f64::total_cmp);
    cuts.dedup();
    let lmf = ln_fact(m);
    let mut total = 0.0;
    let mut moments = Vec::new();
    let mut upper = Vec::new();
    let mut q_polys = Vec::new();
    for w in cuts.windows(2) {
        let (s, t) = (w[0], w[1]);
        if t <= s {
            continue;
        }
        let mid = 0.5 * (s + t);
        let mut log_pref = 0.0;
        let mut beta = 0.0;
        let mut power = 0u32;
        let mut poly = vec![1.0];
        upper.clear();
        for &bn in b {
            if bn * mid <= threshold {
                log_pref += f64::from(m) * bn.ln() - lmf;
                beta += bn;
                power += m;
                poly = poly_mul(&poly, &lower_series_coeffs(m, bn * t));
            } else if gamma_q_int(m, bn * s) >= PRUNE_EPS {
                upper.push(bn);
            }
        }
        // x = t·y maps the piece onto [s/t, 1].
        let log_pref = log_pref + f64::from(power + 1) * t.ln();
        let sigma = s / t;
        q_polys.clear();
        q_polys.extend(upper.iter().map(|&bn| upper_head_coeffs(m, bn * t)));
        for mask in 0..(1usize << upper.len()) {
            let mut beta_s = beta;
            let mut coeffs = poly.clone();
            for (i, q) in q_polys.iter().enumerate() {
                if mask & (1 << i) != 0 {
                    coeffs = poly_mul(&coeffs, q);
                    beta_s += upper[i];
                }
            }
            moments.clear();
            unit_moments(power, coeffs.len(), beta_s * t, sigma, &mut moments);
            let sum: f64 = coeffs.iter().zip(&moments).map(|(c, j)| c * j).sum();
            if sum <= 0.0 {
                continue;
            }
            let piece = (log_pref + sum.ln()).exp();
            if mask.count_ones() % 2 == 1 {
                total -= piece;
            } else {
                total += piece;
            }
        }
    }
    total
}

/// `(y)^j m!/(m+j)!` for the truncated series of `e^{y} P(m, y) m!/y^m`, with
/// `y = b t` so coefficients multiply `(x/t)^j`.
fn lower_series_coeffs(m: u32, y: f64) -> Vec<f64> {
    let mut out = vec![1.0];
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut j = 1.0;
    loop {
        term *= y / (f64::from(m) + j);
        if term < SERIES_EPS * sum {
            break;
        }
        sum += term;
        out.push(term);
        j += 1.0;
    }
    out
}

/// `y^j / j!` for `j < m`, the polynomial factor of `Q(m, ·)`.
fn upper_head_coeffs(m: u32, y: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(m as usize);
    let mut term = 1.0;
    for j in 0..m {
        if j > 0 {
            term *= y / f64::from(j);
        }
        out.push(term);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::super::{ChiVariant, FblParams};
    use super::*;
    use approx::assert_relative_eq;

    fn table1() -> FblParams {
        FblParams::new(80.0, 100, ChiVariant::RateGap).unwrap()
    }

    #[test]
    fn antiderivative_matches_recurrence_and_derivative() {
        for &(a, b, x) in &[(0u32, 2.0, 0.7), (3, 0.5, 1.2), (6, 4.0, 0.3), (2, 1.0, 0.0)] {
            let mut out = vec![0.0; a as usize + 1];
            scaled_g(x, 1.0, b, &mut out);
            assert_relative_eq!(g_antiderivative(x, a, b), out[a as usize], max_relative = 1e-13);
            if x > 0.0 {
                let h = 1e-5;
                let d = (g_antiderivative(x + h, a, b) - g_antiderivative(x - h, a, b)) / (2.0 * h);
                assert_relative_eq!(d, x.powi(a as i32) * (-b * x).exp(), max_relative = 1e-8);
            }
        }
        assert_eq!(g_antiderivative(1.0, 4, 800.0), 0.0);
    }

    #[test]
    fn hop1_examples() {
        let p = table1();
        assert!((avg_bler_hop1(&p, 1.0, 1).unwrap() - 0.522_485_942_974).abs() < 1e-11);
        assert!(avg_bler_hop1(&p, 1e-9, 3).unwrap() < 1e-20);
        assert_relative_eq!(avg_bler_hop1(&p, 1e6, 2).unwrap(), 1.0, max_relative = 1e-12);
        assert!(avg_bler_hop1(&p, 0.0, 1).is_err());
    }

    #[test]
    fn hop2_examples() {
        let p = table1();
        assert!((avg_bler_hop2(&p, 1.0, 1, &[1.0, 1.0]).unwrap() - 0.273_875_681_416).abs() < 1e-11);
        assert_relative_eq!(
            avg_bler_hop2(&p, 0.37, 1, &[1.0]).unwrap(),
            avg_bler_hop1(&p, 0.37, 1).unwrap(),
            max_relative = 1e-13
        );
        assert_relative_eq!(avg_bler_hop2(&p, 1e7, 2, &[1.3, 0.7]).unwrap(), 1.0, max_relative = 1e-12);
    }

    #[test]
    fn asymptotic_examples() {
        let p = table1();
        let a = avg_bler_hop2_asymptotic(&p, 0.01, 1, &[1.0]).unwrap();
        assert_relative_eq!(a, p.tau * 0.01, max_relative = 1e-12);
        assert!((a - 0.007_411_0).abs() < 1e-7);
    }

    #[test]
    fn routes_agree_where_all_are_valid() {
        let p = table1();
        for &m in &[1u32, 2, 5] {
            let k = Hop2Kernel::new(m, &[1.4, 0.9, 0.5]).unwrap();
            for &th in &[0.02, 0.3, 2.0, 10.0] {
                let q = k.evaluate_via(&p, th, Route::Quadrature);
                let s = k.evaluate_via(&p, th, Route::PositiveSeries);
                assert_relative_eq!(s, q, max_relative = 1e-10);
                let (l, mag) = k.literal(&p, th);
                if l > 1e-3 * mag {
                    assert_relative_eq!(l, q, max_relative = 1e-10);
                }
            }
        }
    }

    #[test]
    fn series_route_holds_at_extreme_snr() {
        let p = table1();
        let k = Hop2Kernel::new(5, &[1.2, 0.8]).unwrap();
        let (v, route) = k.evaluate_with_route(&p, 1e-4);
        assert_eq!(route, Route::PositiveSeries);
        let q = k.evaluate_via(&p, 1e-4, Route::Quadrature);
        assert_relative_eq!(v, q, max_relative = 1e-10);
        let asym = avg_bler_hop2_asymptotic(&p, 1e-4, 5, &[1.2, 0.8]).unwrap();
        assert_relative_eq!(v, asym, max_relative = 1e-3);
    }

    #[test]
    fn clamped_window_is_handled() {
        let p = FblParams::new(1.0, 10, ChiVariant::RateGap).unwrap();
        assert_eq!(p.rho_l, 0.0);
        let k = Hop2Kernel::new(2, &[1.0, 0.5]).unwrap();
        for &th in &[1e-3, 0.1, 5.0] {
            let q = k.evaluate_via(&p, th, Route::Quadrature);
            assert_relative_eq!(k.evaluate(&p, th), q, max_relative = 1e-9);
        }
    }
}
