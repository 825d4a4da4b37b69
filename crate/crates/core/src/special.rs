//! Special functions used throughout the BLER machinery.
//!
//! Gaussian tail `Q` and its inverse, regularized incomplete gamma functions
//! for integer shape, the Bessel function `J0`, and the incomplete moment
//! integral `∫ x^p e^{-βx} dx` evaluated without cancellation.

use std::f64::consts::PI;


const SQRT_2: f64 = std::f64::consts::SQRT_2;

/// Gaussian tail probability `Q(x) = P(N(0,1) > x)`.
pub fn q_function(x: f64) -> f64 {
    0.5 * libm::erfc(x / SQRT_2)
}

fn std_normal_pdf(x: f64) -> f64 {
    (-0.5 * x * x).exp() / (2.0 * PI).sqrt()
}

/// Rational approximation of the standard normal quantile (Acklam), relative
/// error about 1e-9; refined by [`q_inv`].
#[allow(clippy::excessive_precision)]
fn normal_quantile_guess(p: f64) -> f64 {
    const A: [f64; 6] = [
        -3.969683028665376e+01,
        2.209460984245205e+02,
        -2.759285104469687e+02,
        1.383577518672690e+02,
        -3.066479806614716e+01,
        2.506628277459239e+00,
    ];
    const B: [f64; 5] = [
        -5.447609879822406e+01,
        1.615858368580409e+02,
        -1.556989798598866e+02,
        6.680131188771972e+01,
        -1.328068155288572e+01,
    ];
    const C: [f64; 6] = [
        -7.784894002430293e-03,
        -3.223964580411365e-01,
        -2.400758277161838e+00,
        -2.549732539343734e+00,
        4.374664141464968e+00,
        2.938163982698783e+00,
    ];
    const D: [f64; 4] = [
        7.784695709041462e-03,
        3.224671290700398e-01,
        2.445134137142996e+00,
        3.754408661907416e+00,
    ];
    const P_LOW: f64 = 0.02425;

    let tail = |q: f64| {
        (((((C[0] * q + C[1]) * q + C[2]) * q + C[3]) * q + C[4]) * q + C[5])
            / ((((D[0] * q + D[1]) * q + D[2]) * q + D[3]) * q + 1.0)
    };
    if p < P_LOW {
        tail((-2.0 * p.ln()).sqrt())
    } else if p <= 1.0 - P_LOW {
        let q = p - 0.5;
        let r = q * q;
        (((((A[0] * r + A[1]) * r + A[2]) * r + A[3]) * r + A[4]) * r + A[5]) * q
            / (((((B[0] * r + B[1]) * r + B[2]) * r + B[3]) * r + B[4]) * r + 1.0)
    } else {
        -tail((-2.0 * (1.0 - p).ln()).sqrt())
    }
}

/// Inverse Gaussian tail, `Q(q_inv(p)) = p` for `p` in (0, 1).
///
/// Returns `+inf` at 0 and `-inf` at 1, NaN outside the unit interval.
pub fn q_inv(p: f64) -> f64 {
    if !(0.0..=1.0).contains(&p) || p.is_nan() {
        return f64::NAN;
    }
    if p == 0.0 {
        return f64::INFINITY;
    }
    if p == 1.0 {
        return f64::NEG_INFINITY;
    }
    if p == 0.5 {
        return 0.0;
    }
    let mut x = -normal_quantile_guess(p);
    // Halley steps on Phi(x) = 1 - p, written in terms of Q to keep relative
    // accuracy in the upper tail.
    for _ in 0..3 {
        let pdf = std_normal_pdf(x);
        if pdf == 0.0 {
            break;
        }
        let u = (p - q_function(x)) / pdf;
        x -= u / (1.0 + 0.5 * x * u);
    }
    x
}

/// `ln(n!)`.
pub fn ln_fact(n: u32) -> f64 {
    libm::lgamma(f64::from(n) + 1.0)
}

/// Regularized lower incomplete gamma `P(m, t)` for integer `m >= 1`.
///
/// For `t` below the mode region the positive series
/// `e^{-t} t^m/m! Σ_k t^k / ((m+1)...(m+k))` is used so that tiny values keep
/// full relative precision; above it the complement of the finite Poisson sum.
pub fn gamma_p_int(m: u32, t: f64) -> f64 {
    debug_assert!(m >= 1);
    if t <= 0.0 {
        return 0.0;
    }
    if t.is_infinite() {
        return 1.0;
    }
    if t < f64::from(m) + 1.0 {
        lower_series(m, t)
    } else {
        1.0 - poisson_head(m, t)
    }
}

/// Regularized upper incomplete gamma `Q(m, t) = 1 - P(m, t)` for integer `m >= 1`.
pub fn gamma_q_int(m: u32, t: f64) -> f64 {
    debug_assert!(m >= 1);
    if t <= 0.0 {
        return 1.0;
    }
    if t.is_infinite() {
        return 0.0;
    }
    if t < f64::from(m) + 1.0 {
        1.0 - lower_series(m, t)
    } else {
        poisson_head(m, t)
    }
}

fn lower_series(m: u32, t: f64) -> f64 {
    let log_pref = -t + f64::from(m) * t.ln() - ln_fact(m);
    let mut term = 1.0;
    let mut sum = 1.0;
    let mut k = 1.0;
    loop {
        term *= t / (f64::from(m) + k);
        sum += term;
        if term < 1e-17 * sum {
            break;
        }
        k += 1.0;
    }
    (log_pref + sum.ln()).exp()
}

/// `e^{-t} Σ_{j<m} t^j / j!`, evaluated in log space term by term.
fn poisson_head(m: u32, t: f64) -> f64 {
    let lt = t.ln();
    (0..m)
        .map(|j| (-t + f64::from(j) * lt - ln_fact(j)).exp())
        .sum()
}

/// Bessel function of the first kind of order zero.
///
/// Power series for `|z| < 8`; Miller's backward recurrence, normalized by
/// `J0 + 2 Σ J_{2k} = 1`, beyond that. Absolute error stays below 1e-14 on
/// the arguments used by the Jakes model.
pub fn bessel_j0(z: f64) -> f64 {
    let x = z.abs();
    if x < 8.0 {
        let q = 0.25 * x * x;
        let mut term: f64 = 1.0;
        let mut sum: f64 = 1.0;
        let mut k = 1.0;
        while term.abs() > 1e-18 * sum.abs().max(1e-300) || k < 3.0 {
            term *= -q / (k * k);
            sum += term;
            k += 1.0;
            if k > 200.0 {
                break;
            }
        }
        sum
    } else {
        j0_miller(x)
    }
}

fn j0_miller(x: f64) -> f64 {
    let mut start = (x + 25.0 + 12.0 * x.sqrt()) as usize;
    if start % 2 == 1 {
        start += 1;
    }
    let mut j_next = 0.0;
    let mut j_cur = 1e-30;
    let mut norm = 0.0;
    let mut j0 = 0.0;
    for k in (1..=start).rev() {
        let j_prev = 2.0 * k as f64 / x * j_cur - j_next;
        j_next = j_cur;
        j_cur = j_prev;
        let order = k - 1;
        if order == 0 {
            j0 = j_cur;
            norm += j_cur;
        } else if order % 2 == 0 {
            norm += 2.0 * j_cur;
        }
        if j_cur.abs() > 1e250 {
            j_cur *= 1e-250;
            j_next *= 1e-250;
            norm *= 1e-250;
        }
    }
    j0 / norm
}

/// `∫_u^v x^p e^{-βx} dx · e^{log_scale}`, all in positive arithmetic.
///
/// The interval is split at the integrand mode `p/β`; the rising part uses the
/// lower-gamma series and the falling part the finite upper-gamma sum, so no
/// term in either is subtracted from a larger one.
pub fn incomplete_moment(p: u32, beta: f64, u: f64, v: f64, log_scale: f64) -> f64 {
    if v <= u {
        return 0.0;
    }
    let pf = f64::from(p);
    if beta == 0.0 {
        let hi = ((pf + 1.0) * v.ln() + log_scale).exp();
        let lo = if u > 0.0 {
            ((pf + 1.0) * u.ln() + log_scale).exp()
        } else {
            0.0
        };
        return (hi - lo) / (pf + 1.0);
    }
    let mode = pf / beta;
    if v <= mode {
        moment_below(p, beta, v, log_scale) - moment_below(p, beta, u, log_scale)
    } else if u >= mode {
        moment_above(p, beta, u, log_scale) - moment_above(p, beta, v, log_scale)
    } else {
        (moment_below(p, beta, mode, log_scale) - moment_below(p, beta, u, log_scale))
            + (moment_above(p, beta, mode, log_scale) - moment_above(p, beta, v, log_scale))
    }
}

/// `∫_0^x t^p e^{-βt} dt`, for `βx <= p + 1`.
fn moment_below(p: u32, beta: f64, x: f64, log_scale: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    let pf = f64::from(p);
    let log_pref = (pf + 1.0) * x.ln() - beta * x + log_scale;
    if log_pref < -745.0 {
        return 0.0;
    }
    let y = beta * x;
    let mut term = 1.0 / (pf + 1.0);
    let mut sum = term;
    let mut k = 1.0;
    while term > 1e-18 * sum {
        term *= y / (pf + 1.0 + k);
        sum += term;
        k += 1.0;
    }
    log_pref.exp() * sum
}

/// `∫_x^∞ t^p e^{-βt} dt`, for `βx >= p`.
fn moment_above(p: u32, beta: f64, x: f64, log_scale: f64) -> f64 {
    if x.is_infinite() {
        return 0.0;
    }
    let pf = f64::from(p);
    let log_pref = if p == 0 {
        -beta * x - beta.ln() + log_scale
    } else {
        -beta * x + pf * x.ln() - beta.ln() + log_scale
    };
    if log_pref < -745.0 {
        return 0.0;
    }
    let y = beta * x;
    let mut term = 1.0;
    let mut sum = 1.0;
    for i in 0..p {
        term *= f64::from(p - i) / y;
        sum += term;
        if term < 1e-18 * sum {
            break;
        }
    }
    log_pref.exp() * sum
}

/// `J_p = ∫_σ^1 v^p e^{-γv} dv` for `p = p0 .. p0 + count`, appended to `out`.
///
/// Orders whose integrand peaks right of the interval come from a downward
/// recurrence `A_p = (γ A_{p+1} + x^{p+1} e^{-γx})/(p+1)` on the lower
/// moments; orders peaking left of it from the upward recurrence
/// `B_{p+1} = ((p+1) B_p + x^{p+1} e^{-γx})/γ` on the upper moments. Both add
/// positive terms only. Orders peaking inside fall back to
/// [`incomplete_moment`].
pub fn unit_moments(p0: u32, count: usize, gamma: f64, sigma: f64, out: &mut Vec<f64>) {
    let start = out.len();
    out.resize(start + count, 0.0);
    if count == 0 {
        return;
    }
    let dst = &mut out[start..];
    let p_last = p0 + count as u32 - 1;
    if gamma <= 0.0 {
        for (k, d) in dst.iter_mut().enumerate() {
            let q = f64::from(p0) + k as f64 + 1.0;
            *d = (1.0 - sigma.powf(q)) / q;
        }
        return;
    }
    // Orders p >= γ: increasing integrand on [σ, 1].
    let below_from = gamma.ceil().max(f64::from(p0)) as u32;
    if below_from <= p_last {
        let e1 = (-gamma).exp();
        let es = (-gamma * sigma).exp();
        let mut a1 = moment_below(p_last, gamma, 1.0, 0.0);
        let mut a_s = if sigma > 0.0 { moment_below(p_last, gamma, sigma, 0.0) } else { 0.0 };
        let mut sp = if sigma > 0.0 { sigma.powi(p_last as i32 + 1) } else { 0.0 };
        let mut p = p_last;
        loop {
            dst[(p - p0) as usize] = a1 - a_s;
            if p == below_from {
                break;
            }
            let pf = f64::from(p);
            a1 = (gamma * a1 + e1) / pf;
            if sigma > 0.0 {
                sp /= sigma;
                a_s = (gamma * a_s + sp * es) / pf;
            }
            p -= 1;
        }
    }
    // Orders p <= γσ: decreasing integrand on [σ, 1].
    let above_to = if sigma > 0.0 { (gamma * sigma).floor() } else { -1.0 };
    if above_to >= f64::from(p0) {
        let above_to = (above_to as u32).min(p_last);
        let e1 = (-gamma).exp();
        let es = (-gamma * sigma).exp();
        let mut b1 = e1 / gamma;
        let mut b_s = es / gamma;
        let mut sp = 1.0;
        for p in 0..=above_to {
            if p >= p0 {
                dst[(p - p0) as usize] = b_s - b1;
            }
            let next = f64::from(p + 1);
            sp *= sigma;
            b1 = (next * b1 + e1) / gamma;
            b_s = (next * b_s + sp * es) / gamma;
        }
    }
    for (k, d) in dst.iter_mut().enumerate() {
        let p = p0 + k as u32;
        let pf = f64::from(p);
        if pf < gamma && pf > gamma * sigma {
            *d = incomplete_moment(p, gamma, sigma, 1.0, 0.0);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn q_and_inverse() {
        assert_eq!(q_function(0.0), 0.5);
        assert_relative_eq!(q_inv(1e-3), 3.090_232_306_167_813, max_relative = 1e-12);
        for &p in &[0.4, 0.1, 1e-3, 1e-6, 1e-12, 1e-30, 0.9, 0.999] {
            let x = q_inv(p);
            assert_relative_eq!(q_function(x), p, max_relative = 1e-11);
        }
    }

    #[test]
    fn incomplete_gamma_matches_statrs() {
        for m in 1..=8u32 {
            for &t in &[1e-6, 1e-3, 0.1, 0.5, 1.0, 3.0, 7.5, 9.0, 20.0, 50.0] {
                let p = gamma_p_int(m, t);
                let reference = statrs::function::gamma::gamma_lr(f64::from(m), t);
                assert_relative_eq!(p, reference, max_relative = 1e-11, epsilon = 1e-300);
                assert_relative_eq!(p + gamma_q_int(m, t), 1.0, epsilon = 1e-14);
            }
        }
    }

    #[test]
    fn gamma_p_exponential_case() {
        assert_relative_eq!(gamma_p_int(1, 1.0), 1.0 - (-1.0f64).exp(), max_relative = 1e-15);
        assert_relative_eq!(gamma_p_int(2, 1.0), 1.0 - 2.0 * (-1.0f64).exp(), max_relative = 1e-14);
        assert_eq!(gamma_p_int(3, 0.0), 0.0);
    }

    #[test]
    fn j0_against_libm() {
        let mut z = 0.0;
        while z < 60.0 {
            assert!((bessel_j0(z) - libm::j0(z)).abs() < 1e-14, "z = {z}");
            assert_eq!(bessel_j0(-z), bessel_j0(z));
            z += 0.173;
        }
        assert!((bessel_j0(PI) + 0.304_242_177_644_093_9).abs() < 1e-15);
    }

    #[test]
    fn moment_against_closed_cases() {
        // ∫_0^1 x e^{-x} dx = 1 - 2/e
        let v = incomplete_moment(1, 1.0, 0.0, 1.0, 0.0);
        assert_relative_eq!(v, 1.0 - 2.0 / std::f64::consts::E, max_relative = 1e-14);
        // ∫_2^5 x^3 e^{-2x} dx via antiderivative
        let anti = |x: f64| -(-2.0 * x).exp() * (x.powi(3) / 2.0 + 3.0 * x * x / 4.0 + 6.0 * x / 8.0 + 6.0 / 16.0);
        assert_relative_eq!(incomplete_moment(3, 2.0, 2.0, 5.0, 0.0), anti(5.0) - anti(2.0), max_relative = 1e-13);
        // interval straddling the mode
        assert_relative_eq!(incomplete_moment(3, 2.0, 0.5, 4.0, 0.0), anti(4.0) - anti(0.5), max_relative = 1e-13);
        assert_relative_eq!(incomplete_moment(2, 0.0, 1.0, 2.0, 0.0), 7.0 / 3.0, max_relative = 1e-15);
        // log scale passes straight through
        assert_relative_eq!(
            incomplete_moment(3, 2.0, 0.5, 4.0, -300.0_f64),
            (anti(4.0) - anti(0.5)) * (-300.0f64).exp(),
            max_relative = 1e-12
        );
    }

    #[test]
    fn unit_moments_match_scalar() {
        for &(p0, count, gamma, sigma) in &[
            (0u32, 40usize, 3.5, 0.2),
            (5, 30, 60.0, 0.7),
            (0, 25, 0.0, 0.4),
            (12, 50, 1e-4, 0.0),
            (1, 80, 30.0, 0.0),
            (0, 10, 200.0, 0.95),
        ] {
            let mut out = vec![9.0];
            unit_moments(p0, count, gamma, sigma, &mut out);
            assert_eq!(out.len(), count + 1);
            for k in 0..count {
                let want = incomplete_moment(p0 + k as u32, gamma, sigma, 1.0, 0.0);
                assert_relative_eq!(out[k + 1], want, max_relative = 1e-12);
            }
        }
    }
}
