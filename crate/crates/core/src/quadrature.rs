//! Numerical integration rules: adaptive Gauss–Kronrod on an interval and the
//! circular-mean rules used for trajectory averaging.

use std::f64::consts::PI;

const XGK: [f64; 8] = [
    0.991_455_371_120_812_6,
    0.949_107_912_342_758_5,
    0.864_864_423_359_769_1,
    0.741_531_185_599_394_4,
    0.586_087_235_467_691_1,
    0.405_845_151_377_397_2,
    0.207_784_955_007_898_5,
    0.0,
];
const WGK: [f64; 8] = [
    0.022_935_322_010_529_22,
    0.063_092_092_629_978_55,
    0.104_790_010_322_250_2,
    0.140_653_259_715_525_9,
    0.169_004_726_639_267_9,
    0.190_350_578_064_785_4,
    0.204_432_940_075_298_9,
    0.209_482_141_084_727_8,
];
const WG: [f64; 4] = [
    0.129_484_966_168_869_7,
    0.279_705_391_489_276_7,
    0.381_830_050_505_118_9,
    0.417_959_183_673_469_4,
];

#[derive(Debug, Clone, Copy)]
pub struct Integral {
    pub value: f64,
    pub error: f64,
    pub intervals: usize,
}

fn gk15<F: Fn(f64) -> f64>(f: &F, a: f64, b: f64) -> (f64, f64) {
    let center = 0.5 * (a + b);
    let half = 0.5 * (b - a);
    let fc = f(center);
    let mut kronrod = fc * WGK[7];
    let mut gauss = fc * WG[3];
    for (j, &x) in XGK[..7].iter().enumerate() {
        let dx = half * x;
        let pair = f(center - dx) + f(center + dx);
        kronrod += WGK[j] * pair;
        if j % 2 == 1 {
            gauss += WG[j / 2] * pair;
        }
    }
    (kronrod * half, ((kronrod - gauss) * half).abs())
}

/// Globally adaptive 15-point Gauss–Kronrod quadrature of `f` over `[a, b]`.
///
/// Bisects the interval with the largest error estimate until the summed
/// estimate falls below `max(abs_tol, rel_tol * |value|)` or `max_intervals`
/// is reached.
pub fn integrate<F: Fn(f64) -> f64>(
    f: F,
    a: f64,
    b: f64,
    rel_tol: f64,
    abs_tol: f64,
    max_intervals: usize,
) -> Integral {
    if b <= a {
        return Integral {
            value: 0.0,
            error: 0.0,
            intervals: 0,
        };
    }
    let (v, e) = gk15(&f, a, b);
    let mut pieces = vec![(a, b, v, e)];
    loop {
        let value: f64 = pieces.iter().map(|p| p.2).sum();
        let error: f64 = pieces.iter().map(|p| p.3).sum();
        if error <= abs_tol.max(rel_tol * value.abs()) || pieces.len() >= max_intervals {
            return Integral {
                value,
                error,
                intervals: pieces.len(),
            };
        }
        let (idx, _) = pieces
            .iter()
            .enumerate()
            .max_by(|x, y| x.1 .3.total_cmp(&y.1 .3))
            .expect("non-empty");
        let (lo, hi, _, _) = pieces.swap_remove(idx);
        let mid = 0.5 * (lo + hi);
        let (v1, e1) = gk15(&f, lo, mid);
        let (v2, e2) = gk15(&f, mid, hi);
        pieces.push((lo, mid, v1, e1));
        pieces.push((mid, hi, v2, e2));
    }
}

/// Node on the circle and its weight in a circular-mean rule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleNode {
    pub theta: f64,
    pub weight: f64,
}

/// Rule for averaging a function of the trajectory angle over `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ThetaRule {
    /// M-point Gauss–Chebyshev: `θ_m = π x_m + π`, weight `(π/2M) √(1 - x_m²)`.
    GaussChebyshev(usize),
    /// n equally spaced midpoints, weight `1/n`.
    Midpoint(usize),
}

impl ThetaRule {
    pub fn nodes(&self) -> Vec<AngleNode> {
        match *self {
            ThetaRule::GaussChebyshev(m) => chebyshev_roots(m)
                .into_iter()
                .map(|x| AngleNode {
                    theta: PI * x + PI,
                    weight: 0.5 * PI / m as f64 * (1.0 - x * x).sqrt(),
                })
                .collect(),
            ThetaRule::Midpoint(n) => (0..n)
                .map(|i| AngleNode {
                    theta: 2.0 * PI * (i as f64 + 0.5) / n as f64,
                    weight: 1.0 / n as f64,
                })
                .collect(),
        }
    }
}

/// Roots of the Chebyshev polynomial `T_M` on `[-1, 1]`, descending.
pub fn chebyshev_roots(m: usize) -> Vec<f64> {
    (1..=m)
        .map(|k| ((2 * k - 1) as f64 * PI / (2 * m) as f64).cos())
        .collect()
}

/// Weighted sum of `f` over the rule's nodes, reduced in node order.
pub fn circular_mean<F: FnMut(f64) -> f64>(rule: ThetaRule, mut f: F) -> f64 {
    rule.nodes().iter().map(|n| n.weight * f(n.theta)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn gauss_kronrod_polynomial_and_exp() {
        let r = integrate(|x| x.powi(5) - 2.0 * x, 0.0, 2.0, 1e-14, 0.0, 50);
        assert_relative_eq!(r.value, 64.0 / 6.0 - 4.0, max_relative = 1e-14);
        let r = integrate(|x: f64| (-x).exp(), 0.0, 40.0, 1e-13, 0.0, 200);
        assert_relative_eq!(r.value, 1.0 - (-40.0f64).exp(), max_relative = 1e-13);
    }

    #[test]
    fn two_node_chebyshev_angles() {
        let nodes = ThetaRule::GaussChebyshev(2).nodes();
        assert!((nodes[0].theta - 5.363_034_5).abs() < 1e-6);
        assert!((nodes[1].theta - 0.920_150_8).abs() < 1e-6);
    }

    #[test]
    fn constant_integrand_node_sum() {
        // Σ weights = (π/2M)/sin(π/2M)
        for &m in &[16usize, 64, 512] {
            let s = circular_mean(ThetaRule::GaussChebyshev(m), |_| 1.0);
            let h = PI / (2 * m) as f64;
            assert_relative_eq!(s, h / h.sin(), max_relative = 1e-13);
        }
        assert!((circular_mean(ThetaRule::GaussChebyshev(16), |_| 1.0) - 1.0).abs() < 2e-3);
        assert!((circular_mean(ThetaRule::GaussChebyshev(512), |_| 1.0) - 1.0).abs() < 1e-4);
        assert_relative_eq!(circular_mean(ThetaRule::Midpoint(7), |_| 0.3), 0.3, max_relative = 1e-15);
    }

    #[test]
    fn midpoint_is_spectral_for_trig_polynomials() {
        let f = |t: f64| 1.0 + 0.5 * t.cos() + 0.25 * (3.0 * t).sin();
        assert_relative_eq!(circular_mean(ThetaRule::Midpoint(16), f), 1.0, max_relative = 1e-14);
    }
}
