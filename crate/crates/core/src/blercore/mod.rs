//! Finite-blocklength BLER: normal-approximation rate, the linearized
//! averaging window, closed-form hop averages, LoS/NLoS mixing, end-to-end
//! combination and trajectory averaging.

mod closed_form;
mod trajectory;

pub use closed_form::{
    avg_bler_hop1, avg_bler_hop2, avg_bler_hop2_asymptotic, avg_bler_quadrature, g_antiderivative,
    avg_bler_hop1_via, Hop2Kernel, Route, SUBSET_CAP,
};
pub use trajectory::{error_floor, trajectory_avg_bler, NodeBreakdown, TrajectoryModel, TrajectoryResult};

use std::f64::consts::{LOG2_E, PI};

use crate::error::{Error, Result};
use crate::special::{q_function, q_inv};

/// Which SNR expression enters the slope `χ` of the linearized Q-function.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum ChiVariant {
    /// `χ = 1/√(2π(2^R − 1)/L)`.
    #[default]
    RateGap,
    /// `χ = 1/√(2π(2^{2R} − 1)/L)`.
    Dispersion,
}

impl ChiVariant {
    pub fn name(self) -> &'static str {
        match self {
            ChiVariant::RateGap => "rate-gap",
            ChiVariant::Dispersion => "dispersion",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        match s {
            "rate-gap" => Some(ChiVariant::RateGap),
            "dispersion" => Some(ChiVariant::Dispersion),
            _ => None,
        }
    }
}

/// Rate and linearization constants for one blocklength.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FblParams {
    pub payload_bits: f64,
    pub blocklength: u32,
    pub rate: f64,
    pub chi: f64,
    pub tau: f64,
    /// Lower window edge, clamped at zero.
    pub rho_l: f64,
    pub rho_h: f64,
}

impl FblParams {
    /// Constants for `payload_bits` over `blocklength` channel uses.
    pub fn new(payload_bits: f64, blocklength: u32, variant: ChiVariant) -> Result<Self> {
        if !(payload_bits > 0.0) {
            return Err(Error::invalid(format!("payload must be positive, got {payload_bits}")));
        }
        if blocklength == 0 {
            return Err(Error::invalid("blocklength must be at least 1"));
        }
        linearize(payload_bits / f64::from(blocklength), blocklength, variant)
    }

    /// Width of the window before clamping, `1/χ`.
    pub fn window(&self) -> f64 {
        1.0 / self.chi
    }
}

/// Linearization window of the instantaneous BLER around `τ = 2^R − 1`.
pub fn linearize(rate: f64, blocklength: u32, variant: ChiVariant) -> Result<FblParams> {
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::invalid(format!("rate must be positive, got {rate}")));
    }
    if blocklength == 0 {
        return Err(Error::invalid("blocklength must be at least 1"));
    }
    let l = f64::from(blocklength);
    let tau = rate.exp2() - 1.0;
    let spread = match variant {
        ChiVariant::RateGap => tau,
        ChiVariant::Dispersion => (2.0 * rate).exp2() - 1.0,
    };
    let chi = 1.0 / (2.0 * PI * spread / l).sqrt();
    let half = 0.5 / chi;
    Ok(FblParams {
        payload_bits: rate * l,
        blocklength,
        rate,
        chi,
        tau,
        rho_l: (tau - half).max(0.0),
        rho_h: tau + half,
    })
}

fn capacity(gamma: f64) -> f64 {
    gamma.ln_1p() * LOG2_E
}

fn dispersion(gamma: f64) -> f64 {
    let inv = 1.0 / (1.0 + gamma);
    (1.0 - inv * inv) * LOG2_E * LOG2_E
}

/// Normal-approximation rate `C(γ) − √(V(γ)/L) Q⁻¹(ε)`.
pub fn fbl_rate(gamma: f64, blocklength: u32, epsilon: f64) -> f64 {
    let l = f64::from(blocklength);
    capacity(gamma) - (dispersion(gamma) / l).sqrt() * q_inv(epsilon)
}

/// Instantaneous BLER `Q((C(γ) − R)/√(V(γ)/L))`; `γ = 0` gives 1.
pub fn instantaneous_bler(gamma: f64, rate: f64, blocklength: u32) -> f64 {
    if gamma <= 0.0 {
        return 1.0;
    }
    let v = dispersion(gamma);
    if v == 0.0 {
        return if capacity(gamma) >= rate { 0.0 } else { 1.0 };
    }
    let l = f64::from(blocklength);
    q_function((capacity(gamma) - rate) / (v / l).sqrt())
}

/// Piecewise-linear surrogate of [`instantaneous_bler`].
pub fn linearized_bler(gamma: f64, params: &FblParams) -> f64 {
    (0.5 - params.chi * (gamma - params.tau)).clamp(0.0, 1.0)
}

/// `p_los ε_LoS + (1 − p_los) ε_NLoS`.
pub fn mixture_bler(eps_los: f64, eps_nlos: f64, p_los: f64) -> f64 {
    eps_los * p_los + eps_nlos * (1.0 - p_los)
}

/// Decode-and-forward combination `1 − (1 − ε₁)(1 − ε₂)`.
pub fn e2e_bler(eps1: f64, eps2: f64) -> f64 {
    1.0 - (1.0 - eps1) * (1.0 - eps2)
}

/// Hop and link-type resolved BLERs at one trajectory angle.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BlerBreakdown {
    /// `[hop][LoS, NLoS]`.
    pub per_hop_per_type: [[f64; 2]; 2],
    pub per_hop_mixed: [f64; 2],
    pub end_to_end: f64,
}

impl BlerBreakdown {
    pub fn new(hop1: [f64; 2], hop2: [f64; 2], p_los: [f64; 2]) -> Self {
        let e1 = mixture_bler(hop1[0], hop1[1], p_los[0]);
        let e2 = mixture_bler(hop2[0], hop2[1], p_los[1]);
        let end_to_end = e2e_bler(e1, e2);
        let b = BlerBreakdown {
            per_hop_per_type: [hop1, hop2],
            per_hop_mixed: [e1, e2],
            end_to_end,
        };
        debug_assert!(b.is_consistent(1e-12));
        b
    }

    pub fn is_consistent(&self, tol: f64) -> bool {
        let [e1, e2] = self.per_hop_mixed;
        let t = self.end_to_end;
        (t - e2e_bler(e1, e2)).abs() <= tol && e1.max(e2) <= t + tol && t <= e1 + e2 + tol
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn rate_examples() {
        assert_relative_eq!(fbl_rate(3.0, 100, 0.5), 2.0, max_relative = 1e-15);
        assert_eq!(fbl_rate(0.0, 50, 1e-3), 0.0);
        assert!((fbl_rate(1.0, 100, 1e-3) - 0.613_903_113_827).abs() < 1e-11);
    }

    #[test]
    fn instantaneous_examples() {
        let r = capacity(2.5);
        assert_relative_eq!(instantaneous_bler(2.5, r, 80), 0.5, max_relative = 1e-14);
        assert!(instantaneous_bler(1e9, 0.8, 100) < 1e-300);
        assert_eq!(instantaneous_bler(0.0, 0.8, 100), 1.0);
        let r = fbl_rate(1.0, 100, 1e-3);
        assert_relative_eq!(instantaneous_bler(1.0, r, 100), 1e-3, max_relative = 1e-10);
    }

    #[test]
    fn linearization_constants() {
        let p = FblParams::new(80.0, 100, ChiVariant::RateGap).unwrap();
        assert!((p.tau - 0.741_101_126_592).abs() < 1e-11);
        assert!((p.chi - 4.634_163_252_723).abs() < 1e-11);
        assert!((p.rho_l - 0.633_206_783_486).abs() < 1e-11);
        assert!((p.rho_h - 0.848_995_469_699).abs() < 1e-11);
        assert_relative_eq!(p.rho_h - p.rho_l, 1.0 / p.chi, max_relative = 1e-13);
        let one = linearize(1.0, 10, ChiVariant::RateGap).unwrap();
        assert_eq!(one.tau, 1.0);
        let clamped = linearize(0.1, 2, ChiVariant::RateGap).unwrap();
        assert_eq!(clamped.rho_l, 0.0);
        let d = FblParams::new(80.0, 100, ChiVariant::Dispersion).unwrap();
        assert!(d.chi < p.chi);
        assert_eq!(d.tau, p.tau);
    }

    #[test]
    fn mixture_and_combination() {
        assert_eq!(mixture_bler(0.1, 0.3, 1.0), 0.1);
        assert_relative_eq!(mixture_bler(0.1, 0.3, 0.5), 0.2);
        assert_eq!(e2e_bler(0.0, 0.25), 0.25);
        assert_relative_eq!(e2e_bler(0.1, 0.1), 0.19, max_relative = 1e-15);
        assert_eq!(e2e_bler(1.0, 0.4), 1.0);
        let b = BlerBreakdown::new([1e-3, 0.2], [1e-5, 0.05], [0.9, 0.3]);
        assert!(b.is_consistent(0.0));
    }
}
