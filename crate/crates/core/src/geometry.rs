//! Trajectory geometry, LoS probability and large-scale path loss for the
//! BS → UAV → UE link.

use std::f64::consts::PI;

use crate::chanmodel::FasSpectrum;
use crate::error::{Error, Result};

pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Slant ranges below this are treated as the UAV sitting on a node.
const DEGENERATE_RANGE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Hop {
    /// BS → UAV.
    First,
    /// UAV → UE.
    Second,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum LinkType {
    Los,
    Nlos,
}

impl LinkType {
    pub const BOTH: [LinkType; 2] = [LinkType::Los, LinkType::Nlos];

    pub fn index(self) -> usize {
        match self {
            LinkType::Los => 0,
            LinkType::Nlos => 1,
        }
    }
}

/// Environment and hardware constants. Powers in watts, lengths in meters.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub bs_position: [f64; 3],
    pub ue_position: [f64; 3],
    pub flight_radius: f64,
    pub uav_altitude: f64,
    pub los_a: f64,
    pub los_b: f64,
    pub eta_los_db: f64,
    pub eta_nlos_db: f64,
    pub carrier_freq: f64,
    pub noise_power: f64,
    pub p1: f64,
    pub m_los: u32,
    pub m_nlos: u32,
}

impl Default for ScenarioConfig {
    /// Dense-urban parameter set; `uav_altitude` = 450 m and `p1` = 40 dBm.
    fn default() -> Self {
        ScenarioConfig {
            bs_position: [100.0, 0.0, 40.0],
            ue_position: [-100.0, 100.0, 0.0],
            flight_radius: 50.0,
            uav_altitude: 450.0,
            los_a: 12.08,
            los_b: 0.11,
            eta_los_db: 1.6,
            eta_nlos_db: 23.0,
            carrier_freq: 2.5e9,
            noise_power: dbm_to_watts(-100.0),
            p1: dbm_to_watts(40.0),
            m_los: 5,
            m_nlos: 1,
        }
    }
}

impl ScenarioConfig {
    pub fn validate(&self) -> Result<()> {
        let finite = self
            .bs_position
            .iter()
            .chain(self.ue_position.iter())
            .chain([self.uav_altitude, self.los_a, self.los_b, self.eta_los_db, self.eta_nlos_db].iter())
            .all(|v| v.is_finite());
        if !finite {
            return Err(Error::invalid("scenario contains non-finite values"));
        }
        if !(self.flight_radius > 0.0) {
            return Err(Error::invalid("flight radius must be positive"));
        }
        if !(self.carrier_freq > 0.0) {
            return Err(Error::invalid("carrier frequency must be positive"));
        }
        if !(self.noise_power > 0.0) {
            return Err(Error::invalid("noise power must be positive"));
        }
        if !(self.p1 > 0.0) {
            return Err(Error::invalid("BS transmit power must be positive"));
        }
        if !(self.los_a > 0.0 && self.los_b > 0.0) {
            return Err(Error::invalid("LoS constants a and b must be positive"));
        }
        if self.m_los < 1 || self.m_nlos < 1 {
            return Err(Error::invalid("Nakagami factors must be integers >= 1"));
        }
        if self.eta_los_db > self.eta_nlos_db {
            return Err(Error::invalid("LoS excess loss exceeds NLoS excess loss"));
        }
        Ok(())
    }

    pub fn m_factor(&self, k: LinkType) -> u32 {
        match k {
            LinkType::Los => self.m_los,
            LinkType::Nlos => self.m_nlos,
        }
    }

    pub fn eta_db(&self, k: LinkType) -> f64 {
        match k {
            LinkType::Los => self.eta_los_db,
            LinkType::Nlos => self.eta_nlos_db,
        }
    }

    pub fn uav_position(&self, theta: f64) -> [f64; 3] {
        [
            self.flight_radius * theta.cos(),
            self.flight_radius * theta.sin(),
            self.uav_altitude,
        ]
    }

    fn node(&self, hop: Hop) -> [f64; 3] {
        match hop {
            Hop::First => self.bs_position,
            Hop::Second => self.ue_position,
        }
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(w: f64) -> f64 {
    10.0 * w.log10() + 30.0
}

fn distance(a: [f64; 3], b: [f64; 3]) -> f64 {
    let dx = a[0] - b[0];
    let dy = a[1] - b[1];
    let dz = a[2] - b[2];
    (dx * dx + dy * dy + dz * dz).sqrt()
}

/// BS–UAV and UAV–UE slant ranges at trajectory angle `theta`.
pub fn slant_ranges(cfg: &ScenarioConfig, theta: f64) -> Result<(f64, f64)> {
    let uav = cfg.uav_position(theta);
    let d1 = distance(uav, cfg.bs_position);
    let d2 = distance(uav, cfg.ue_position);
    if d1 < DEGENERATE_RANGE {
        return Err(Error::DegenerateGeometry {
            hop: Hop::First,
            theta,
        });
    }
    if d2 < DEGENERATE_RANGE {
        return Err(Error::DegenerateGeometry {
            hop: Hop::Second,
            theta,
        });
    }
    Ok((d1, d2))
}

/// Signed elevation angle in degrees, `(180/π) asin(Δz/d)`.
pub fn elevation_angle(d: f64, delta_z: f64) -> Result<f64> {
    if !(d > 0.0) {
        return Err(Error::domain(format!("slant range must be positive, got {d}")));
    }
    let ratio = delta_z / d;
    if ratio.abs() > 1.0 + 1e-12 {
        return Err(Error::domain(format!("|delta_z| = {} exceeds slant range {d}", delta_z.abs())));
    }
    Ok(ratio.clamp(-1.0, 1.0).asin() * 180.0 / PI)
}

/// Sigmoid LoS probability `1 / (1 + a exp(-b (φ - a)))`, `φ` in degrees.
pub fn los_probability(phi: f64, a: f64, b: f64) -> f64 {
    1.0 / (1.0 + a * (-b * (phi - a)).exp())
}

/// Linear large-scale gain `(c / 4π f_c d)² 10^{-η/10}`.
pub fn path_loss_coeff(d: f64, carrier_freq: f64, eta_db: f64) -> f64 {
    let free = SPEED_OF_LIGHT / (4.0 * PI * carrier_freq * d);
    free * free * 10f64.powf(-eta_db / 10.0)
}

/// Geometry of one hop at one trajectory angle, shared by both link types.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HopGeometry {
    pub distance: f64,
    pub elevation: f64,
    pub p_los: f64,
}

impl HopGeometry {
    pub fn probability(&self, k: LinkType) -> f64 {
        match k {
            LinkType::Los => self.p_los,
            LinkType::Nlos => 1.0 - self.p_los,
        }
    }
}

pub fn hop_geometry(cfg: &ScenarioConfig, theta: f64, hop: Hop) -> Result<HopGeometry> {
    let (d1, d2) = slant_ranges(cfg, theta)?;
    let d = match hop {
        Hop::First => d1,
        Hop::Second => d2,
    };
    let delta_z = cfg.uav_altitude - cfg.node(hop)[2];
    let elevation = elevation_angle(d, delta_z)?;
    Ok(HopGeometry {
        distance: d,
        elevation,
        p_los: los_probability(elevation, cfg.los_a, cfg.los_b),
    })
}

/// Derived per-angle quantities for one hop and one link type.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LinkState {
    pub hop: Hop,
    pub link_type: LinkType,
    pub theta: f64,
    pub distance: f64,
    pub elevation: f64,
    /// LoS probability of this hop (not of `link_type`).
    pub p_los: f64,
    pub beta: f64,
    pub gamma_bar: f64,
    pub vartheta: f64,
}

impl LinkState {
    /// Probability of this record's link type.
    pub fn probability(&self) -> f64 {
        match self.link_type {
            LinkType::Los => self.p_los,
            LinkType::Nlos => 1.0 - self.p_los,
        }
    }
}

/// Average SNR and rate parameter for `hop` and link type `k`.
///
/// Hop 1 uses `γ̄ = P₁β/σ²`, `ϑ = m/γ̄`. Hop 2 uses the retained eigenvalues of
/// `fas`: `γ̄ = P₂βΣλ/σ²` and `ϑ = mΣλ/γ̄`, which equals `mσ²/(P₂β)`.
pub fn link_state(
    cfg: &ScenarioConfig,
    fas: &FasSpectrum,
    p2: f64,
    theta: f64,
    hop: Hop,
    k: LinkType,
) -> Result<LinkState> {
    let geo = hop_geometry(cfg, theta, hop)?;
    let beta = path_loss_coeff(geo.distance, cfg.carrier_freq, cfg.eta_db(k));
    let m = f64::from(cfg.m_factor(k));
    let (gamma_bar, vartheta) = match hop {
        Hop::First => {
            let g = cfg.p1 * beta / cfg.noise_power;
            (g, m / g)
        }
        Hop::Second => {
            if !(p2 > 0.0) {
                return Err(Error::domain(format!("P2 must be positive, got {p2}")));
            }
            let lambda_sum: f64 = fas.retained().iter().sum();
            let g = p2 * beta * lambda_sum / cfg.noise_power;
            (g, m * lambda_sum / g)
        }
    };
    Ok(LinkState {
        hop,
        link_type: k,
        theta,
        distance: geo.distance,
        elevation: geo.elevation,
        p_los: geo.p_los,
        beta,
        gamma_bar,
        vartheta,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn at_altitude(z: f64) -> ScenarioConfig {
        ScenarioConfig {
            uav_altitude: z,
            ..ScenarioConfig::default()
        }
    }

    #[test]
    fn slant_ranges_table_geometry() {
        let cfg = at_altitude(100.0);
        let (d1, d2) = slant_ranges(&cfg, 0.0).unwrap();
        assert_relative_eq!(d1, 6100f64.sqrt(), max_relative = 1e-15);
        assert_relative_eq!(d2, 42500f64.sqrt(), max_relative = 1e-15);
        let (_, d2) = slant_ranges(&cfg, PI).unwrap();
        assert_relative_eq!(d2, 150.0, max_relative = 1e-14);
    }

    #[test]
    fn coincident_uav_is_degenerate() {
        let cfg = ScenarioConfig {
            bs_position: [50.0, 0.0, 100.0],
            ..at_altitude(100.0)
        };
        assert!(matches!(
            slant_ranges(&cfg, 0.0),
            Err(Error::DegenerateGeometry { hop: Hop::First, .. })
        ));
    }

    #[test]
    fn elevation_examples() {
        assert_relative_eq!(elevation_angle(100.0, 100.0).unwrap(), 90.0);
        assert_relative_eq!(elevation_angle(100.0, 50.0).unwrap(), 30.0, max_relative = 1e-14);
        assert!((elevation_angle(150.0, 100.0).unwrap() - 41.810_314_9).abs() < 1e-6);
        assert!(elevation_angle(150.0, -100.0).unwrap() < 0.0);
        assert!(elevation_angle(10.0, 11.0).is_err());
    }

    #[test]
    fn los_probability_examples() {
        assert_relative_eq!(los_probability(12.08, 12.08, 0.11), 1.0 / 13.08, max_relative = 1e-15);
        assert!((los_probability(90.0, 12.08, 0.11) - 0.997_72).abs() < 1e-5);
        assert!((los_probability(0.0, 12.08, 0.11) - 0.021_45).abs() < 1e-5);
    }

    #[test]
    fn path_loss_examples() {
        let unit = SPEED_OF_LIGHT / (4.0 * PI * 2.5e9);
        assert_relative_eq!(path_loss_coeff(unit, 2.5e9, 0.0), 1.0, max_relative = 1e-15);
        let b = path_loss_coeff(100.0, 2.5e9, 0.0);
        assert!((b - 9.106e-9).abs() < 1e-12);
        assert!((10.0 * b.log10() + 80.41).abs() < 0.01);
        assert!((path_loss_coeff(100.0, 2.5e9, 1.6) - 6.300e-9).abs() < 1e-12);
    }

    #[test]
    fn snr_and_rate_parameter() {
        let p = dbm_to_watts(40.0);
        assert_relative_eq!(p, 10.0, max_relative = 1e-15);
        let gamma = p * 1e-9 / 1e-13;
        assert_relative_eq!(gamma, 1e5, max_relative = 1e-12);
        assert_relative_eq!(5.0 / gamma, 5e-5, max_relative = 1e-12);
    }

    #[test]
    fn hop2_rate_parameter_is_independent_of_eigenvalues() {
        let cfg = ScenarioConfig::default();
        let fas = FasSpectrum::from_eigenvalues(vec![1.30425, 0.69575], 1e-9);
        let p2 = 0.05;
        for k in LinkType::BOTH {
            let s = link_state(&cfg, &fas, p2, 1.1, Hop::Second, k).unwrap();
            let direct = f64::from(cfg.m_factor(k)) * cfg.noise_power / (p2 * s.beta);
            assert_relative_eq!(s.vartheta, direct, max_relative = 4.0 * f64::EPSILON);
        }
    }

    #[test]
    fn hop1_ignores_second_hop_power() {
        let cfg = ScenarioConfig::default();
        let fas = FasSpectrum::fixed_position();
        let a = link_state(&cfg, &fas, 1.0, 0.3, Hop::First, LinkType::Nlos).unwrap();
        let b = link_state(&cfg, &fas, 1e-3, 0.3, Hop::First, LinkType::Nlos).unwrap();
        assert_eq!(a, b);
        assert_relative_eq!(a.vartheta * a.gamma_bar, 1.0, max_relative = 1e-15);
    }
}
