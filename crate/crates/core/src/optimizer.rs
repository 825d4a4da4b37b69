//! Energy efficiency and the hierarchical search over transmit power, port
//! count, altitude and blocklength.

use rayon::prelude::*;

use crate::blercore::{ChiVariant, FblParams, TrajectoryModel};
use crate::chanmodel::{FasSpectrum, DEFAULT_RANK_TOLERANCE};
use crate::error::{Error, Result};
use crate::geometry::{dbm_to_watts, ScenarioConfig};
use crate::quadrature::ThetaRule;

/// Lower bisection endpoint as a fraction of `p_max`.
pub const BRACKET_FLOOR: f64 = 1e-8;
/// Points of the log grid on which monotonicity is checked.
pub const MONOTONE_GRID: usize = 10;
/// Relative slack below which two grid values count as equal.
const MONOTONE_SLACK: f64 = 1e-9;
/// Switching times within this relative distance of the block time count as equal.
const CAUSALITY_SLACK: f64 = 1e-12;

fn violates_causality(switch_time: f64, block_time: f64) -> bool {
    switch_time >= block_time * (1.0 - CAUSALITY_SLACK)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EeConfig {
    pub payload_bits: f64,
    /// System bandwidth in Hz.
    pub bandwidth: f64,
    pub circuit_power: f64,
    pub switch_power: f64,
    /// Time spent probing one port, in seconds.
    pub port_time: f64,
    pub bler_threshold: f64,
    pub p_max: f64,
    pub z_range: (f64, f64),
    pub l_set: Vec<u32>,
    pub n_range: (u32, u32),
    pub z_step: f64,
    pub bisect_tol: f64,
    pub max_bisect_iters: u32,
    /// Gauss–Chebyshev nodes used for the trajectory average.
    pub theta_nodes: usize,
    pub chi_variant: ChiVariant,
    pub rank_tolerance: f64,
}

impl Default for EeConfig {
    fn default() -> Self {
        EeConfig {
            payload_bits: 80.0,
            bandwidth: 10e6,
            circuit_power: dbm_to_watts(5.0),
            switch_power: dbm_to_watts(0.0),
            port_time: 2e-6,
            bler_threshold: 1e-3,
            p_max: dbm_to_watts(50.0),
            z_range: (100.0, 800.0),
            l_set: vec![300, 400, 500, 600],
            n_range: (1, 16),
            z_step: 10.0,
            bisect_tol: 1e-4,
            max_bisect_iters: 60,
            theta_nodes: 32,
            chi_variant: ChiVariant::RateGap,
            rank_tolerance: DEFAULT_RANK_TOLERANCE,
        }
    }
}

impl EeConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("payload_bits", self.payload_bits),
            ("bandwidth", self.bandwidth),
            ("port_time", self.port_time),
            ("p_max", self.p_max),
            ("z_step", self.z_step),
            ("bisect_tol", self.bisect_tol),
            ("rank_tolerance", self.rank_tolerance),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::invalid(format!("{name} must be positive and finite, got {v}")));
            }
        }
        if !(self.circuit_power >= 0.0 && self.switch_power >= 0.0) {
            return Err(Error::invalid("circuit and switching powers must be non-negative"));
        }
        if !(self.bler_threshold > 0.0 && self.bler_threshold < 1.0) {
            return Err(Error::invalid(format!(
                "BLER threshold must lie in (0, 1), got {}",
                self.bler_threshold
            )));
        }
        let (z_lo, z_hi) = self.z_range;
        if !(z_lo < z_hi) {
            return Err(Error::invalid(format!("altitude range must satisfy min < max, got [{z_lo}, {z_hi}]")));
        }
        if self.l_set.is_empty() || self.l_set.contains(&0) {
            return Err(Error::invalid("blocklength set must be non-empty and positive"));
        }
        let (n_lo, n_hi) = self.n_range;
        if n_lo < 1 || n_lo > n_hi {
            return Err(Error::invalid(format!("port range must satisfy 1 <= min <= max, got [{n_lo}, {n_hi}]")));
        }
        if self.max_bisect_iters == 0 {
            return Err(Error::invalid("bisection needs at least one iteration"));
        }
        if self.theta_nodes < 2 {
            return Err(Error::invalid("trajectory rule needs at least 2 nodes"));
        }
        Ok(())
    }

    pub fn block_time(&self, blocklength: u32) -> f64 {
        f64::from(blocklength) / self.bandwidth
    }

    /// Whether `n` ports can be scanned within one block.
    pub fn is_causal(&self, n: u32, blocklength: u32) -> bool {
        !violates_causality(f64::from(n) * self.port_time, self.block_time(blocklength))
    }

    /// [`energy_efficiency`] with this configuration's constants.
    pub fn efficiency(&self, eps_o: f64, p2: f64, blocklength: u32, n: u32) -> Result<f64> {
        energy_efficiency(
            self.payload_bits,
            eps_o,
            p2,
            blocklength,
            self.bandwidth,
            n,
            self.port_time,
            self.circuit_power,
            self.switch_power,
        )
    }

    /// Altitude grid `Z_min, Z_min + step, …`, closed at `Z_max`.
    pub fn altitude_grid(&self) -> Vec<f64> {
        let (lo, hi) = self.z_range;
        let steps = ((hi - lo) / self.z_step + 1e-9).floor() as usize;
        let mut grid: Vec<f64> = (0..=steps).map(|k| lo + k as f64 * self.z_step).collect();
        if hi - grid[grid.len() - 1] > 1e-9 * self.z_step {
            grid.push(hi);
        }
        grid
    }

    pub fn port_counts(&self) -> std::ops::RangeInclusive<u32> {
        self.n_range.0..=self.n_range.1
    }

    fn rule(&self) -> ThetaRule {
        ThetaRule::GaussChebyshev(self.theta_nodes)
    }
}

/// Delivered bits per joule for one block.
#[allow(clippy::too_many_arguments)]
pub fn energy_efficiency(
    payload_bits: f64,
    eps_o: f64,
    p2: f64,
    blocklength: u32,
    bandwidth: f64,
    n: u32,
    port_time: f64,
    circuit_power: f64,
    switch_power: f64,
) -> Result<f64> {
    if !(0.0..=1.0).contains(&eps_o) {
        return Err(Error::domain(format!("BLER must lie in [0, 1], got {eps_o}")));
    }
    let block_time = f64::from(blocklength) / bandwidth;
    let switch_time = f64::from(n) * port_time;
    if violates_causality(switch_time, block_time) {
        return Err(Error::Causality {
            ports: n,
            port_time,
            block_time,
        });
    }
    let energy = p2 * (block_time - switch_time) + circuit_power * block_time + switch_power * switch_time;
    Ok(payload_bits * (1.0 - eps_o) / energy)
}

/// Outcome of the power minimization at one operating point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerSolution {
    Feasible {
        p2: f64,
        /// Trajectory-averaged BLER at `p2`.
        bler: f64,
        iterations: u32,
    },
    /// The threshold is missed even at `p_max`.
    Infeasible { bler_at_max: f64 },
}

impl PowerSolution {
    pub fn power(&self) -> Option<f64> {
        match *self {
            PowerSolution::Feasible { p2, .. } => Some(p2),
            PowerSolution::Infeasible { .. } => None,
        }
    }

    pub fn is_feasible(&self) -> bool {
        matches!(self, PowerSolution::Feasible { .. })
    }
}

/// Smallest `P₂` meeting the BLER threshold for a prebuilt trajectory model.
pub fn min_power_with(model: &TrajectoryModel, ee: &EeConfig) -> Result<PowerSolution> {
    let lo = (ee.p_max * BRACKET_FLOOR).ln();
    let hi = ee.p_max.ln();
    let grid: Vec<f64> = (0..MONOTONE_GRID)
        .map(|i| lo + (hi - lo) * i as f64 / (MONOTONE_GRID - 1) as f64)
        .collect();
    let values = grid
        .iter()
        .map(|&x| model.overall(x.exp()))
        .collect::<Result<Vec<_>>>()?;
    for (i, w) in values.windows(2).enumerate() {
        if w[1] > w[0] * (1.0 + MONOTONE_SLACK) {
            return Err(Error::Monotonicity(format!(
                "BLER rises from {:e} to {:e} between P2 = {:e} W and {:e} W",
                w[0],
                w[1],
                grid[i].exp(),
                grid[i + 1].exp()
            )));
        }
    }
    let th = ee.bler_threshold;
    let last = values[MONOTONE_GRID - 1];
    if last > th {
        return Ok(PowerSolution::Infeasible { bler_at_max: last });
    }
    let Some(k) = values.iter().position(|&v| v <= th) else {
        unreachable!("the last grid value meets the threshold");
    };
    if k == 0 {
        return Ok(PowerSolution::Feasible {
            p2: grid[0].exp(),
            bler: values[0],
            iterations: 0,
        });
    }
    // Invariant: ε(e^a) > th ≥ ε(e^b).
    let (mut a, mut b, mut eps_b) = (grid[k - 1], grid[k], values[k]);
    let tol = ee.bisect_tol.ln_1p();
    let mut iterations = 0;
    while b - a > tol && iterations < ee.max_bisect_iters {
        let mid = 0.5 * (a + b);
        let eps = model.overall(mid.exp())?;
        if eps <= th {
            b = mid;
            eps_b = eps;
        } else {
            a = mid;
        }
        iterations += 1;
    }
    Ok(PowerSolution::Feasible {
        p2: b.exp(),
        bler: eps_b,
        iterations,
    })
}

fn model_at(cfg: &ScenarioConfig, fas: &FasSpectrum, fbl: &FblParams, ee: &EeConfig, z_u: f64) -> Result<TrajectoryModel> {
    let cfg = ScenarioConfig {
        uav_altitude: z_u,
        ..cfg.clone()
    };
    TrajectoryModel::new(&cfg, fas, fbl, ee.rule())
}

/// Smallest `P₂ ≤ p_max` with trajectory-averaged BLER at most the threshold.
pub fn min_power(
    cfg: &ScenarioConfig,
    fas: &FasSpectrum,
    fbl: &FblParams,
    ee: &EeConfig,
    z_u: f64,
) -> Result<PowerSolution> {
    ee.validate()?;
    min_power_with(&model_at(cfg, fas, fbl, ee, z_u)?, ee)
}

/// One evaluated `(L, Z_U, N)` point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TracePoint {
    pub blocklength: u32,
    pub z_u: f64,
    pub n: u32,
    pub n_eff: usize,
    /// `false` when `N τ_p ≥ T_block`; such points are never solved.
    pub causal: bool,
    pub power: Option<PowerSolution>,
    /// Zero unless `feasible`.
    pub ee: f64,
    pub feasible: bool,
}

impl TracePoint {
    pub fn p2(&self) -> Option<f64> {
        self.power.and_then(|p| p.power())
    }

    pub fn bler(&self) -> Option<f64> {
        match self.power {
            Some(PowerSolution::Feasible { bler, .. }) => Some(bler),
            Some(PowerSolution::Infeasible { bler_at_max }) => Some(bler_at_max),
            None => None,
        }
    }

    fn beats(&self, other: &TracePoint) -> bool {
        self.feasible && (!other.feasible || self.ee > other.ee)
    }
}

/// Jakes spectra for every port count in range at one aperture.
#[derive(Debug, Clone)]
pub struct SpectrumCache {
    aperture: f64,
    spectra: Vec<(u32, FasSpectrum)>,
}

impl SpectrumCache {
    pub fn new(ee: &EeConfig, aperture: f64) -> Result<Self> {
        let spectra = ee
            .port_counts()
            .map(|n| Ok((n, FasSpectrum::new(n as usize, aperture, ee.rank_tolerance)?)))
            .collect::<Result<Vec<_>>>()?;
        Ok(SpectrumCache { aperture, spectra })
    }

    pub fn aperture(&self) -> f64 {
        self.aperture
    }

    pub fn get(&self, n: u32) -> Option<&FasSpectrum> {
        self.spectra.iter().find(|(k, _)| *k == n).map(|(_, s)| s)
    }
}

/// Every port count at one `(L, Z_U)` and the EE-maximizing choice.
#[derive(Debug, Clone, PartialEq)]
pub struct PortSearch {
    pub points: Vec<TracePoint>,
    /// Index of the best point; the smallest `N` wins ties.
    pub best: usize,
}

impl PortSearch {
    pub fn best(&self) -> &TracePoint {
        &self.points[self.best]
    }
}

fn argmax(points: &[TracePoint]) -> usize {
    let mut best = 0;
    for (i, p) in points.iter().enumerate().skip(1) {
        if p.beats(&points[best]) {
            best = i;
        }
    }
    best
}

fn search_ports(
    cfg: &ScenarioConfig,
    fbl: &FblParams,
    ee: &EeConfig,
    cache: &SpectrumCache,
    z_u: f64,
) -> Result<PortSearch> {
    let l = fbl.blocklength;
    let mut base: Option<TrajectoryModel> = None;
    let mut points = Vec::new();
    for (n, fas) in &cache.spectra {
        let mut point = TracePoint {
            blocklength: l,
            z_u,
            n: *n,
            n_eff: fas.n_eff,
            causal: ee.is_causal(*n, l),
            power: None,
            ee: 0.0,
            feasible: false,
        };
        if point.causal {
            let model = match &base {
                Some(m) => m.with_spectrum(cfg, fas)?,
                None => model_at(cfg, fas, fbl, ee, z_u)?,
            };
            let sol = min_power_with(&model, ee)?;
            if let PowerSolution::Feasible { p2, bler, .. } = sol {
                point.ee = ee.efficiency(bler, p2, l, *n)?;
                point.feasible = true;
            }
            point.power = Some(sol);
            base.get_or_insert(model);
        }
        points.push(point);
    }
    let best = argmax(&points);
    Ok(PortSearch { points, best })
}

/// EE-maximizing port count at fixed blocklength and altitude.
pub fn best_port_count(
    cfg: &ScenarioConfig,
    fbl: &FblParams,
    ee: &EeConfig,
    z_u: f64,
    aperture: f64,
) -> Result<PortSearch> {
    ee.validate()?;
    search_ports(cfg, fbl, ee, &SpectrumCache::new(ee, aperture)?, z_u)
}

/// Port searches over the altitude grid and the EE-maximizing altitude.
#[derive(Debug, Clone, PartialEq)]
pub struct AltitudeSearch {
    pub altitudes: Vec<PortSearch>,
    /// Index into `altitudes`; the lowest altitude wins ties.
    pub best: usize,
}

impl AltitudeSearch {
    pub fn best(&self) -> &TracePoint {
        self.altitudes[self.best].best()
    }
}

fn search_altitudes(cfg: &ScenarioConfig, fbl: &FblParams, ee: &EeConfig, cache: &SpectrumCache) -> Result<AltitudeSearch> {
    let altitudes = ee
        .altitude_grid()
        .into_par_iter()
        .map(|z| search_ports(cfg, fbl, ee, cache, z))
        .collect::<Result<Vec<_>>>()?;
    let tops: Vec<TracePoint> = altitudes.iter().map(|s| *s.best()).collect();
    let best = argmax(&tops);
    Ok(AltitudeSearch { altitudes, best })
}

/// Grid search over altitude, each point solved by [`best_port_count`].
pub fn best_altitude(cfg: &ScenarioConfig, fbl: &FblParams, ee: &EeConfig, aperture: f64) -> Result<AltitudeSearch> {
    ee.validate()?;
    search_altitudes(cfg, fbl, ee, &SpectrumCache::new(ee, aperture)?)
}

/// Jointly optimized operating point.
#[derive(Debug, Clone, PartialEq)]
pub struct EeSolution {
    pub l_star: u32,
    pub z_star: f64,
    pub n_star: u32,
    /// `NaN` when infeasible.
    pub p2_star: f64,
    /// Trajectory-averaged BLER at the solution.
    pub bler_star: f64,
    pub ee_star: f64,
    pub feasible: bool,
    /// Every `(L, Z_U, N)` point, ordered by `L`, then `Z_U`, then `N`.
    pub trace: Vec<TracePoint>,
}

/// Exhaustive search over the blocklength set, each solved by [`best_altitude`].
pub fn global_optimize(cfg: &ScenarioConfig, ee: &EeConfig, aperture: f64) -> Result<EeSolution> {
    ee.validate()?;
    let cache = SpectrumCache::new(ee, aperture)?;
    let mut l_set = ee.l_set.clone();
    l_set.sort_unstable();
    l_set.dedup();
    let mut trace = Vec::new();
    let mut best: Option<TracePoint> = None;
    for &l in &l_set {
        let fbl = FblParams::new(ee.payload_bits, l, ee.chi_variant)?;
        let search = search_altitudes(cfg, &fbl, ee, &cache)?;
        let top = *search.best();
        if best.as_ref().is_none_or(|b| top.beats(b)) {
            best = Some(top);
        }
        trace.extend(search.altitudes.into_iter().flat_map(|s| s.points));
    }
    let Some(best) = best else {
        unreachable!("validated blocklength set is non-empty");
    };
    Ok(EeSolution {
        l_star: best.blocklength,
        z_star: best.z_u,
        n_star: best.n,
        p2_star: best.p2().unwrap_or(f64::NAN),
        bler_star: best.bler().unwrap_or(f64::NAN),
        ee_star: best.ee,
        feasible: best.feasible,
        trace,
    })
}
