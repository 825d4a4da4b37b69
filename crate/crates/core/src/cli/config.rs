//! Flat `key = value` experiment files.
//!
//! Lines are `key = value`; `#` starts a comment. Quantities take an optional
//! unit suffix (`40 dBm`, `2.5 GHz`, `2 us`); without one the SI unit is
//! assumed. Sweep axes are comma lists or `start:step:stop` ranges with one
//! trailing unit.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::PathBuf;

use crate::blercore::ChiVariant;
use crate::error::{Error, Result};
use crate::geometry::{dbm_to_watts, ScenarioConfig};
use crate::mcoracle::{McConfig, McMode};
use crate::optimizer::EeConfig;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub enum Command {
    #[default]
    BlerSweep,
    Validate,
    ApertureSweep,
    PowerVsAltitude,
    EeVsPorts,
    EeContour,
    Optimize,
}

impl Command {
    pub const ALL: [Command; 7] = [
        Command::BlerSweep,
        Command::Validate,
        Command::ApertureSweep,
        Command::PowerVsAltitude,
        Command::EeVsPorts,
        Command::EeContour,
        Command::Optimize,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Command::BlerSweep => "bler-sweep",
            Command::Validate => "validate",
            Command::ApertureSweep => "aperture-sweep",
            Command::PowerVsAltitude => "power-vs-altitude",
            Command::EeVsPorts => "ee-vs-ports",
            Command::EeContour => "ee-contour",
            Command::Optimize => "optimize",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Settings of the closed-form analysis commands.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    pub blocklength: u32,
    pub ports: u32,
    /// Aperture in wavelengths.
    pub aperture: f64,
    pub theta_nodes: usize,
}

impl Default for AnalysisConfig {
    fn default() -> Self {
        AnalysisConfig {
            blocklength: 100,
            ports: 2,
            aperture: 0.5,
            theta_nodes: 128,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepAxes {
    pub p2_dbm: Vec<f64>,
    pub ports: Vec<u32>,
    /// Apertures in wavelengths.
    pub apertures: Vec<f64>,
}

impl Default for SweepAxes {
    fn default() -> Self {
        SweepAxes {
            p2_dbm: (1..=10).map(|k| 5.0 * f64::from(k)).collect(),
            ports: vec![1, 2],
            apertures: vec![0.5, 1.0, 2.0, 4.0],
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ExperimentSpec {
    pub command: Command,
    pub scenario: ScenarioConfig,
    pub analysis: AnalysisConfig,
    pub ee: EeConfig,
    /// Monte Carlo settings; always present for `validate`.
    pub mc: Option<McConfig>,
    pub axes: SweepAxes,
    pub output_path: Option<PathBuf>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Unit {
    Power,
    Decibel,
    Frequency,
    Time,
    Length,
    Wavelength,
    Plain,
}

impl Unit {
    fn scale(self, suffix: &str) -> Option<Scale> {
        use Scale::{Dbm, Factor};
        Some(match (self, suffix) {
            (Unit::Power, "" | "W") => Factor(1.0),
            (Unit::Power, "mW") => Factor(1e-3),
            (Unit::Power, "uW" | "µW") => Factor(1e-6),
            (Unit::Power, "dBm") => Dbm(0.0),
            (Unit::Power, "dBW") => Dbm(30.0),
            (Unit::Decibel, "" | "dB") => Factor(1.0),
            (Unit::Frequency, "" | "Hz") => Factor(1.0),
            (Unit::Frequency, "kHz") => Factor(1e3),
            (Unit::Frequency, "MHz") => Factor(1e6),
            (Unit::Frequency, "GHz") => Factor(1e9),
            (Unit::Time, "" | "s") => Factor(1.0),
            (Unit::Time, "ms") => Factor(1e-3),
            (Unit::Time, "us" | "µs") => Factor(1e-6),
            (Unit::Time, "ns") => Factor(1e-9),
            (Unit::Length, "" | "m") => Factor(1.0),
            (Unit::Length, "km") => Factor(1e3),
            (Unit::Wavelength, "" | "lambda" | "λ") => Factor(1.0),
            (Unit::Plain, "") => Factor(1.0),
            _ => return None,
        })
    }

    fn accepted(self) -> &'static str {
        match self {
            Unit::Power => "W, mW, uW, dBm or dBW",
            Unit::Decibel => "dB",
            Unit::Frequency => "Hz, kHz, MHz or GHz",
            Unit::Time => "s, ms, us or ns",
            Unit::Length => "m or km",
            Unit::Wavelength => "lambda",
            Unit::Plain => "no unit",
        }
    }
}

#[derive(Debug, Clone, Copy)]
enum Scale {
    Factor(f64),
    /// Decibels relative to one milliwatt, with an offset.
    Dbm(f64),
}

impl Scale {
    fn to_watts_or_si(self, x: f64) -> f64 {
        match self {
            Scale::Factor(f) => x * f,
            Scale::Dbm(offset) => dbm_to_watts(x + offset),
        }
    }

    fn to_dbm(self, x: f64) -> f64 {
        match self {
            Scale::Factor(f) => crate::geometry::watts_to_dbm(x * f),
            Scale::Dbm(offset) => x + offset,
        }
    }
}

/// Splits `"2.5 GHz"` or `"2.5GHz"` into the number text and its suffix.
fn split_unit(text: &str) -> (&str, &str) {
    let text = text.trim();
    let start = text
        .char_indices()
        .rev()
        .take_while(|(_, c)| c.is_alphabetic())
        .last()
        .map_or(text.len(), |(i, _)| i);
    (text[..start].trim_end(), &text[start..])
}

struct Ctx<'a> {
    line: usize,
    key: &'a str,
}

impl Ctx<'_> {
    fn parse_err(&self, detail: impl Into<String>) -> Error {
        Error::Parse {
            line: self.line,
            detail: format!("`{}`: {}", self.key, detail.into()),
        }
    }

    fn unit_err(&self, unit: Unit, suffix: &str) -> Error {
        Error::UnitMismatch {
            line: self.line,
            key: self.key.to_string(),
            detail: format!("unit `{suffix}` not accepted, expected {}", unit.accepted()),
        }
    }

    fn number(&self, text: &str) -> Result<f64> {
        let v: f64 = text
            .trim()
            .parse()
            .map_err(|_| self.parse_err(format!("`{}` is not a number", text.trim())))?;
        if !v.is_finite() {
            return Err(self.parse_err("value must be finite"));
        }
        Ok(v)
    }

    fn scaled(&self, text: &str, unit: Unit) -> Result<(f64, Scale)> {
        let (num, suffix) = split_unit(text);
        let scale = unit.scale(suffix).ok_or_else(|| self.unit_err(unit, suffix))?;
        Ok((self.number(num)?, scale))
    }

    fn quantity(&self, text: &str, unit: Unit) -> Result<f64> {
        let (v, scale) = self.scaled(text, unit)?;
        Ok(scale.to_watts_or_si(v))
    }

    fn positive(&self, text: &str, unit: Unit) -> Result<f64> {
        let v = self.quantity(text, unit)?;
        if !(v > 0.0) {
            return Err(self.parse_err(format!("must be positive, got {v}")));
        }
        Ok(v)
    }

    fn non_negative(&self, text: &str, unit: Unit) -> Result<f64> {
        let v = self.quantity(text, unit)?;
        if !(v >= 0.0) {
            return Err(self.parse_err(format!("must be non-negative, got {v}")));
        }
        Ok(v)
    }

    fn probability(&self, text: &str) -> Result<f64> {
        let v = self.quantity(text, Unit::Plain)?;
        if !(v > 0.0 && v < 1.0) {
            return Err(self.parse_err(format!("must lie in (0, 1), got {v}")));
        }
        Ok(v)
    }

    fn integer(&self, text: &str, min: u64) -> Result<u64> {
        let t = text.trim();
        let v: u64 = t
            .parse()
            .map_err(|_| self.parse_err(format!("`{t}` is not an integer")))?;
        if v < min {
            return Err(self.parse_err(format!("must be at least {min}, got {v}")));
        }
        Ok(v)
    }

    fn small_int(&self, text: &str, min: u64) -> Result<u32> {
        let v = self.integer(text, min)?;
        u32::try_from(v).map_err(|_| self.parse_err(format!("{v} is too large")))
    }

    fn position(&self, text: &str) -> Result<[f64; 3]> {
        let (body, suffix) = split_unit(text);
        let scale = Unit::Length
            .scale(suffix)
            .ok_or_else(|| self.unit_err(Unit::Length, suffix))?;
        let parts: Vec<&str> = body.split(',').collect();
        if parts.len() != 3 {
            return Err(self.parse_err("expected three comma-separated coordinates"));
        }
        let mut out = [0.0; 3];
        for (o, p) in out.iter_mut().zip(parts) {
            *o = scale.to_watts_or_si(self.number(p)?);
        }
        Ok(out)
    }

    /// Raw numbers of a list or `start:step:stop` range, and the shared unit.
    fn axis(&self, text: &str, unit: Unit) -> Result<(Vec<f64>, Scale)> {
        let (body, suffix) = split_unit(text);
        let scale = unit.scale(suffix).ok_or_else(|| self.unit_err(unit, suffix))?;
        let values = if body.contains(':') {
            let parts = body
                .split(':')
                .map(|p| self.number(p))
                .collect::<Result<Vec<_>>>()?;
            let [start, step, stop] = parts[..] else {
                return Err(self.parse_err("ranges are written start:step:stop"));
            };
            if !(step > 0.0) || stop < start {
                return Err(self.parse_err("range needs step > 0 and stop >= start"));
            }
            let count = ((stop - start) / step + 1e-9).floor() as usize + 1;
            (0..count).map(|k| start + k as f64 * step).collect()
        } else {
            body.split(',').map(|p| self.number(p)).collect::<Result<Vec<_>>>()?
        };
        if values.is_empty() {
            return Err(self.parse_err("axis needs at least one point"));
        }
        Ok((values, scale))
    }

    fn int_list(&self, text: &str, min: u64) -> Result<Vec<u32>> {
        let t = text.trim();
        if t.contains(':') {
            let parts = t
                .split(':')
                .map(|p| self.small_int(p, 0))
                .collect::<Result<Vec<_>>>()?;
            let [start, step, stop] = parts[..] else {
                return Err(self.parse_err("ranges are written start:step:stop"));
            };
            if step == 0 || stop < start || u64::from(start) < min {
                return Err(self.parse_err(format!("range needs step > 0, stop >= start and start >= {min}")));
            }
            Ok((start..=stop).step_by(step as usize).collect())
        } else {
            t.split(',').map(|p| self.small_int(p, min)).collect()
        }
    }
}

/// Every recognized key, in rendering order.
pub const KEYS: &[&str] = &[
    "command",
    "output",
    "bs_position",
    "ue_position",
    "flight_radius",
    "uav_altitude",
    "los_a",
    "los_b",
    "eta_los",
    "eta_nlos",
    "carrier_freq",
    "noise_power",
    "p1",
    "m_los",
    "m_nlos",
    "payload_bits",
    "blocklength",
    "chi_variant",
    "ports",
    "aperture",
    "rank_tolerance",
    "theta_nodes",
    "bandwidth",
    "circuit_power",
    "switch_power",
    "port_time",
    "bler_threshold",
    "p_max",
    "z_min",
    "z_max",
    "z_step",
    "l_set",
    "n_min",
    "n_max",
    "bisect_tol",
    "max_bisect_iters",
    "opt_theta_nodes",
    "p2_sweep",
    "port_sweep",
    "aperture_sweep",
    "seed",
    "mc_trials",
    "mc_mode",
    "mc_batch",
];

fn apply(spec: &mut ExperimentSpec, c: &Ctx, v: &str) -> Result<()> {
    let s = &mut spec.scenario;
    let ee = &mut spec.ee;
    match c.key {
        "command" => {
            spec.command = Command::from_name(v).ok_or_else(|| c.parse_err(format!("unknown command `{v}`")))?;
        }
        "output" => spec.output_path = Some(PathBuf::from(v)),
        "bs_position" => s.bs_position = c.position(v)?,
        "ue_position" => s.ue_position = c.position(v)?,
        "flight_radius" => s.flight_radius = c.positive(v, Unit::Length)?,
        "uav_altitude" => s.uav_altitude = c.quantity(v, Unit::Length)?,
        "los_a" => s.los_a = c.positive(v, Unit::Plain)?,
        "los_b" => s.los_b = c.positive(v, Unit::Plain)?,
        "eta_los" => s.eta_los_db = c.quantity(v, Unit::Decibel)?,
        "eta_nlos" => s.eta_nlos_db = c.quantity(v, Unit::Decibel)?,
        "carrier_freq" => s.carrier_freq = c.positive(v, Unit::Frequency)?,
        "noise_power" => s.noise_power = c.positive(v, Unit::Power)?,
        "p1" => s.p1 = c.positive(v, Unit::Power)?,
        "m_los" => s.m_los = c.small_int(v, 1)?,
        "m_nlos" => s.m_nlos = c.small_int(v, 1)?,
        "payload_bits" => ee.payload_bits = c.positive(v, Unit::Plain)?,
        "blocklength" => spec.analysis.blocklength = c.small_int(v, 1)?,
        "chi_variant" => {
            ee.chi_variant =
                ChiVariant::from_name(v).ok_or_else(|| c.parse_err(format!("unknown chi variant `{v}`")))?;
        }
        "ports" => spec.analysis.ports = c.small_int(v, 1)?,
        "aperture" => spec.analysis.aperture = c.positive(v, Unit::Wavelength)?,
        "rank_tolerance" => ee.rank_tolerance = c.probability(v)?,
        "theta_nodes" => spec.analysis.theta_nodes = c.integer(v, 2)? as usize,
        "bandwidth" => ee.bandwidth = c.positive(v, Unit::Frequency)?,
        "circuit_power" => ee.circuit_power = c.non_negative(v, Unit::Power)?,
        "switch_power" => ee.switch_power = c.non_negative(v, Unit::Power)?,
        "port_time" => ee.port_time = c.positive(v, Unit::Time)?,
        "bler_threshold" => ee.bler_threshold = c.probability(v)?,
        "p_max" => ee.p_max = c.positive(v, Unit::Power)?,
        "z_min" => ee.z_range.0 = c.quantity(v, Unit::Length)?,
        "z_max" => ee.z_range.1 = c.quantity(v, Unit::Length)?,
        "z_step" => ee.z_step = c.positive(v, Unit::Length)?,
        "l_set" => ee.l_set = c.int_list(v, 1)?,
        "n_min" => ee.n_range.0 = c.small_int(v, 1)?,
        "n_max" => ee.n_range.1 = c.small_int(v, 1)?,
        "bisect_tol" => ee.bisect_tol = c.probability(v)?,
        "max_bisect_iters" => ee.max_bisect_iters = c.small_int(v, 1)?,
        "opt_theta_nodes" => ee.theta_nodes = c.integer(v, 2)? as usize,
        "p2_sweep" => {
            let (raw, scale) = c.axis(v, Unit::Power)?;
            spec.axes.p2_dbm = raw.into_iter().map(|x| scale.to_dbm(x)).collect();
        }
        "port_sweep" => spec.axes.ports = c.int_list(v, 1)?,
        "aperture_sweep" => {
            let (raw, _) = c.axis(v, Unit::Wavelength)?;
            if raw.iter().any(|&w| !(w > 0.0)) {
                return Err(c.parse_err("apertures must be positive"));
            }
            spec.axes.apertures = raw;
        }
        "seed" => spec.mc.get_or_insert_with(McConfig::default).seed = c.integer(v, 0)?,
        "mc_trials" => spec.mc.get_or_insert_with(McConfig::default).trials = c.integer(v, 1)?,
        "mc_batch" => spec.mc.get_or_insert_with(McConfig::default).batch = c.integer(v, 1)?,
        "mc_mode" => {
            let mode = McMode::from_name(v).ok_or_else(|| c.parse_err(format!("unknown Monte Carlo mode `{v}`")))?;
            spec.mc.get_or_insert_with(McConfig::default).mode = mode;
        }
        _ => {
            return Err(Error::UnknownKey {
                line: c.line,
                key: c.key.to_string(),
            })
        }
    }
    Ok(())
}

/// Parses and validates an experiment file; unset keys keep their defaults.
pub fn parse_config(text: &str) -> Result<ExperimentSpec> {
    let mut spec = ExperimentSpec::default();
    let mut lines: HashMap<&str, usize> = HashMap::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        let content = raw.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let Some((key, value)) = content.split_once('=') else {
            return Err(Error::Parse {
                line,
                detail: format!("expected `key = value`, got `{content}`"),
            });
        };
        let (key, value) = (key.trim(), value.trim());
        if let Some(first) = lines.insert(key, line) {
            return Err(Error::Parse {
                line,
                detail: format!("`{key}` already set on line {first}"),
            });
        }
        if value.is_empty() {
            return Err(Error::Parse {
                line,
                detail: format!("`{key}` has no value"),
            });
        }
        apply(&mut spec, &Ctx { line, key }, value)?;
    }
    if spec.command == Command::Validate {
        spec.mc.get_or_insert_with(McConfig::default);
    }
    let line_of = |keys: &[&str]| keys.iter().filter_map(|k| lines.get(k).copied()).max().unwrap_or(0);
    let checks: [(&[&str], Result<()>); 3] = [
        (
            &["bs_position", "ue_position", "uav_altitude", "eta_los", "eta_nlos"],
            spec.scenario.validate(),
        ),
        (&["z_min", "z_max", "n_min", "n_max", "l_set"], spec.ee.validate()),
        (
            &["seed", "mc_trials", "mc_batch", "mc_mode"],
            spec.mc.map_or(Ok(()), |m| m.validate()),
        ),
    ];
    for (keys, check) in checks {
        if let Err(e) = check {
            return Err(Error::Parse {
                line: line_of(keys),
                detail: e.to_string(),
            });
        }
    }
    Ok(spec)
}

fn join<T: std::fmt::Display>(xs: &[T]) -> String {
    xs.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(", ")
}

/// Emits every setting of `spec` in the format read by [`parse_config`].
pub fn render(spec: &ExperimentSpec) -> String {
    let s = &spec.scenario;
    let ee = &spec.ee;
    let a = &spec.analysis;
    let mut out = String::new();
    let mut put = |k: &str, v: String| {
        let _ = writeln!(out, "{k} = {v}");
    };
    put("command", spec.command.name().to_string());
    if let Some(p) = &spec.output_path {
        put("output", p.display().to_string());
    }
    put("bs_position", format!("{} m", join(&s.bs_position)));
    put("ue_position", format!("{} m", join(&s.ue_position)));
    put("flight_radius", format!("{} m", s.flight_radius));
    put("uav_altitude", format!("{} m", s.uav_altitude));
    put("los_a", s.los_a.to_string());
    put("los_b", s.los_b.to_string());
    put("eta_los", format!("{} dB", s.eta_los_db));
    put("eta_nlos", format!("{} dB", s.eta_nlos_db));
    put("carrier_freq", format!("{} Hz", s.carrier_freq));
    put("noise_power", format!("{} W", s.noise_power));
    put("p1", format!("{} W", s.p1));
    put("m_los", s.m_los.to_string());
    put("m_nlos", s.m_nlos.to_string());
    put("payload_bits", ee.payload_bits.to_string());
    put("blocklength", a.blocklength.to_string());
    put("chi_variant", ee.chi_variant.name().to_string());
    put("ports", a.ports.to_string());
    put("aperture", format!("{} lambda", a.aperture));
    put("rank_tolerance", ee.rank_tolerance.to_string());
    put("theta_nodes", a.theta_nodes.to_string());
    put("bandwidth", format!("{} Hz", ee.bandwidth));
    put("circuit_power", format!("{} W", ee.circuit_power));
    put("switch_power", format!("{} W", ee.switch_power));
    put("port_time", format!("{} s", ee.port_time));
    put("bler_threshold", ee.bler_threshold.to_string());
    put("p_max", format!("{} W", ee.p_max));
    put("z_min", format!("{} m", ee.z_range.0));
    put("z_max", format!("{} m", ee.z_range.1));
    put("z_step", format!("{} m", ee.z_step));
    put("l_set", join(&ee.l_set));
    put("n_min", ee.n_range.0.to_string());
    put("n_max", ee.n_range.1.to_string());
    put("bisect_tol", ee.bisect_tol.to_string());
    put("max_bisect_iters", ee.max_bisect_iters.to_string());
    put("opt_theta_nodes", ee.theta_nodes.to_string());
    put("p2_sweep", format!("{} dBm", join(&spec.axes.p2_dbm)));
    put("port_sweep", join(&spec.axes.ports));
    put("aperture_sweep", format!("{} lambda", join(&spec.axes.apertures)));
    if let Some(mc) = &spec.mc {
        put("seed", mc.seed.to_string());
        put("mc_trials", mc.trials.to_string());
        put("mc_batch", mc.batch.to_string());
        put("mc_mode", mc.mode.name().to_string());
    }
    out
}
