//! Executes an [`ExperimentSpec`] and writes its CSV and metadata sidecar.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::config::{render, Command, ExperimentSpec};
use crate::blercore::{FblParams, TrajectoryModel};
use crate::chanmodel::FasSpectrum;
use crate::error::{Error, Result};
use crate::geometry::{dbm_to_watts, watts_to_dbm, ScenarioConfig};
use crate::mcoracle::{derive_seed, mc_average_bler, McConfig};
use crate::optimizer::{best_altitude, best_port_count, global_optimize, min_power_with, PowerSolution, TracePoint};
use crate::quadrature::ThetaRule;

/// Rows of one experiment, every cell already formatted.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl Table {
    fn new(columns: &[&str]) -> Self {
        Table {
            header: columns.iter().map(|c| c.to_string()).collect(),
            rows: Vec::new(),
        }
    }

    fn push(&mut self, row: Vec<String>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    /// Appends constant columns not already present.
    fn echo(&mut self, fixed: Vec<(&str, String)>) {
        for (name, value) in fixed {
            if self.header.iter().any(|h| h == name) {
                continue;
            }
            self.header.push(name.to_string());
            for r in &mut self.rows {
                r.push(value.clone());
            }
        }
    }

    pub fn column(&self, name: &str) -> Option<Vec<&str>> {
        let i = self.header.iter().position(|h| h == name)?;
        Some(self.rows.iter().map(|r| r[i].as_str()).collect())
    }
}

fn num(x: f64) -> String {
    x.to_string()
}

fn opt(x: Option<f64>) -> String {
    x.map(num).unwrap_or_default()
}

fn dbm(w: f64) -> String {
    num(watts_to_dbm(w))
}

fn with_altitude(cfg: &ScenarioConfig, z: f64) -> ScenarioConfig {
    ScenarioConfig {
        uav_altitude: z,
        ..cfg.clone()
    }
}

fn fbl_of(spec: &ExperimentSpec, blocklength: u32) -> Result<FblParams> {
    FblParams::new(spec.ee.payload_bits, blocklength, spec.ee.chi_variant)
}

fn spectrum(spec: &ExperimentSpec, n: u32, aperture: f64) -> Result<FasSpectrum> {
    FasSpectrum::new(n as usize, aperture, spec.ee.rank_tolerance)
}

fn analysis_model(spec: &ExperimentSpec, fas: &FasSpectrum) -> Result<TrajectoryModel> {
    TrajectoryModel::new(
        &spec.scenario,
        fas,
        &fbl_of(spec, spec.analysis.blocklength)?,
        ThetaRule::GaussChebyshev(spec.analysis.theta_nodes),
    )
}

/// Monte Carlo columns for row `index`, seeded by `derive_seed(seed, index)`.
fn mc_cells(spec: &ExperimentSpec, fas: &FasSpectrum, p2: f64, index: usize) -> Result<Vec<String>> {
    let Some(mc) = spec.mc else {
        return Ok(Vec::new());
    };
    let point = McConfig {
        seed: derive_seed(mc.seed, index as u64),
        ..mc
    };
    let fbl = fbl_of(spec, spec.analysis.blocklength)?;
    let est = mc_average_bler(&spec.scenario, fas, &fbl, p2, &point)?;
    Ok(vec![num(est.mean), num(est.std_error)])
}

const MC_COLUMNS: [&str; 2] = ["bler_mc", "bler_mc_se"];

fn bler_columns<'a>(lead: &[&'a str], spec: &ExperimentSpec) -> Vec<&'a str> {
    let mut cols = lead.to_vec();
    cols.extend(["p2_dbm", "bler_hop1", "bler_hop2", "bler_analytic"]);
    if spec.mc.is_some() {
        cols.extend(MC_COLUMNS);
    }
    cols
}

fn analytic_cells(model: &TrajectoryModel, p2_dbm: f64) -> Result<Vec<String>> {
    let p2 = dbm_to_watts(p2_dbm);
    Ok(vec![
        num(p2_dbm),
        num(model.floor()),
        num(model.hop2_mixed_mean(p2)?),
        num(model.overall(p2)?),
    ])
}

fn bler_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let mut t = Table::new(&bler_columns(&["ports", "n_eff"], spec));
    for &n in &spec.axes.ports {
        let fas = spectrum(spec, n, spec.analysis.aperture)?;
        let model = analysis_model(spec, &fas)?;
        for &p in &spec.axes.p2_dbm {
            let mut row = vec![n.to_string(), fas.n_eff.to_string()];
            row.extend(analytic_cells(&model, p)?);
            row.extend(mc_cells(spec, &fas, dbm_to_watts(p), t.rows.len())?);
            t.push(row);
        }
    }
    Ok(t)
}

fn validate(spec: &ExperimentSpec) -> Result<Table> {
    let mut t = Table::new(&["ports", "n_eff", "p2_dbm", "bler_analytic", "bler_mc", "bler_mc_se", "mc_seed", "within_3se"]);
    let mc = spec.mc.unwrap_or_default();
    let fas = spectrum(spec, spec.analysis.ports, spec.analysis.aperture)?;
    let model = analysis_model(spec, &fas)?;
    let fbl = fbl_of(spec, spec.analysis.blocklength)?;
    for (i, &p) in spec.axes.p2_dbm.iter().enumerate() {
        let p2 = dbm_to_watts(p);
        let analytic = model.overall(p2)?;
        let point = McConfig {
            seed: derive_seed(mc.seed, i as u64),
            ..mc
        };
        let est = mc_average_bler(&spec.scenario, &fas, &fbl, p2, &point)?;
        t.push(vec![
            spec.analysis.ports.to_string(),
            fas.n_eff.to_string(),
            num(p),
            num(analytic),
            num(est.mean),
            num(est.std_error),
            point.seed.to_string(),
            ((analytic - est.mean).abs() <= 3.0 * est.std_error).to_string(),
        ]);
    }
    Ok(t)
}

fn aperture_sweep(spec: &ExperimentSpec) -> Result<Table> {
    let mut t = Table::new(&bler_columns(&["aperture", "n_eff"], spec));
    for &w in &spec.axes.apertures {
        let fas = spectrum(spec, spec.analysis.ports, w)?;
        let model = analysis_model(spec, &fas)?;
        for &p in &spec.axes.p2_dbm {
            let mut row = vec![num(w), fas.n_eff.to_string()];
            row.extend(analytic_cells(&model, p)?);
            row.extend(mc_cells(spec, &fas, dbm_to_watts(p), t.rows.len())?);
            t.push(row);
        }
    }
    Ok(t)
}

fn power_vs_altitude(spec: &ExperimentSpec) -> Result<Table> {
    let mut t = Table::new(&["ports", "n_eff", "uav_altitude", "p2_star_dbm", "bler", "feasible"]);
    let fbl = fbl_of(spec, spec.analysis.blocklength)?;
    let rule = ThetaRule::GaussChebyshev(spec.ee.theta_nodes);
    for &n in &spec.axes.ports {
        let fas = spectrum(spec, n, spec.analysis.aperture)?;
        for z in spec.ee.altitude_grid() {
            let model = TrajectoryModel::new(&with_altitude(&spec.scenario, z), &fas, &fbl, rule)?;
            let sol = min_power_with(&model, &spec.ee)?;
            let bler = match sol {
                PowerSolution::Feasible { bler, .. } => bler,
                PowerSolution::Infeasible { bler_at_max } => bler_at_max,
            };
            t.push(vec![
                n.to_string(),
                fas.n_eff.to_string(),
                num(z),
                opt(sol.power().map(watts_to_dbm)),
                num(bler),
                sol.is_feasible().to_string(),
            ]);
        }
    }
    Ok(t)
}

const TRACE_COLUMNS: [&str; 9] = [
    "blocklength",
    "uav_altitude",
    "ports",
    "n_eff",
    "causal",
    "feasible",
    "p2_star_dbm",
    "bler",
    "ee",
];

fn trace_cells(p: &TracePoint) -> Vec<String> {
    vec![
        p.blocklength.to_string(),
        num(p.z_u),
        p.n.to_string(),
        p.n_eff.to_string(),
        p.causal.to_string(),
        p.feasible.to_string(),
        opt(p.p2().map(watts_to_dbm)),
        opt(p.bler()),
        num(p.ee),
    ]
}

fn ee_vs_ports(spec: &ExperimentSpec) -> Result<Table> {
    let mut t = Table::new(&TRACE_COLUMNS);
    for &l in &spec.ee.l_set {
        let fbl = fbl_of(spec, l)?;
        let search = best_port_count(&spec.scenario, &fbl, &spec.ee, spec.scenario.uav_altitude, spec.analysis.aperture)?;
        for p in &search.points {
            t.push(trace_cells(p));
        }
    }
    Ok(t)
}

fn ee_contour(spec: &ExperimentSpec) -> Result<Table> {
    let mut t = Table::new(&TRACE_COLUMNS);
    for &l in &spec.ee.l_set {
        let fbl = fbl_of(spec, l)?;
        let search = best_altitude(&spec.scenario, &fbl, &spec.ee, spec.analysis.aperture)?;
        for s in &search.altitudes {
            t.push(trace_cells(s.best()));
        }
    }
    Ok(t)
}

fn optimize(spec: &ExperimentSpec) -> Result<Table> {
    let mut cols = TRACE_COLUMNS.to_vec();
    cols.push("optimum");
    let mut t = Table::new(&cols);
    let sol = global_optimize(&spec.scenario, &spec.ee, spec.analysis.aperture)?;
    for p in &sol.trace {
        let mut row = trace_cells(p);
        let best = sol.feasible && p.blocklength == sol.l_star && p.z_u == sol.z_star && p.n == sol.n_star;
        row.push(best.to_string());
        t.push(row);
    }
    Ok(t)
}

fn uses_optimizer(command: Command) -> bool {
    matches!(
        command,
        Command::PowerVsAltitude | Command::EeVsPorts | Command::EeContour | Command::Optimize
    )
}

fn fixed_inputs(spec: &ExperimentSpec) -> Vec<(&'static str, String)> {
    let s = &spec.scenario;
    let a = &spec.analysis;
    let nodes = if uses_optimizer(spec.command) {
        spec.ee.theta_nodes
    } else {
        a.theta_nodes
    };
    vec![
        ("p1_dbm", dbm(s.p1)),
        ("uav_altitude", num(s.uav_altitude)),
        ("blocklength", a.blocklength.to_string()),
        ("payload_bits", num(spec.ee.payload_bits)),
        ("ports", a.ports.to_string()),
        ("aperture", num(a.aperture)),
        ("theta_nodes", nodes.to_string()),
        ("chi_variant", spec.ee.chi_variant.name().to_string()),
        ("m_los", s.m_los.to_string()),
        ("m_nlos", s.m_nlos.to_string()),
        ("eta_los_db", num(s.eta_los_db)),
        ("eta_nlos_db", num(s.eta_nlos_db)),
        ("los_a", num(s.los_a)),
        ("los_b", num(s.los_b)),
        ("flight_radius", num(s.flight_radius)),
        ("carrier_freq_hz", num(s.carrier_freq)),
        ("noise_dbm", dbm(s.noise_power)),
        ("bler_threshold", num(spec.ee.bler_threshold)),
    ]
}

/// Computes every row of the experiment without touching the filesystem.
pub fn compute(spec: &ExperimentSpec) -> Result<Table> {
    let mut table = match spec.command {
        Command::BlerSweep => bler_sweep(spec),
        Command::Validate => validate(spec),
        Command::ApertureSweep => aperture_sweep(spec),
        Command::PowerVsAltitude => power_vs_altitude(spec),
        Command::EeVsPorts => ee_vs_ports(spec),
        Command::EeContour => ee_contour(spec),
        Command::Optimize => optimize(spec),
    }?;
    let mut fixed = fixed_inputs(spec);
    if matches!(spec.command, Command::EeVsPorts | Command::EeContour | Command::Optimize) {
        fixed.retain(|(k, _)| !matches!(*k, "blocklength" | "ports"));
    }
    if matches!(spec.command, Command::EeContour | Command::Optimize | Command::PowerVsAltitude) {
        fixed.retain(|(k, _)| *k != "uav_altitude");
    }
    table.echo(fixed);
    Ok(table)
}

/// SHA-256 of the canonical rendering of `spec`, as lowercase hex.
pub fn config_hash(spec: &ExperimentSpec) -> String {
    Sha256::digest(render(spec).as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `out.csv` → `out.csv.meta`.
pub fn meta_path(csv: &Path) -> PathBuf {
    let mut s = csv.as_os_str().to_owned();
    s.push(".meta");
    PathBuf::from(s)
}

pub fn write_csv(table: &Table, path: &Path) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(&table.header)?;
    for r in &table.rows {
        w.write_record(r)?;
    }
    w.flush().map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn render_meta(spec: &ExperimentSpec, table: &Table) -> String {
    let seed = spec.mc.map_or_else(|| "none".to_string(), |m| m.seed.to_string());
    format!(
        "command = {}\nconfig_sha256 = {}\nseed = {}\nversion = {}\nrows = {}\ncolumns = {}\n",
        spec.command.name(),
        config_hash(spec),
        seed,
        env!("CARGO_PKG_VERSION"),
        table.rows.len(),
        table.header.join(",")
    )
}

#[derive(Debug, Clone)]
pub struct RunReport {
    pub csv_path: PathBuf,
    pub meta_path: PathBuf,
    pub rows: usize,
}

/// Default output file when neither the config nor the caller names one.
pub fn default_output(command: Command) -> PathBuf {
    PathBuf::from(format!("{}.csv", command.name()))
}

/// Runs the experiment and writes the CSV and its `.meta` sidecar.
pub fn run(spec: &ExperimentSpec) -> Result<RunReport> {
    let csv_path = spec.output_path.clone().unwrap_or_else(|| default_output(spec.command));
    if let Some(dir) = csv_path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|source| Error::Io {
            path: dir.to_path_buf(),
            source,
        })?;
    }
    let table = compute(spec)?;
    write_csv(&table, &csv_path)?;
    let meta = meta_path(&csv_path);
    fs::write(&meta, render_meta(spec, &table)).map_err(|source| Error::Io {
        path: meta.clone(),
        source,
    })?;
    Ok(RunReport {
        csv_path,
        meta_path: meta,
        rows: table.rows.len(),
    })
}
