//! Python bindings for the `fasuav` analysis and optimization library.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fasuav::blercore::{self, ChiVariant};
use fasuav::geometry::ScenarioConfig;
use fasuav::mcoracle::{McConfig, McMode};
use fasuav::optimizer::{self, PowerSolution};

fn to_py(e: fasuav::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn chi_variant(name: &str) -> PyResult<ChiVariant> {
    ChiVariant::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown chi variant `{name}`")))
}

/// Geometry, propagation and first-hop settings; defaults are the urban scenario.
#[pyclass(name = "Scenario", from_py_object)]
#[derive(Clone)]
struct PyScenario {
    inner: ScenarioConfig,
}

#[pymethods]
impl PyScenario {
    #[new]
    #[pyo3(signature = (uav_altitude=450.0, p1_dbm=40.0, flight_radius=50.0, m_los=5, m_nlos=1))]
    fn new(uav_altitude: f64, p1_dbm: f64, flight_radius: f64, m_los: u32, m_nlos: u32) -> PyResult<Self> {
        let inner = ScenarioConfig {
            uav_altitude,
            p1: fasuav::geometry::dbm_to_watts(p1_dbm),
            flight_radius,
            m_los,
            m_nlos,
            ..ScenarioConfig::default()
        };
        inner.validate().map_err(to_py)?;
        Ok(PyScenario { inner })
    }

    #[getter]
    fn uav_altitude(&self) -> f64 {
        self.inner.uav_altitude
    }

    #[getter]
    fn p1(&self) -> f64 {
        self.inner.p1
    }

    #[getter]
    fn bs_position(&self) -> [f64; 3] {
        self.inner.bs_position
    }

    #[getter]
    fn ue_position(&self) -> [f64; 3] {
        self.inner.ue_position
    }

    fn __repr__(&self) -> String {
        format!("Scenario(uav_altitude={}, p1={} W)", self.inner.uav_altitude, self.inner.p1)
    }
}

/// Rate and linearization window for one blocklength.
#[pyclass(name = "FblParams", from_py_object)]
#[derive(Clone)]
struct PyFblParams {
    inner: blercore::FblParams,
}

#[pymethods]
impl PyFblParams {
    #[new]
    #[pyo3(signature = (payload_bits, blocklength, chi_variant="rate-gap"))]
    fn new(payload_bits: f64, blocklength: u32, chi_variant: &str) -> PyResult<Self> {
        let inner = blercore::FblParams::new(payload_bits, blocklength, self::chi_variant(chi_variant)?).map_err(to_py)?;
        Ok(PyFblParams { inner })
    }

    #[getter]
    fn rate(&self) -> f64 {
        self.inner.rate
    }

    #[getter]
    fn chi(&self) -> f64 {
        self.inner.chi
    }

    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau
    }

    #[getter]
    fn rho_l(&self) -> f64 {
        self.inner.rho_l
    }

    #[getter]
    fn rho_h(&self) -> f64 {
        self.inner.rho_h
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "FblParams(L={}, R={}, chi={}, window=[{}, {}])",
            p.blocklength, p.rate, p.chi, p.rho_l, p.rho_h
        )
    }
}

/// Eigen-spectrum of the port correlation matrix.
#[pyclass(name = "FasSpectrum", from_py_object)]
#[derive(Clone)]
struct PyFasSpectrum {
    inner: fasuav::chanmodel::FasSpectrum,
}

#[pymethods]
impl PyFasSpectrum {
    #[new]
    #[pyo3(signature = (ports, aperture=0.5, rank_tolerance=fasuav::chanmodel::DEFAULT_RANK_TOLERANCE))]
    fn new(ports: usize, aperture: f64, rank_tolerance: f64) -> PyResult<Self> {
        let inner = fasuav::chanmodel::FasSpectrum::new(ports, aperture, rank_tolerance).map_err(to_py)?;
        Ok(PyFasSpectrum { inner })
    }

    #[staticmethod]
    fn fixed_position() -> Self {
        PyFasSpectrum {
            inner: fasuav::chanmodel::FasSpectrum::fixed_position(),
        }
    }

    #[getter]
    fn ports(&self) -> usize {
        self.inner.n_ports
    }

    #[getter]
    fn n_eff(&self) -> usize {
        self.inner.n_eff
    }

    #[getter]
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues.clone()
    }

    fn retained(&self) -> Vec<f64> {
        self.inner.retained().to_vec()
    }

    fn __repr__(&self) -> String {
        format!("FasSpectrum(ports={}, n_eff={})", self.inner.n_ports, self.inner.n_eff)
    }
}

/// Energy-efficiency constants and search ranges.
#[pyclass(name = "EeConfig", from_py_object)]
#[derive(Clone)]
struct PyEeConfig {
    inner: optimizer::EeConfig,
}

#[pymethods]
impl PyEeConfig {
    #[new]
    #[pyo3(signature = (
        l_set=None,
        z_range=(100.0, 800.0),
        z_step=10.0,
        n_range=(1, 16),
        bler_threshold=1e-3,
        p_max_dbm=50.0,
        theta_nodes=32,
    ))]
    fn new(
        l_set: Option<Vec<u32>>,
        z_range: (f64, f64),
        z_step: f64,
        n_range: (u32, u32),
        bler_threshold: f64,
        p_max_dbm: f64,
        theta_nodes: usize,
    ) -> PyResult<Self> {
        let mut inner = optimizer::EeConfig {
            z_range,
            z_step,
            n_range,
            bler_threshold,
            p_max: fasuav::geometry::dbm_to_watts(p_max_dbm),
            theta_nodes,
            ..Default::default()
        };
        if let Some(l) = l_set {
            inner.l_set = l;
        }
        inner.validate().map_err(to_py)?;
        Ok(PyEeConfig { inner })
    }

    /// Bits per joule at the given BLER, power, blocklength and port count.
    fn efficiency(&self, eps_o: f64, p2: f64, blocklength: u32, ports: u32) -> PyResult<f64> {
        self.inner.efficiency(eps_o, p2, blocklength, ports).map_err(to_py)
    }

    #[getter]
    fn l_set(&self) -> Vec<u32> {
        self.inner.l_set.clone()
    }
}

#[pyfunction]
fn dbm_to_watts(dbm: f64) -> f64 {
    fasuav::geometry::dbm_to_watts(dbm)
}

#[pyfunction]
fn watts_to_dbm(w: f64) -> f64 {
    fasuav::geometry::watts_to_dbm(w)
}

/// Normal-approximation rate at SNR `gamma`.
#[pyfunction]
fn fbl_rate(gamma: f64, blocklength: u32, epsilon: f64) -> f64 {
    blercore::fbl_rate(gamma, blocklength, epsilon)
}

/// Closed-form average first-hop BLER.
#[pyfunction]
fn avg_bler_hop1(fbl: &PyFblParams, vartheta: f64, m: u32) -> PyResult<f64> {
    blercore::avg_bler_hop1(&fbl.inner, vartheta, m).map_err(to_py)
}

/// Closed-form average second-hop BLER with port selection.
#[pyfunction]
fn avg_bler_hop2(fbl: &PyFblParams, vartheta: f64, m: u32, lambdas: Vec<f64>) -> PyResult<f64> {
    blercore::avg_bler_hop2(&fbl.inner, vartheta, m, &lambdas).map_err(to_py)
}

/// High-SNR asymptote of [`avg_bler_hop2`].
#[pyfunction]
fn avg_bler_hop2_asymptotic(fbl: &PyFblParams, vartheta: f64, m: u32, lambdas: Vec<f64>) -> PyResult<f64> {
    blercore::avg_bler_hop2_asymptotic(&fbl.inner, vartheta, m, &lambdas).map_err(to_py)
}

/// Trajectory-averaged end-to-end BLER at UAV power `p2` watts.
#[pyfunction]
#[pyo3(signature = (scenario, fas, fbl, p2, nodes=128))]
fn trajectory_avg_bler(
    py: Python<'_>,
    scenario: &PyScenario,
    fas: &PyFasSpectrum,
    fbl: &PyFblParams,
    p2: f64,
    nodes: usize,
) -> PyResult<f64> {
    let (s, f, b) = (scenario.inner.clone(), fas.inner.clone(), fbl.inner);
    py.detach(|| blercore::trajectory_avg_bler(&s, &f, &b, p2, nodes))
        .map(|r| r.overall)
        .map_err(to_py)
}

/// First-hop error floor of the trajectory average.
#[pyfunction]
#[pyo3(signature = (scenario, fbl, nodes=128))]
fn error_floor(scenario: &PyScenario, fbl: &PyFblParams, nodes: usize) -> PyResult<f64> {
    blercore::error_floor(&scenario.inner, &fbl.inner, nodes).map_err(to_py)
}

/// Monte Carlo estimate of the end-to-end BLER, returned as `(mean, std_error)`.
#[pyfunction]
#[pyo3(signature = (scenario, fas, fbl, p2, trials=1_000_000, seed=1, mode="model"))]
#[allow(clippy::too_many_arguments)]
fn mc_average_bler(
    py: Python<'_>,
    scenario: &PyScenario,
    fas: &PyFasSpectrum,
    fbl: &PyFblParams,
    p2: f64,
    trials: u64,
    seed: u64,
    mode: &str,
) -> PyResult<(f64, f64)> {
    let mode = McMode::from_name(mode).ok_or_else(|| PyValueError::new_err(format!("unknown mode `{mode}`")))?;
    let mc = McConfig {
        seed,
        trials,
        mode,
        ..McConfig::default()
    };
    let (s, f, b) = (scenario.inner.clone(), fas.inner.clone(), fbl.inner);
    let est = py
        .detach(|| fasuav::mcoracle::mc_average_bler(&s, &f, &b, p2, &mc))
        .map_err(to_py)?;
    Ok((est.mean, est.std_error))
}

/// Smallest UAV power in watts meeting the BLER threshold, or `None`.
#[pyfunction]
fn min_power(
    scenario: &PyScenario,
    fas: &PyFasSpectrum,
    fbl: &PyFblParams,
    ee: &PyEeConfig,
    z_u: f64,
) -> PyResult<Option<f64>> {
    let sol = optimizer::min_power(&scenario.inner, &fas.inner, &fbl.inner, &ee.inner, z_u).map_err(to_py)?;
    Ok(match sol {
        PowerSolution::Feasible { p2, .. } => Some(p2),
        PowerSolution::Infeasible { .. } => None,
    })
}

/// Joint blocklength, altitude, port and power optimization.
#[pyfunction]
#[pyo3(signature = (scenario, ee, aperture=0.5))]
fn global_optimize<'py>(
    py: Python<'py>,
    scenario: &PyScenario,
    ee: &PyEeConfig,
    aperture: f64,
) -> PyResult<Bound<'py, PyDict>> {
    let (s, e) = (scenario.inner.clone(), ee.inner.clone());
    let sol = py.detach(|| optimizer::global_optimize(&s, &e, aperture)).map_err(to_py)?;
    let d = PyDict::new(py);
    d.set_item("l_star", sol.l_star)?;
    d.set_item("z_star", sol.z_star)?;
    d.set_item("n_star", sol.n_star)?;
    d.set_item("p2_star", sol.p2_star)?;
    d.set_item("bler_star", sol.bler_star)?;
    d.set_item("ee_star", sol.ee_star)?;
    d.set_item("feasible", sol.feasible)?;
    d.set_item("trace_len", sol.trace.len())?;
    Ok(d)
}

#[pymodule]
fn fasuav_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyScenario>()?;
    m.add_class::<PyFblParams>()?;
    m.add_class::<PyFasSpectrum>()?;
    m.add_class::<PyEeConfig>()?;
    m.add_function(wrap_pyfunction!(dbm_to_watts, m)?)?;
    m.add_function(wrap_pyfunction!(watts_to_dbm, m)?)?;
    m.add_function(wrap_pyfunction!(fbl_rate, m)?)?;
    m.add_function(wrap_pyfunction!(avg_bler_hop1, m)?)?;
    m.add_function(wrap_pyfunction!(avg_bler_hop2, m)?)?;
    m.add_function(wrap_pyfunction!(avg_bler_hop2_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(trajectory_avg_bler, m)?)?;
    m.add_function(wrap_pyfunction!(error_floor, m)?)?;
    m.add_function(wrap_pyfunction!(mc_average_bler, m)?)?;
    m.add_function(wrap_pyfunction!(min_power, m)?)?;
    m.add_function(wrap_pyfunction!(global_optimize, m)?)?;
    Ok(())
}
