//! Python module `qprobe_py`: model parameters, noiseless dynamics, the
//! measure and its noisy estimate, and the CSV-producing commands.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::{PyArithmeticError, PyOSError, PyValueError};
use pyo3::prelude::*;

use qprobe::harness::{self, Command, RunConfig};
use qprobe::{DistanceSeries, Error, NoiseModel, QpnConfig, Repetitions, Simulator, TimeGrid};

create_exception!(qprobe_py, ConvergenceError, pyo3::exceptions::PyRuntimeError);

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Config(_) | Error::Parameter(_) => PyValueError::new_err(err.to_string()),
        Error::Numeric(_) | Error::DegenerateDistance { .. } => {
            PyArithmeticError::new_err(err.to_string())
        }
        Error::Convergence { .. } => ConvergenceError::new_err(err.to_string()),
        Error::Io(_) => PyOSError::new_err(err.to_string()),
    }
}

fn repetitions(r: f64) -> PyResult<Repetitions> {
    harness::config::repetitions_from_value(r).map_err(to_py)
}

/// Model parameters in lab units: ω/2π in MHz, Ω/2π in kHz.
#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: qprobe::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (omega_z_mhz=1.920, omega_e_mhz=1.920, omega_khz=100.0, eta=0.32, nbar=1.0, n_cut=20, n_pad=10))]
    fn new(
        omega_z_mhz: f64,
        omega_e_mhz: f64,
        omega_khz: f64,
        eta: f64,
        nbar: f64,
        n_cut: usize,
        n_pad: usize,
    ) -> PyResult<Self> {
        let inner = qprobe::ModelParams::from_lab_units(
            omega_z_mhz,
            omega_e_mhz,
            omega_khz,
            eta,
            nbar,
            n_cut,
            n_pad,
        )
        .map_err(to_py)?;
        Ok(Self { inner })
    }

    #[staticmethod]
    fn reference() -> Self {
        Self {
            inner: qprobe::ModelParams::reference(),
        }
    }

    /// τ = 2π/Ω in seconds.
    #[getter]
    fn tau(&self) -> f64 {
        self.inner.tau()
    }

    #[getter]
    fn omega_z(&self) -> f64 {
        self.inner.omega_z
    }

    #[getter]
    fn omega_e(&self) -> f64 {
        self.inner.omega_e
    }

    #[getter]
    fn omega(&self) -> f64 {
        self.inner.omega
    }

    #[getter]
    fn eta(&self) -> f64 {
        self.inner.eta
    }

    #[getter]
    fn nbar(&self) -> f64 {
        self.inner.nbar
    }

    #[getter]
    fn n_cut(&self) -> usize {
        self.inner.n_cut
    }

    fn __repr__(&self) -> String {
        let p = &self.inner;
        format!(
            "ModelParams(omega_z={}, omega_e={}, omega={}, eta={}, nbar={}, n_cut={})",
            p.omega_z, p.omega_e, p.omega, p.eta, p.nbar, p.n_cut
        )
    }
}

/// Thermal Fock populations up to `n_cut` and their total mass.
#[pyfunction]
fn thermal_populations(nbar: f64, n_cut: usize) -> PyResult<(Vec<f64>, f64)> {
    let pops = qprobe::thermal_populations(nbar, n_cut).map_err(to_py)?;
    Ok((pops.probs, pops.included_mass))
}

/// Noiseless trace distance on `samples` uniform points over `[0, t_max_tau·τ]`.
/// Returns `(t/τ, D)`.
#[pyfunction]
fn simulate_distance(
    py: Python<'_>,
    params: &PyModelParams,
    t_max_tau: f64,
    samples: usize,
) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let p = params.inner;
    py.detach(|| {
        let tau = p.tau();
        let grid = TimeGrid::uniform(t_max_tau * tau, samples)?;
        let (_, series) = Simulator::new(&p)?.distance_series(&grid);
        let t = grid.times().iter().map(|t| t / tau).collect();
        Ok((t, series.distance))
    })
    .map_err(to_py)
}

/// N and δN of a sampled series, using the points with `t <= t_max`.
#[pyfunction]
#[pyo3(signature = (times, distance, t_max, delta=None))]
fn nonmarkovianity(
    times: Vec<f64>,
    distance: Vec<f64>,
    t_max: f64,
    delta: Option<Vec<f64>>,
) -> PyResult<(f64, f64)> {
    let end = times.last().copied().unwrap_or(0.0);
    let grid = TimeGrid::from_times(end, times).map_err(to_py)?;
    let delta = delta.unwrap_or_else(|| vec![0.0; distance.len()]);
    let series = DistanceSeries::new(grid, distance, delta).map_err(to_py)?;
    let result = qprobe::nonmarkovianity(&series, t_max).map_err(to_py)?;
    Ok((result.value, result.uncertainty))
}

/// Projection-noise standard deviation of `⟨σ⟩ = mean` from `r` repetitions.
#[pyfunction]
fn qpn_sigma(mean: f64, r: f64) -> PyResult<f64> {
    qprobe::qpn_sigma(mean, repetitions(r)?).map_err(to_py)
}

/// Dense noiseless N over `[0, t_max_tau·τ]` with its convergence check.
#[pyfunction]
fn estimate_true_n(py: Python<'_>, params: &PyModelParams, t_max_tau: f64) -> PyResult<f64> {
    let p = params.inner;
    py.detach(|| {
        let gamma0 = qprobe::measure::reference_rate(&p);
        qprobe::estimate_true_n(&p, t_max_tau * p.tau(), gamma0).map(|e| e.n_true)
    })
    .map_err(to_py)
}

/// Replica mean and spread of the noisy N.
#[pyfunction]
#[pyo3(signature = (params, t_max_tau=9.0, samples=136, r=500.0, noise="gaussian", replicas=50, seed=1))]
#[allow(clippy::too_many_arguments)]
fn noisy_measure(
    py: Python<'_>,
    params: &PyModelParams,
    t_max_tau: f64,
    samples: usize,
    r: f64,
    noise: &str,
    replicas: usize,
    seed: u64,
) -> PyResult<(f64, f64)> {
    let p = params.inner;
    let config = QpnConfig {
        repetitions: repetitions(r)?,
        noise: noise.parse::<NoiseModel>().map_err(to_py)?,
        k_series: replicas,
        k_measure: replicas,
        seed,
    };
    py.detach(|| {
        let t_max = t_max_tau * p.tau();
        let grid = TimeGrid::uniform(t_max, samples)?;
        let m = qprobe::noisy_measure(&p, &grid, &config, t_max)?;
        Ok((m.mean, m.std))
    })
    .map_err(to_py)
}

/// Expected N of a flat series with Gaussian noise `sigma_d` on `m` points.
#[pyfunction]
fn pure_noise_expectation(m: usize, sigma_d: f64) -> f64 {
    qprobe::qpn::pure_noise_expectation(m, sigma_d)
}

/// Runs a CLI command on a TOML config string and returns the CSV path.
#[pyfunction]
#[pyo3(signature = (command, config_toml, out_dir=None))]
fn run_command(
    py: Python<'_>,
    command: &str,
    config_toml: &str,
    out_dir: Option<PathBuf>,
) -> PyResult<String> {
    let command: Command = command.parse().map_err(to_py)?;
    let mut config = RunConfig::from_toml_str(config_toml).map_err(to_py)?;
    if out_dir.is_some() {
        config.output_dir = out_dir;
    }
    py.detach(|| harness::run(command, &config))
        .map(|p| p.display().to_string())
        .map_err(to_py)
}

#[pymodule]
fn qprobe_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add("ConvergenceError", m.py().get_type::<ConvergenceError>())?;
    m.add_function(wrap_pyfunction!(thermal_populations, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_distance, m)?)?;
    m.add_function(wrap_pyfunction!(nonmarkovianity, m)?)?;
    m.add_function(wrap_pyfunction!(qpn_sigma, m)?)?;
    m.add_function(wrap_pyfunction!(estimate_true_n, m)?)?;
    m.add_function(wrap_pyfunction!(noisy_measure, m)?)?;
    m.add_function(wrap_pyfunction!(pure_noise_expectation, m)?)?;
    m.add_function(wrap_pyfunction!(run_command, m)?)?;
    Ok(())
}
