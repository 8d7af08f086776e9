//! Python bindings for the `doublewell` crate.
//!
//! Time arguments are in Rabi periods throughout. Trajectory logs come back
//! as plain dicts of float lists.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use doublewell::dynamics::{self, Integration, ObservableSeries, SseScheme, TrajectoryLog};
use doublewell::harness::{self, presets, ExperimentConfig};
use doublewell::observables::{self, BlochState, GridSpec};
use doublewell::spinspace::{self, angular_momentum_operators};
use doublewell::Error;

fn to_py(err: Error) -> PyErr {
    match err {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

trait IntoPy<T> {
    fn py_err(self) -> PyResult<T>;
}

impl<T> IntoPy<T> for doublewell::Result<T> {
    fn py_err(self) -> PyResult<T> {
        self.map_err(to_py)
    }
}

#[pyclass(name = "ModelParams", module = "doublewell_py", from_py_object)]
#[derive(Clone, Copy)]
struct PyModelParams {
    inner: spinspace::ModelParams,
}

#[pymethods]
impl PyModelParams {
    #[new]
    #[pyo3(signature = (n_particles, u, gamma_bar, tunneling_k = 1.0, bias_epsilon = None))]
    fn new(n_particles: usize, u: f64, gamma_bar: f64, tunneling_k: f64, bias_epsilon: Option<f64>) -> PyResult<Self> {
        let mut inner = spinspace::ModelParams::new(n_particles, u, gamma_bar).with_tunneling(tunneling_k);
        if let Some(eps) = bias_epsilon {
            inner = inner.with_bias(eps);
        }
        inner.validate().py_err()?;
        Ok(Self { inner })
    }

    #[getter]
    fn n_particles(&self) -> usize {
        self.inner.n_particles
    }

    #[getter]
    fn u(&self) -> f64 {
        self.inner.interaction_u
    }

    #[getter]
    fn gamma_bar(&self) -> f64 {
        self.inner.gamma_bar
    }

    #[getter]
    fn tunneling_k(&self) -> f64 {
        self.inner.tunneling_k
    }

    #[getter]
    fn bias_epsilon(&self) -> f64 {
        self.inner.bias_epsilon
    }

    /// Interaction strength U = u K / N.
    fn interaction(&self) -> f64 {
        self.inner.interaction()
    }

    /// Measurement rate gamma = gamma_bar K / N.
    fn gamma(&self) -> f64 {
        self.inner.gamma()
    }

    fn rabi_period(&self) -> f64 {
        self.inner.rabi_period()
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(n_particles={}, u={}, gamma_bar={}, tunneling_k={}, bias_epsilon={})",
            self.inner.n_particles,
            self.inner.interaction_u,
            self.inner.gamma_bar,
            self.inner.tunneling_k,
            self.inner.bias_epsilon
        )
    }
}

#[pyclass(name = "QuantumState", module = "doublewell_py", from_py_object)]
#[derive(Clone)]
struct PyQuantumState {
    inner: spinspace::QuantumState,
}

#[pymethods]
impl PyQuantumState {
    /// Normalized state from Dicke amplitudes, ascending in m.
    #[new]
    fn new(amplitudes: Vec<Complex64>) -> PyResult<Self> {
        Ok(Self {
            inner: spinspace::QuantumState::from_vec(amplitudes).py_err()?,
        })
    }

    #[staticmethod]
    fn fock(n_particles: usize, m: f64) -> PyResult<Self> {
        Ok(Self {
            inner: spinspace::fock_state(n_particles, m).py_err()?,
        })
    }

    #[staticmethod]
    fn coherent(n_particles: usize, theta: f64, phi: f64) -> PyResult<Self> {
        Ok(Self {
            inner: spinspace::coherent_state(n_particles, theta, phi).py_err()?,
        })
    }

    /// Equal moduli with random phases.
    #[staticmethod]
    fn random_phase(n_particles: usize, seed: u64) -> PyResult<Self> {
        Ok(Self {
            inner: spinspace::maximally_uncertain_estimate(n_particles, seed).py_err()?,
        })
    }

    #[getter]
    fn n_particles(&self) -> usize {
        self.inner.n_particles()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn amplitudes(&self) -> Vec<Complex64> {
        self.inner.amplitudes().iter().copied().collect()
    }

    fn bloch(&self) -> PyResult<(f64, f64, f64)> {
        let ops = angular_momentum_operators(self.inner.n_particles()).py_err()?;
        let s = observables::bloch_vector(&self.inner, &ops).py_err()?;
        Ok((s.sx, s.sy, s.sz))
    }

    fn purity(&self) -> PyResult<f64> {
        let ops = angular_momentum_operators(self.inner.n_particles()).py_err()?;
        observables::one_body_purity(&self.inner, &ops).py_err()
    }

    /// `<J_x>, <J_y>, <J_z>`.
    fn moments(&self) -> PyResult<(f64, f64, f64)> {
        let ops = angular_momentum_operators(self.inner.n_particles()).py_err()?;
        Ok((
            observables::expectation(&self.inner, &ops.jx).py_err()?,
            observables::expectation(&self.inner, &ops.jy).py_err()?,
            observables::expectation(&self.inner, &ops.jz).py_err()?,
        ))
    }

    fn fidelity(&self, other: &PyQuantumState) -> PyResult<f64> {
        observables::fidelity(&self.inner, &other.inner).py_err()
    }

    fn __repr__(&self) -> String {
        format!("QuantumState(n_particles={})", self.inner.n_particles())
    }
}

#[pyclass(name = "MeasurementRecord", module = "doublewell_py", from_py_object)]
#[derive(Clone)]
struct PyRecord {
    inner: dynamics::MeasurementRecord,
}

#[pymethods]
impl PyRecord {
    /// Reads `.csv` or the binary form, chosen by extension.
    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let inner = if path.extension().is_some_and(|e| e == "csv") {
            dynamics::MeasurementRecord::read_csv(&path)
        } else {
            dynamics::MeasurementRecord::read_binary(&path)
        }
        .py_err()?;
        Ok(Self { inner })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        if path.extension().is_some_and(|e| e == "csv") {
            self.inner.write_csv(&path)
        } else {
            self.inner.write_binary(&path)
        }
        .py_err()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[getter]
    fn params(&self) -> PyModelParams {
        PyModelParams { inner: self.inner.params }
    }

    #[getter]
    fn increments(&self) -> Vec<f64> {
        self.inner.increments.clone()
    }

    /// Increments divided by the step, I(t).
    fn signal(&self) -> Vec<f64> {
        self.inner.signal()
    }

    fn duration(&self) -> f64 {
        self.inner.duration()
    }

    fn coarsened(&self) -> PyResult<Self> {
        Ok(Self {
            inner: self.inner.coarsened().py_err()?,
        })
    }
}

#[pyclass(name = "DensityMatrix", module = "doublewell_py", from_py_object)]
#[derive(Clone)]
struct PyDensityMatrix {
    inner: dynamics::DensityMatrix,
}

#[pymethods]
impl PyDensityMatrix {
    #[staticmethod]
    fn pure(state: &PyQuantumState) -> Self {
        Self {
            inner: dynamics::DensityMatrix::from_pure(&state.inner),
        }
    }

    #[staticmethod]
    fn mixture(states: Vec<PyQuantumState>) -> PyResult<Self> {
        let states: Vec<_> = states.into_iter().map(|s| s.inner).collect();
        Ok(Self {
            inner: dynamics::DensityMatrix::mixture(&states).py_err()?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    fn trace(&self) -> f64 {
        self.inner.trace()
    }

    fn purity(&self) -> f64 {
        self.inner.purity()
    }

    fn element(&self, row: usize, col: usize) -> Complex64 {
        self.inner.element(row, col)
    }

    fn mean_jz(&self) -> PyResult<f64> {
        let ops = angular_momentum_operators(self.inner.dim() - 1).py_err()?;
        self.inner.expectation(&ops.jz).py_err()
    }

    fn trace_distance(&self, other: &PyDensityMatrix) -> PyResult<f64> {
        dynamics::trace_distance(&self.inner, &other.inner).py_err()
    }
}

fn series_into(dict: &Bound<'_, PyDict>, suffix: &str, s: &ObservableSeries) -> PyResult<()> {
    for (name, col) in [
        ("jx", &s.jx),
        ("jy", &s.jy),
        ("jz", &s.jz),
        ("var_jx", &s.var_jx),
        ("var_jy", &s.var_jy),
        ("var_jz", &s.var_jz),
        ("purity", &s.purity),
    ] {
        dict.set_item(format!("{name}_{suffix}"), col.clone())?;
    }
    Ok(())
}

fn log_dict<'py>(py: Python<'py>, log: &TrajectoryLog) -> PyResult<Bound<'py, PyDict>> {
    let dict = PyDict::new(py);
    dict.set_item("n_particles", log.n_particles)?;
    dict.set_item("t", log.times.clone())?;
    series_into(&dict, "c", &log.conditioned)?;
    if let Some(e) = &log.estimate {
        series_into(&dict, "e", e)?;
    }
    if let Some(f) = &log.fidelity {
        dict.set_item("fidelity", f.clone())?;
    }
    dict.set_item("norm_drift", log.norm_drift.clone())?;
    Ok(dict)
}

fn scheme(name: &str) -> PyResult<SseScheme> {
    SseScheme::from_name(name).ok_or_else(|| PyValueError::new_err(format!("unknown scheme {name:?}")))
}

/// Conditioned trajectory and its measurement record.
#[pyfunction]
#[pyo3(signature = (initial, params, t_final, seed, dt = dynamics::DEFAULT_DT, sample_interval = dynamics::DEFAULT_SAMPLE_INTERVAL, scheme_name = "split-exponential"))]
fn propagate_conditioned<'py>(
    py: Python<'py>,
    initial: &PyQuantumState,
    params: &PyModelParams,
    t_final: f64,
    seed: u64,
    dt: f64,
    sample_interval: f64,
    scheme_name: &str,
) -> PyResult<(Bound<'py, PyDict>, PyRecord)> {
    let integration = Integration::new(t_final, dt)
        .with_sample_interval(sample_interval)
        .with_scheme(scheme(scheme_name)?);
    let (log, record) = py
        .detach(|| dynamics::propagate_conditioned(&initial.inner, &params.inner, &integration, seed))
        .py_err()?;
    Ok((log_dict(py, &log)?, PyRecord { inner: record }))
}

/// Estimator driven by a stored record. With `truth` the log also carries
/// the true state and the fidelity.
#[pyfunction]
#[pyo3(signature = (estimate, record, params, truth = None))]
fn propagate_estimate<'py>(
    py: Python<'py>,
    estimate: &PyQuantumState,
    record: &PyRecord,
    params: &PyModelParams,
    truth: Option<&PyQuantumState>,
) -> PyResult<Bound<'py, PyDict>> {
    let log = py
        .detach(|| match truth {
            Some(t) => dynamics::propagate_estimate_against(&t.inner, &estimate.inner, &record.inner, &params.inner),
            None => dynamics::propagate_estimate(&estimate.inner, &record.inner, &params.inner),
        })
        .py_err()?;
    log_dict(py, &log)
}

/// Unconditional master-equation evolution, every `sample_every` steps.
#[pyfunction]
#[pyo3(signature = (initial, params, t_final, dt = dynamics::DEFAULT_DT, sample_every = 10))]
fn lindblad_solve(
    py: Python<'_>,
    initial: &PyDensityMatrix,
    params: &PyModelParams,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> PyResult<Vec<PyDensityMatrix>> {
    let states = py
        .detach(|| dynamics::lindblad_solve_sampled(&initial.inner, &params.inner, t_final, dt, sample_every))
        .py_err()?;
    Ok(states.into_iter().map(|inner| PyDensityMatrix { inner }).collect())
}

/// Mean-field orbit: `(times, [(sx, sy, sz), ...])`.
#[pyfunction]
#[pyo3(signature = (s0, u, t_final, dt = 1e-3, sample_every = 10))]
fn gpe_trajectory(
    s0: (f64, f64, f64),
    u: f64,
    t_final: f64,
    dt: f64,
    sample_every: usize,
) -> PyResult<(Vec<f64>, Vec<(f64, f64, f64)>)> {
    let traj = dynamics::gpe_trajectory(BlochState::new(s0.0, s0.1, s0.2), u, t_final, dt, sample_every).py_err()?;
    let points = traj.points.iter().map(|s| (s.sx, s.sy, s.sz)).collect();
    Ok((traj.times, points))
}

/// Spin Wigner function on a Gauss-Legendre x uniform grid:
/// `(theta, phi, values)` with `values` row-major in theta.
#[pyfunction]
#[pyo3(signature = (state, n_theta = None, n_phi = None))]
fn wigner(
    py: Python<'_>,
    state: &PyQuantumState,
    n_theta: Option<usize>,
    n_phi: Option<usize>,
) -> PyResult<(Vec<f64>, Vec<f64>, Vec<f64>)> {
    let default = GridSpec::for_particles(state.inner.n_particles());
    let grid = GridSpec::new(n_theta.unwrap_or(default.n_theta), n_phi.unwrap_or(default.n_phi));
    let w = py.detach(|| observables::wigner_function(&state.inner, grid)).py_err()?;
    Ok((w.theta, w.phi, w.values))
}

/// Measurement rate of the cavity readout.
#[pyfunction]
fn cavity_gamma(chi: f64, epsilon_pump: f64, cavity_damping: f64) -> PyResult<f64> {
    spinspace::cavity_gamma(chi, epsilon_pump, cavity_damping).py_err()
}

/// TOML text of a named preset (`fig2`, `fig4`).
#[pyfunction]
fn preset(name: &str) -> PyResult<String> {
    presets::by_name(name).and_then(|c| c.to_toml_string()).py_err()
}

/// Runs a TOML configuration into `out_dir`; returns the written file paths.
#[pyfunction]
fn run_experiment(py: Python<'_>, config_toml: &str, out_dir: PathBuf) -> PyResult<Vec<String>> {
    let config = ExperimentConfig::from_toml_str(config_toml).py_err()?;
    let manifest = py.detach(|| harness::run_experiment(&config, &out_dir)).py_err()?;
    Ok(manifest.files.into_iter().map(|f| f.path).collect())
}

#[pymodule]
fn doublewell_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_class::<PyQuantumState>()?;
    m.add_class::<PyRecord>()?;
    m.add_class::<PyDensityMatrix>()?;
    m.add_function(wrap_pyfunction!(propagate_conditioned, m)?)?;
    m.add_function(wrap_pyfunction!(propagate_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(lindblad_solve, m)?)?;
    m.add_function(wrap_pyfunction!(gpe_trajectory, m)?)?;
    m.add_function(wrap_pyfunction!(wigner, m)?)?;
    m.add_function(wrap_pyfunction!(cavity_gamma, m)?)?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(run_experiment, m)?)?;
    Ok(())
}
