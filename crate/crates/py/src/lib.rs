//! Python bindings: load/parse run configurations, resolve designs, run the
//! simulate-and-image pipeline, and poke the core geometry helpers.
//!
//! The module mirrors the `nlos-sim` CLI: `design_report` matches
//! `design-only`, `run` matches `run` (without file output; artifacts come
//! back as Python objects). See python/smoke_test.py for usage.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyBool, PyDict, PyList, PyString};

use nlos_imaging::config::{resolve, Mode, RunConfig};
use nlos_imaging::design::propagation_phase_derivative;
use nlos_imaging::export::metrics_json;
use nlos_imaging::forward::matched_pulse as matched_pulse_impl;
use nlos_imaging::pipeline::{config_hash, execute};
use nlos_imaging::scene::required_reflection_angle;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn json_to_py(py: Python<'_>, v: &serde_json::Value) -> PyResult<Py<PyAny>> {
    use serde_json::Value;
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => PyBool::new(py, *b).to_owned().into_any().unbind(),
        Value::Number(n) => {
            if let Some(i) = n.as_i64() {
                i.into_pyobject(py)?.into_any().unbind()
            } else if let Some(u) = n.as_u64() {
                u.into_pyobject(py)?.into_any().unbind()
            } else {
                n.as_f64()
                    .unwrap_or(f64::NAN)
                    .into_pyobject(py)?
                    .into_any()
                    .unbind()
            }
        }
        Value::String(s) => PyString::new(py, s).into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(json_to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, val) in map {
                dict.set_item(k, json_to_py(py, val)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn load_config(
    path: Option<&str>,
    text: Option<&str>,
    mode: Option<&str>,
    sweeps: Option<usize>,
    seed: Option<u64>,
) -> PyResult<RunConfig> {
    let mut cfg = match (path, text) {
        (Some(p), None) => RunConfig::load(std::path::Path::new(p)).map_err(value_err)?,
        (None, Some(t)) => RunConfig::parse(t, "<string>").map_err(value_err)?,
        (None, None) => RunConfig::default(),
        (Some(_), Some(_)) => {
            return Err(PyValueError::new_err("give either path or text, not both"))
        }
    };
    if let Some(m) = mode {
        cfg.mode = m.parse::<Mode>().map_err(value_err)?;
    }
    if let Some(s) = sweeps {
        cfg.sweeps = Some(s);
    }
    if let Some(s) = seed {
        cfg.seed = s;
    }
    Ok(cfg)
}

/// Image, metrics and design report of one simulated acquisition.
#[pyclass(name = "RunResult")]
struct RunResult {
    #[pyo3(get)]
    nx: usize,
    #[pyo3(get)]
    ny: usize,
    #[pyo3(get)]
    origin: (f64, f64),
    #[pyo3(get)]
    pixel_m: f64,
    #[pyo3(get)]
    peak: (f64, f64),
    #[pyo3(get)]
    width_x_m: f64,
    #[pyo3(get)]
    width_y_m: f64,
    #[pyo3(get)]
    warnings: Vec<String>,
    #[pyo3(get)]
    config_hash: String,
    magnitude: Vec<f64>,
    metrics: serde_json::Value,
    report: serde_json::Value,
}

#[pymethods]
impl RunResult {
    /// Linear image magnitude as row-major nested lists (ny rows of nx).
    fn magnitude(&self) -> Vec<Vec<f64>> {
        self.magnitude
            .chunks(self.nx)
            .map(|row| row.to_vec())
            .collect()
    }

    /// Image magnitude in dB normalized to the peak (floor -400 dB).
    fn magnitude_db(&self) -> Vec<Vec<f64>> {
        let peak = self
            .magnitude
            .iter()
            .cloned()
            .fold(f64::MIN_POSITIVE, f64::max);
        self.magnitude
            .chunks(self.nx)
            .map(|row| {
                row.iter()
                    .map(|&v| {
                        let db = 20.0 * (v / peak).log10();
                        if db.is_finite() {
                            db.max(-400.0)
                        } else {
                            -400.0
                        }
                    })
                    .collect()
            })
            .collect()
    }

    fn metrics(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &self.metrics)
    }

    fn design_report(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        json_to_py(py, &self.report)
    }

    fn __repr__(&self) -> String {
        format!(
            "RunResult({}x{} px, peak at ({:.3}, {:.3}) m, widths {:.4} x {:.4} m)",
            self.nx, self.ny, self.peak.0, self.peak.1, self.width_x_m, self.width_y_m
        )
    }
}

/// Run the full pipeline (design, simulate, back-project, measure).
#[pyfunction]
#[pyo3(signature = (path=None, *, text=None, mode=None, sweeps=None, seed=None))]
fn run(
    py: Python<'_>,
    path: Option<&str>,
    text: Option<&str>,
    mode: Option<&str>,
    sweeps: Option<usize>,
    seed: Option<u64>,
) -> PyResult<RunResult> {
    let cfg = load_config(path, text, mode, sweeps, seed)?;
    let resolved = resolve(&cfg).map_err(value_err)?;
    let hash = config_hash(&resolved).map_err(value_err)?;
    let output = py.detach(|| execute(&resolved)).map_err(value_err)?;
    let report = serde_json::to_value(&output.report).map_err(value_err)?;
    let metrics = metrics_json(&output.metrics, &output.image);
    Ok(RunResult {
        nx: output.image.grid.nx,
        ny: output.image.grid.ny,
        origin: output.image.grid.origin,
        pixel_m: output.image.grid.spacing,
        peak: output.metrics.peak_position,
        width_x_m: output.metrics.width_x,
        width_y_m: output.metrics.width_y,
        warnings: output.warnings.clone(),
        config_hash: hash,
        magnitude: output.image.magnitude(),
        metrics,
        report,
    })
}

/// Resolve the design without simulating; returns the design report dict.
#[pyfunction]
#[pyo3(signature = (path=None, *, text=None))]
fn design_report(py: Python<'_>, path: Option<&str>, text: Option<&str>) -> PyResult<Py<PyAny>> {
    let cfg = load_config(path, text, None, None, None)?;
    let resolved = resolve(&cfg).map_err(value_err)?;
    let value = serde_json::to_value(&resolved.report).map_err(value_err)?;
    json_to_py(py, &value)
}

/// Every effective (auto-resolved) parameter of a configuration.
#[pyfunction]
#[pyo3(signature = (path=None, *, text=None))]
fn effective_params(py: Python<'_>, path: Option<&str>, text: Option<&str>) -> PyResult<Py<PyAny>> {
    let cfg = load_config(path, text, None, None, None)?;
    let resolved = resolve(&cfg).map_err(value_err)?;
    let value = serde_json::to_value(&resolved.effective).map_err(value_err)?;
    json_to_py(py, &value)
}

/// Beam-centre incidence point (x, y) on the plane for a pointing angle in
/// degrees and a source height in metres.
#[pyfunction]
fn incidence_point(theta_i_deg: f64, source_height_m: f64) -> PyResult<(f64, f64)> {
    let theta = theta_i_deg.to_radians();
    if theta.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(PyValueError::new_err("angle must be inside (-90, 90) deg"));
    }
    Ok((source_height_m * theta.tan(), 0.0))
}

/// Reflection angle (degrees) that sends a ray from plane point p to target r.
#[pyfunction]
fn reflection_angle_deg(p: (f64, f64), r: (f64, f64)) -> PyResult<f64> {
    required_reflection_angle(p, r)
        .map(|a| a.to_degrees())
        .map_err(value_err)
}

/// Aperture D*[tan(c + w/2) - tan(c - w/2)] swept by a beam codebook
/// (degrees in, metres out).
#[pyfunction]
fn asymptotic_aperture(source_height_m: f64, center_deg: f64, width_deg: f64) -> PyResult<f64> {
    let lo = (center_deg - width_deg / 2.0).to_radians();
    let hi = (center_deg + width_deg / 2.0).to_radians();
    if lo.abs() >= std::f64::consts::FRAC_PI_2 || hi.abs() >= std::f64::consts::FRAC_PI_2 {
        return Err(PyValueError::new_err("sweep spans beyond +-90 deg"));
    }
    Ok(source_height_m * (hi.tan() - lo.tan()))
}

/// Matched-filtered pulse amplitude sinc(B dt).
#[pyfunction]
fn matched_pulse(dt_s: f64, bandwidth_hz: f64) -> f64 {
    matched_pulse_impl(dt_s, bandwidth_hz)
}

/// d(phase)/d(theta_i) of the two-way propagation phase, rad per rad.
#[pyfunction]
fn phase_derivative(
    theta_i_deg: f64,
    r: (f64, f64),
    source_height_m: f64,
    wavelength_m: f64,
) -> PyResult<f64> {
    propagation_phase_derivative(theta_i_deg.to_radians(), r, source_height_m, wavelength_m)
        .map_err(value_err)
}

#[pymodule]
fn nlos_imaging_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<RunResult>()?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    m.add_function(wrap_pyfunction!(design_report, m)?)?;
    m.add_function(wrap_pyfunction!(effective_params, m)?)?;
    m.add_function(wrap_pyfunction!(incidence_point, m)?)?;
    m.add_function(wrap_pyfunction!(reflection_angle_deg, m)?)?;
    m.add_function(wrap_pyfunction!(asymptotic_aperture, m)?)?;
    m.add_function(wrap_pyfunction!(matched_pulse, m)?)?;
    m.add_function(wrap_pyfunction!(phase_derivative, m)?)?;
    Ok(())
}
