//! Python bindings: `dispersion_lab_py`.

use dispersion_lab::decay::{self, InitialDataProfile, QuadratureOptions};
use dispersion_lab::dispersion::{self, DispersionSolver};
use dispersion_lab::herglotz;
use dispersion_lab::material::{self, Channel, MaterialSpec};
use dispersion_lab::modal;
use dispersion_lab::spec_file;
use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::{PyDict, PyList};
use serde_json::Value;

fn fail<E: std::fmt::Display>(code: &str) -> impl Fn(E) -> PyErr + '_ {
    move |e| PyValueError::new_err(format!("{code}: {e}"))
}

fn to_py(py: Python<'_>, v: &Value) -> PyResult<Py<PyAny>> {
    Ok(match v {
        Value::Null => py.None(),
        Value::Bool(b) => b.into_pyobject(py)?.to_owned().into_any().unbind(),
        Value::Number(n) => match n.as_i64() {
            Some(i) => i.into_pyobject(py)?.into_any().unbind(),
            None => n.as_f64().unwrap_or(f64::NAN).into_pyobject(py)?.into_any().unbind(),
        },
        Value::String(s) => s.into_pyobject(py)?.into_any().unbind(),
        Value::Array(items) => {
            let list = PyList::empty(py);
            for item in items {
                list.append(to_py(py, item)?)?;
            }
            list.into_any().unbind()
        }
        Value::Object(map) => {
            let dict = PyDict::new(py);
            for (k, item) in map {
                dict.set_item(k, to_py(py, item)?)?;
            }
            dict.into_any().unbind()
        }
    })
}

fn serialized<T: serde::Serialize>(py: Python<'_>, x: &T) -> PyResult<Py<PyAny>> {
    let v = serde_json::to_value(x).map_err(fail("serialize"))?;
    to_py(py, &v)
}

fn channel(name: &str) -> PyResult<Channel> {
    match name {
        "electric" | "e" => Ok(Channel::Electric),
        "magnetic" | "m" => Ok(Channel::Magnetic),
        _ => Err(PyValueError::new_err(format!("unknown channel {name:?}"))),
    }
}

/// Material law. Oscillators are `(omega, coupling, damping)` triples.
#[pyclass(name = "MaterialSpec", frozen, skip_from_py_object)]
#[derive(Clone)]
struct Spec {
    inner: MaterialSpec,
}

#[pymethods]
impl Spec {
    #[new]
    #[pyo3(signature = (eps0=1.0, mu0=1.0, electric=Vec::new(), magnetic=Vec::new()))]
    fn new(eps0: f64, mu0: f64, electric: Vec<(f64, f64, f64)>, magnetic: Vec<(f64, f64, f64)>) -> PyResult<Self> {
        let conv = |v: Vec<(f64, f64, f64)>| {
            v.into_iter().map(|(w, c, a)| material::Oscillator::new(c, w, a)).collect::<Vec<_>>()
        };
        let inner = MaterialSpec::new(eps0, mu0, conv(electric), conv(magnetic)).map_err(fail("material"))?;
        Ok(Spec { inner })
    }

    /// Parses the JSON spec-file format.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        let parsed = spec_file::parse_spec(text).map_err(|e| PyValueError::new_err(format!("{}: {e}", e.code())))?;
        Ok(Spec { inner: parsed.spec })
    }

    fn to_json(&self) -> String {
        spec_file::spec_to_json(&self.inner).to_string()
    }

    #[getter]
    fn light_speed(&self) -> f64 {
        self.inner.light_speed()
    }

    #[getter]
    fn is_dissipative(&self) -> bool {
        self.inner.is_dissipative()
    }

    #[getter]
    fn omega_min(&self) -> f64 {
        self.inner.omega_min()
    }

    #[getter]
    fn omega_max(&self) -> f64 {
        self.inner.omega_max()
    }

    fn epsilon(&self, omega: Complex64) -> PyResult<Complex64> {
        self.inner.epsilon(omega).map_err(fail("material"))
    }

    fn mu(&self, omega: Complex64) -> PyResult<Complex64> {
        self.inner.mu(omega).map_err(fail("material"))
    }

    /// Poles, zeros, assumption flags and dissipativity class.
    fn structure(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        let r = material::validate_assumptions(&self.inner).map_err(fail("material"))?;
        serialized(py, &r)
    }

    fn __repr__(&self) -> String {
        format!("MaterialSpec({})", self.to_json())
    }
}

/// Roots of the dispersion relation at wavenumber `k`.
#[pyfunction]
fn roots_at_k(spec: &Spec, k: f64) -> PyResult<Vec<Complex64>> {
    dispersion::roots_at_k(&spec.inner, k).map_err(fail("dispersion"))
}

/// Band structure of a non-dissipative medium.
#[pyfunction]
#[pyo3(signature = (spec, points=400))]
fn bands(py: Python<'_>, spec: &Spec, points: usize) -> PyResult<Py<PyAny>> {
    let set = dispersion::trace_branches(&spec.inner, &dispersion::default_k_grid(&spec.inner, points))
        .map_err(fail("dispersion"))?;
    let bs = dispersion::band_structure(&spec.inner, &set).map_err(fail("dispersion"))?;
    serialized(py, &bs)
}

/// Eigenvalues of the modal matrix for one polarization.
#[pyfunction]
#[pyo3(signature = (spec, k, sign=1))]
fn modal_eigenvalues(spec: &Spec, k: f64, sign: i8) -> PyResult<Vec<Complex64>> {
    let sys = modal::build_modal(&spec.inner, k, sign).map_err(fail("modal"))?;
    modal::eigenvalues(&sys.matrix).map_err(fail("modal"))
}

/// Largest scaled distance between dispersion roots and modal eigenvalues.
#[pyfunction]
fn spectrum_defect(spec: &Spec, k: f64) -> PyResult<f64> {
    Ok(modal::spectrum_consistency(&spec.inner, k).map_err(fail("modal"))?.max_scaled_distance)
}

/// Energy of the exactly evolved state `E = e, H = h` at each time.
#[pyfunction]
#[pyo3(signature = (spec, k, times, e=Complex64::new(1.0, 0.0), h=Complex64::new(1.0, 0.0), sign=1))]
fn modal_energy(spec: &Spec, k: f64, times: Vec<f64>, e: Complex64, h: Complex64, sign: i8) -> PyResult<Vec<f64>> {
    let sys = modal::build_modal(&spec.inner, k, sign).map_err(fail("modal"))?;
    let d = modal::spectral_decomposition(&sys).map_err(fail("modal"))?;
    let u0 = sys.field_state(e, h);
    Ok(times.into_iter().map(|t| sys.energy(&d.evolve(&u0, t))).collect())
}

/// Herglotz check on a log-polar grid in the upper half-plane.
#[pyfunction]
#[pyo3(signature = (spec, radial=100, angular=100, r_min=1e-3, r_max=1e3))]
fn herglotz_check(
    py: Python<'_>,
    spec: &Spec,
    radial: usize,
    angular: usize,
    r_min: f64,
    r_max: f64,
) -> PyResult<Py<PyAny>> {
    let grid = material::log_polar_grid(radial, angular, r_min, r_max);
    let r = material::herglotz_sample(&spec.inner, &grid).map_err(fail("material"))?;
    serialized(py, &r)
}

/// Closed-form Nevanlinna measure of one channel.
#[pyfunction]
#[pyo3(signature = (spec, channel_name="electric"))]
fn measure(py: Python<'_>, spec: &Spec, channel_name: &str) -> PyResult<Py<PyAny>> {
    serialized(py, &herglotz::measure_of(&spec.inner, channel(channel_name)?))
}

/// Electromagnetic energy at each time for initial data with profile
/// `(p, s)`; returns a list of samples with the region split.
#[pyfunction]
#[pyo3(signature = (spec, s, p, times, rel_tol=1e-4))]
fn energy_trace(py: Python<'_>, spec: &Spec, s: f64, p: f64, times: Vec<f64>, rel_tol: f64) -> PyResult<Py<PyAny>> {
    let opts = QuadratureOptions { rel_tol, ..QuadratureOptions::default() };
    let profile = InitialDataProfile::new(p, s);
    let trace = py
        .detach(|| decay::energy_trace_with(&spec.inner, &profile, &times, opts))
        .map_err(|e| PyValueError::new_err(format!("{}: {e}", e.code())))?;
    serialized(py, &trace.samples)
}

/// Log-log slope fit `energy ~ t^(-exponent)` over `window`.
#[pyfunction]
fn fit_exponent(py: Python<'_>, times: Vec<f64>, energies: Vec<f64>, window: (f64, f64)) -> PyResult<Py<PyAny>> {
    let f = decay::fit_power_law(&times, &energies, window)
        .map_err(|e| PyValueError::new_err(format!("{}: {e}", e.code())))?;
    serialized(py, &f)
}

#[pyfunction]
fn predicted_exponent(spec: &Spec, s: f64, p: f64) -> f64 {
    decay::predicted_exponent(&spec.inner, &InitialDataProfile::new(p, s))
}

#[pyfunction]
fn group_velocity(spec: &Spec, n: usize, k: f64) -> PyResult<f64> {
    dispersion::group_velocity(&spec.inner, n, k).map_err(fail("dispersion"))
}

#[pyfunction]
fn dispersion_degree(spec: &Spec) -> PyResult<usize> {
    Ok(DispersionSolver::new(&spec.inner).map_err(fail("dispersion"))?.degree())
}

#[pymodule]
fn dispersion_lab_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<Spec>()?;
    m.add_function(wrap_pyfunction!(roots_at_k, m)?)?;
    m.add_function(wrap_pyfunction!(bands, m)?)?;
    m.add_function(wrap_pyfunction!(modal_eigenvalues, m)?)?;
    m.add_function(wrap_pyfunction!(spectrum_defect, m)?)?;
    m.add_function(wrap_pyfunction!(modal_energy, m)?)?;
    m.add_function(wrap_pyfunction!(herglotz_check, m)?)?;
    m.add_function(wrap_pyfunction!(measure, m)?)?;
    m.add_function(wrap_pyfunction!(energy_trace, m)?)?;
    m.add_function(wrap_pyfunction!(fit_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(predicted_exponent, m)?)?;
    m.add_function(wrap_pyfunction!(group_velocity, m)?)?;
    m.add_function(wrap_pyfunction!(dispersion_degree, m)?)?;
    Ok(())
}
