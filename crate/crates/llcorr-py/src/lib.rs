//! Python module `llcorr`: thermal state, poles, correlation lengths, amplitudes and the
//! free-fermion determinant at single parameter points.

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;

use llcorr::amplitudes::amplitude_b_checked;
use llcorr::deformed::{solve_selection, DeformOptions, DeformedState, RootSelection};
use llcorr::lengths::correlation_length;
use llcorr::poles::locate_poles;
use llcorr::thermo::{solve_epsilon, Coupling, GridSpec, ModelParams, ThermalState};
use llcorr::verification::ff_determinant;
use llcorr::Complex64;

create_exception!(llcorr, LlcorrError, PyException);

fn err(e: llcorr::Error) -> PyErr {
    LlcorrError::new_err(format!("{}: {e}", e.kind()))
}

/// A float, or a string such as "inf".
fn coupling(c: &Bound<'_, PyAny>) -> PyResult<Coupling> {
    let text = match c.extract::<f64>() {
        Ok(v) => v.to_string(),
        Err(_) => c.extract::<String>()?,
    };
    text.parse().map_err(err)
}

fn params(c: &Bound<'_, PyAny>, h: f64, t: f64, alpha: Complex64) -> PyResult<ModelParams> {
    ModelParams::new(coupling(c)?, h, t, alpha).map_err(err)
}

fn thermal_state(p: &ModelParams) -> PyResult<ThermalState> {
    solve_epsilon(p, &GridSpec::default(), 1e-13, 2000).map_err(err)
}

fn deformed(c: &Bound<'_, PyAny>, h: f64, t: f64, selection: &str, alpha: Complex64) -> PyResult<DeformedState> {
    let p = params(c, h, t, Complex64::new(0.0, 0.0))?;
    let sel: RootSelection = selection.parse().map_err(err)?;
    solve_selection(&thermal_state(&p)?, alpha, &sel, &DeformOptions::default()).map_err(err)
}

/// Pressure, density and Yang–Yang residual at h_α.
#[pyfunction]
#[pyo3(signature = (c, h, t, alpha = Complex64::new(0.0, 0.0)))]
fn thermo<'py>(py: Python<'py>, c: &Bound<'py, PyAny>, h: f64, t: f64, alpha: Complex64) -> PyResult<Bound<'py, PyDict>> {
    let th = thermal_state(&params(c, h, t, alpha)?)?;
    let d = PyDict::new(py);
    d.set_item("pressure", th.pressure)?;
    d.set_item("density", th.density)?;
    d.set_item("residual", th.residual())?;
    d.set_item("nodes", th.grid.nodes.len())?;
    Ok(d)
}

/// Fermi-weight poles as (label, position) pairs, levels 1..=m_max+1.
#[pyfunction]
#[pyo3(signature = (c, h, t, m_max = 3, alpha = Complex64::new(0.0, 0.0)))]
fn poles(c: &Bound<'_, PyAny>, h: f64, t: f64, m_max: usize, alpha: Complex64) -> PyResult<Vec<(String, Complex64)>> {
    let table = locate_poles(&thermal_state(&params(c, h, t, alpha)?)?, m_max).map_err(err)?;
    Ok(table.entries.iter().map(|e| (e.label(), e.r)).collect())
}

/// p for a root selection such as "+R1;-R1" ("" is the leading term).
#[pyfunction]
#[pyo3(signature = (c, h, t, selection = "", alpha = Complex64::new(0.0, 0.0)))]
fn length(c: &Bound<'_, PyAny>, h: f64, t: f64, selection: &str, alpha: Complex64) -> PyResult<Complex64> {
    Ok(correlation_length(&deformed(c, h, t, selection, alpha)?).map_err(err)?.p)
}

/// (p, B) for a root selection.
#[pyfunction]
#[pyo3(signature = (c, h, t, selection = "", alpha = Complex64::new(0.0, 0.0)))]
fn amplitude(c: &Bound<'_, PyAny>, h: f64, t: f64, selection: &str, alpha: Complex64) -> PyResult<(Complex64, Complex64)> {
    let s = deformed(c, h, t, selection, alpha)?;
    let p = correlation_length(&s).map_err(err)?.p;
    Ok((p, amplitude_b_checked(&s).map_err(err)?.b))
}

/// det(I + V₀) of the free-fermion generating function at distance x.
#[pyfunction]
fn free_fermion_determinant(h: f64, t: f64, alpha: Complex64, x: f64) -> PyResult<Complex64> {
    let p = ModelParams::new(Coupling::Infinite, h, t, alpha).map_err(err)?;
    Ok(ff_determinant(&p, x).map_err(err)?.value)
}

#[pymodule]
#[pyo3(name = "llcorr")]
fn init_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("LlcorrError", m.py().get_type::<LlcorrError>())?;
    m.add_function(wrap_pyfunction!(thermo, m)?)?;
    m.add_function(wrap_pyfunction!(poles, m)?)?;
    m.add_function(wrap_pyfunction!(length, m)?)?;
    m.add_function(wrap_pyfunction!(amplitude, m)?)?;
    m.add_function(wrap_pyfunction!(free_fermion_determinant, m)?)?;
    Ok(())
}
