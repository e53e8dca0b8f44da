//! Python bindings: thin wrappers over the core toolkit working on plain
//! lists of floats. Component indices are 1-based, matching the library and
//! the CLI.

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use ssakit::decomposition::reconstruct;
use ssakit::grouping::auto_group_wcor;
use ssakit::series::embed;
use ssakit::window::log_bounds;
use ssakit::{decompose, Decomposition, Error, Grouping, TimeSeries, WindowSpec};

fn core_err(e: Error) -> PyErr {
    PyValueError::new_err(format!("{e} [{}]", e.module()))
}

fn series(values: Vec<f64>) -> PyResult<TimeSeries> {
    TimeSeries::new(values).map_err(core_err)
}

fn parse_method(method: &str) -> PyResult<WindowSpec> {
    let spec = match method {
        "auto-ma" => WindowSpec::AutoMa,
        "confband" => WindowSpec::Confband { level: 0.95 },
        "log-lo" => WindowSpec::LogLo,
        "log-hi" => WindowSpec::LogHi,
        "big" => WindowSpec::Big,
        other => match other.strip_prefix("fixed:").and_then(|raw| raw.parse().ok()) {
            Some(length) => WindowSpec::Fixed { length },
            None => {
                return Err(PyValueError::new_err(format!(
                    "unknown window method {method:?}"
                )))
            }
        },
    };
    Ok(spec)
}

/// Window selection with the documented fallback: when the autocorrelation
/// carries no usable structure, use the logarithmic lower bound.
fn choose_window(s: &TimeSeries, spec: &WindowSpec) -> PyResult<usize> {
    match spec.select(s) {
        Ok(choice) => Ok(choice.length),
        Err(Error::NoSignChange { .. }) | Err(Error::NoCrossing { .. }) => {
            let (lo, _) = log_bounds(s.len()).map_err(core_err)?;
            Ok(lo)
        }
        Err(e) => Err(core_err(e)),
    }
}

fn decomposition(s: &TimeSeries, window: usize) -> PyResult<Decomposition> {
    let traj = embed(s, window).map_err(core_err)?;
    decompose(&traj).map_err(core_err)
}

fn grouping_from(indices: Vec<usize>) -> PyResult<Grouping> {
    Grouping::new(indices).map_err(core_err)
}

/// Selected window length for the series.
#[pyfunction]
#[pyo3(signature = (values, method = "auto-ma"))]
fn select_window(values: Vec<f64>, method: &str) -> PyResult<usize> {
    let s = series(values)?;
    choose_window(&s, &parse_method(method)?)
}

/// Singular values of the L-window trajectory matrix, largest first.
#[pyfunction]
fn singular_spectrum(values: Vec<f64>, window: usize) -> PyResult<Vec<f64>> {
    let s = series(values)?;
    Ok(decomposition(&s, window)?.singular_values().to_vec())
}

/// Series reconstructed from the given components (1-based indices).
#[pyfunction(name = "reconstruct")]
fn reconstruct_py(values: Vec<f64>, window: usize, indices: Vec<usize>) -> PyResult<Vec<f64>> {
    let s = series(values)?;
    let d = decomposition(&s, window)?;
    let group = grouping_from(indices)?;
    Ok(reconstruct(&d, &group).map_err(core_err)?.values().to_vec())
}

/// Indices grouped with the leading component by w-correlation clustering.
#[pyfunction]
#[pyo3(signature = (values, window, n_clusters = 2))]
fn auto_group(values: Vec<f64>, window: usize, n_clusters: usize) -> PyResult<Vec<usize>> {
    let s = series(values)?;
    let d = decomposition(&s, window)?;
    Ok(auto_group_wcor(&d, n_clusters)
        .map_err(core_err)?
        .indices()
        .to_vec())
}

/// Vector forecast of the next `horizon` values. The window defaults to the
/// automatic selector; the grouping defaults to w-correlation clustering.
#[pyfunction]
#[pyo3(signature = (values, horizon, window = None, grouping = None))]
fn forecast(
    values: Vec<f64>,
    horizon: usize,
    window: Option<usize>,
    grouping: Option<Vec<usize>>,
) -> PyResult<Vec<f64>> {
    let s = series(values)?;
    let l = match window {
        Some(l) => l,
        None => choose_window(&s, &WindowSpec::AutoMa)?,
    };
    let d = decomposition(&s, l)?;
    let group = match grouping {
        Some(indices) => grouping_from(indices)?,
        None => auto_group_wcor(&d, 2).map_err(core_err)?,
    };
    let result = ssakit::vector_forecast(&d, &group, horizon).map_err(core_err)?;
    Ok(result.values)
}

/// Reference forecast: "constant" (last value), "random" (a seeded random
/// walk), or "polyreg" (polynomial regression extrapolation).
#[pyfunction]
#[pyo3(signature = (values, method, horizon, seed = 42, degree = 4))]
fn baseline(
    values: Vec<f64>,
    method: &str,
    horizon: usize,
    seed: u64,
    degree: usize,
) -> PyResult<Vec<f64>> {
    let s = series(values)?;
    let result = match method {
        "constant" => ssakit::baselines::constant_forecast(&s, horizon),
        "random" => ssakit::baselines::random_forecast(&s, horizon, seed),
        "polyreg" => ssakit::baselines::polyreg_forecast(&s, horizon, degree),
        other => {
            return Err(PyValueError::new_err(format!(
                "unknown baseline {other:?} (expected constant | random | polyreg)"
            )))
        }
    };
    Ok(result.map_err(core_err)?.values)
}

#[pymodule]
fn ssakit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(select_window, m)?)?;
    m.add_function(wrap_pyfunction!(singular_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(reconstruct_py, m)?)?;
    m.add_function(wrap_pyfunction!(auto_group, m)?)?;
    m.add_function(wrap_pyfunction!(forecast, m)?)?;
    m.add_function(wrap_pyfunction!(baseline, m)?)?;
    Ok(())
}
