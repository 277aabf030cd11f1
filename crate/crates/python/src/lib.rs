use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use adhesion_core as core;
use adhesion_core::scenario::Depth;

fn err(e: core::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

fn side(name: &str) -> PyResult<core::Side> {
    match name {
        "-" | "minus" => Ok(core::Side::Minus),
        "+" | "plus" => Ok(core::Side::Plus),
        _ => Err(PyValueError::new_err(format!("side must be 'minus' or 'plus', got {name:?}"))),
    }
}

#[pyclass(name = "FluxParams", frozen)]
struct PyFluxParams {
    inner: core::FluxParams,
}

#[pymethods]
impl PyFluxParams {
    #[new]
    fn new(alpha: f64, beta: f64) -> PyResult<Self> {
        Ok(Self { inner: core::FluxParams::new(alpha, beta).map_err(err)? })
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn beta(&self) -> f64 {
        self.inner.beta
    }

    fn rho(&self, s: f64) -> f64 {
        self.inner.rho(s)
    }

    fn sigma(&self, s: f64) -> f64 {
        self.inner.sigma(s)
    }

    fn classify(&self) -> &'static str {
        self.inner.classify().as_str()
    }

    fn critical_points<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyAny>> {
        to_py(py, &self.inner.critical_points().map_err(err)?)
    }

    /// `s-(r)` or `s+(r)`.
    fn invert(&self, r: f64, side_name: &str) -> PyResult<f64> {
        let t = core::BranchTable::new(self.inner).map_err(err)?;
        t.invert(r, side(side_name)?).map_err(err)
    }

    fn __repr__(&self) -> String {
        format!("FluxParams(alpha={}, beta={})", self.inner.alpha, self.inner.beta)
    }
}

#[pyclass(name = "ModifiedFlux", frozen)]
struct PyModifiedFlux {
    inner: core::ModifiedFlux,
}

#[pymethods]
impl PyModifiedFlux {
    #[staticmethod]
    fn two_sided(params: &PyFluxParams, r1: f64, r2: f64) -> PyResult<Self> {
        Ok(Self { inner: core::ModifiedFlux::build_two_sided(params.inner, r1, r2).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (params, match_upto, side = "left"))]
    fn one_sided(params: &PyFluxParams, match_upto: f64, side: &str) -> PyResult<Self> {
        let side = match side {
            "left" => core::OneSide::Left,
            "right" => core::OneSide::Right,
            _ => return Err(PyValueError::new_err(format!("side must be 'left' or 'right', got {side:?}"))),
        };
        Ok(Self { inner: core::ModifiedFlux::build_one_sided(params.inner, match_upto, side).map_err(err)? })
    }

    fn rho(&self, s: f64) -> f64 {
        self.inner.rho(s)
    }

    fn sigma(&self, s: f64) -> f64 {
        self.inner.sigma(s)
    }

    #[getter]
    fn window(&self) -> (f64, f64) {
        self.inner.window
    }

    #[getter]
    fn theta0(&self) -> f64 {
        self.inner.theta0
    }

    #[getter]
    fn theta1(&self) -> f64 {
        self.inner.theta1
    }

    /// Implicit solve on `[0, length]` from cell values `u0`; returns
    /// `(times, values)` with one row per stored level.
    #[pyo3(signature = (u0, t_end, length = 1.0, dt = None))]
    fn solve(&self, u0: Vec<f64>, t_end: f64, length: f64, dt: Option<f64>) -> PyResult<(Vec<f64>, Vec<Vec<f64>>)> {
        let grid = core::Grid::new(length, u0.len()).map_err(err)?;
        let mut opts = core::SolverOptions::default();
        if let Some(dt) = dt {
            opts.policy = core::DtPolicy::Fixed { dt };
        }
        let (f, _) = core::solve(&self.inner, grid, &u0, 0.0, t_end, opts).map_err(err)?;
        Ok((f.times, f.values))
    }
}

#[pyfunction]
fn classify(alpha: f64, beta: f64) -> PyResult<&'static str> {
    Ok(core::FluxParams::new(alpha, beta).map_err(err)?.classify().as_str())
}

#[pyfunction]
fn critical_points<'py>(py: Python<'py>, alpha: f64, beta: f64) -> PyResult<Bound<'py, PyAny>> {
    let p = core::FluxParams::new(alpha, beta).map_err(err)?;
    to_py(py, &p.critical_points().map_err(err)?)
}

#[pyfunction]
fn invert_branch(alpha: f64, beta: f64, r: f64, side_name: &str) -> PyResult<f64> {
    let t = core::BranchTable::new(core::FluxParams::new(alpha, beta).map_err(err)?).map_err(err)?;
    t.invert(r, side(side_name)?).map_err(err)
}

/// Runs the pipeline of a TOML configuration and returns the report as a dict.
#[pyfunction]
#[pyo3(signature = (config, full = true, out = None))]
fn run_scenario<'py>(py: Python<'py>, config: &str, full: bool, out: Option<&str>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = core::ScenarioConfig::from_toml(config).map_err(err)?;
    let depth = if full { Depth::Full } else { Depth::Classical };
    let o = py.detach(|| core::run_scenario(&cfg, depth)).map_err(err)?;
    if let Some(dir) = out {
        core::scenario::write_outputs(&o, &cfg, std::path::Path::new(dir)).map_err(err)?;
    }
    to_py(py, &o.report)
}

#[pymodule]
fn adhesion(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyFluxParams>()?;
    m.add_class::<PyModifiedFlux>()?;
    m.add_function(wrap_pyfunction!(classify, m)?)?;
    m.add_function(wrap_pyfunction!(critical_points, m)?)?;
    m.add_function(wrap_pyfunction!(invert_branch, m)?)?;
    m.add_function(wrap_pyfunction!(run_scenario, m)?)?;
    Ok(())
}
