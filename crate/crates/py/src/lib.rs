//! Python bindings: configuration, the expansion, the approximate solution and
//! the study measurements.

use std::sync::Arc;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;

use convac::approx::ApproximateSolution;
use convac::config::StudyConfig;
use convac::curve::Curve;
use convac::expansion::ExpansionData;
use convac::grid::Grid;
use convac::metrics::fit_order as core_fit_order;
use convac::spectral::min_rayleigh;
use convac::study;

create_exception!(convac, ConvacError, PyException);

fn err(e: convac::Error) -> PyErr {
    ConvacError::new_err(e.to_string())
}

/// Study configuration; defaults reproduce the reference setup.
#[pyclass(name = "Config", from_py_object)]
#[derive(Clone)]
struct PyConfig {
    inner: StudyConfig,
}

#[pymethods]
impl PyConfig {
    #[new]
    #[pyo3(signature = (toml = None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(t) => StudyConfig::from_toml(t).map_err(err)?,
            None => StudyConfig::default(),
        };
        Ok(Self { inner })
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(err)
    }

    #[getter]
    fn eps(&self) -> Vec<f64> {
        self.inner.study.eps.clone()
    }

    #[setter]
    fn set_eps(&mut self, eps: Vec<f64>) {
        self.inner.study.eps = eps;
    }

    #[getter]
    fn delta(&self) -> f64 {
        self.inner.expansion.delta
    }

    fn __repr__(&self) -> String {
        format!("Config(eps={:?}, delta={})", self.inner.study.eps, self.inner.expansion.delta)
    }
}

/// Summary of the optimal profile: `(sigma, rho, theta0)`.
#[pyfunction]
#[pyo3(signature = (config = None))]
fn profile(config: Option<PyConfig>) -> PyResult<(f64, Vec<f64>, Vec<f64>)> {
    let cfg = config.map(|c| c.inner).unwrap_or_default();
    let p = study::build_profile(&cfg).map_err(err)?;
    let s = study::profile_summary(&p);
    Ok((s.sigma, p.grid.nodes().collect(), p.theta0))
}

/// Marker curve with its invariants.
#[pyclass(name = "Curve", frozen)]
struct PyCurve {
    inner: Curve,
}

#[pymethods]
impl PyCurve {
    #[staticmethod]
    #[pyo3(signature = (center, radius, markers = 128))]
    fn circle(center: (f64, f64), radius: f64, markers: usize) -> PyResult<Self> {
        Ok(Self { inner: Curve::circle([center.0, center.1], radius, markers).map_err(err)? })
    }

    fn area(&self) -> f64 {
        self.inner.area()
    }

    fn length(&self) -> f64 {
        self.inner.length()
    }

    fn curvature(&self, s: f64) -> PyResult<f64> {
        self.inner.curvature(s).map_err(err)
    }

    /// `(r, s)` of a point within `tube` of the curve.
    fn signed_distance(&self, x: (f64, f64), tube: f64) -> PyResult<(f64, f64)> {
        let tp = self.inner.signed_distance([x.0, x.1], tube).map_err(err)?;
        Ok((tp.r, tp.s))
    }

    fn markers(&self) -> Vec<(f64, f64)> {
        self.inner.markers().iter().map(|p| (p[0], p[1])).collect()
    }
}

/// Curve history and layer tables, shared by every `ε`.
#[pyclass(name = "Expansion", frozen)]
struct PyExpansion {
    config: StudyConfig,
    data: Arc<ExpansionData>,
}

#[pymethods]
impl PyExpansion {
    #[new]
    #[pyo3(signature = (config = None))]
    fn new(py: Python<'_>, config: Option<PyConfig>) -> PyResult<Self> {
        let config = config.map(|c| c.inner).unwrap_or_default();
        let data = py.detach(|| study::build_expansion(&config)).map_err(err)?;
        Ok(Self { config, data })
    }

    fn slices(&self) -> usize {
        self.data.slices.len()
    }

    /// `(t, h1, h2, b)` per marker at slice `n`.
    fn tables(&self, n: usize) -> PyResult<(f64, Vec<f64>, Vec<f64>, Vec<f64>)> {
        let sl = self
            .data
            .slices
            .get(n)
            .ok_or_else(|| ConvacError::new_err(format!("slice {n} out of range")))?;
        Ok((sl.t / self.data.config.m0, sl.h1.clone(), sl.h2.clone(), sl.b.clone()))
    }

    fn approximate(&self, eps: f64) -> PyResult<PyApprox> {
        let sol = ApproximateSolution::new(self.data.clone(), eps).map_err(err)?;
        Ok(PyApprox { config: self.config.clone(), sol })
    }

    /// Residual norm of `c_A` at `eps` with the configured grid rule.
    fn residual(&self, py: Python<'_>, eps: f64) -> PyResult<f64> {
        py.detach(|| study::residual_case(&self.data, &self.config, eps)).map(|r| r.norm).map_err(err)
    }

    /// Solver run at `eps`; returns the error norms by name and `max|c|`.
    fn solve(&self, py: Python<'_>, eps: f64) -> PyResult<(Vec<(String, f64)>, f64)> {
        let (traj, report) = py.detach(|| study::solve_case(&self.data, &self.config, eps)).map_err(err)?;
        let named = convac::metrics::ErrorReport::NAMES
            .iter()
            .zip(report.values())
            .map(|(n, v)| (n.to_string(), v))
            .collect();
        Ok((named, traj.max_abs))
    }
}

/// `c_A` at a fixed `ε`.
#[pyclass(name = "ApproximateSolution", frozen)]
struct PyApprox {
    config: StudyConfig,
    sol: ApproximateSolution,
}

#[pymethods]
impl PyApprox {
    #[getter]
    fn eps(&self) -> f64 {
        self.sol.eps()
    }

    fn value(&self, x: (f64, f64), t: f64) -> PyResult<f64> {
        self.sol.value([x.0, x.1], t).map_err(err)
    }

    /// Samples on the `(n+1)²` grid nodes, row by row.
    fn sample(&self, n: usize, t: f64) -> PyResult<Vec<f64>> {
        if n < 4 {
            return Err(ConvacError::new_err("grid needs at least 4 cells"));
        }
        Ok(self.sol.frame(t).map_err(err)?.sample(&Grid::new(n), 0))
    }

    /// Smallest eigenvalue of the linearized operator at time `t`.
    fn min_eigenvalue(&self, py: Python<'_>, t: f64) -> PyResult<f64> {
        let grid = Grid::for_eps(self.sol.eps(), self.config.spectral.cells_per_eps);
        py.detach(|| min_rayleigh(&self.sol, t, grid)).map(|r| r.lambda_min).map_err(err)
    }
}

/// Least-squares order and pairwise orders of `norms` against `eps`.
#[pyfunction]
fn fit_order(eps: Vec<f64>, norms: Vec<f64>) -> PyResult<(f64, Vec<f64>)> {
    let f = core_fit_order(&eps, &norms).map_err(err)?;
    Ok((f.slope, f.pairwise))
}

#[pymodule]
#[pyo3(name = "convac")]
fn convac_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ConvacError", m.py().get_type::<ConvacError>())?;
    m.add_class::<PyConfig>()?;
    m.add_class::<PyCurve>()?;
    m.add_class::<PyExpansion>()?;
    m.add_class::<PyApprox>()?;
    m.add_function(wrap_pyfunction!(profile, m)?)?;
    m.add_function(wrap_pyfunction!(fit_order, m)?)?;
    Ok(())
}
