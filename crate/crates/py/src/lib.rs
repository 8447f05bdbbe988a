//! Python bindings: thin wrappers over the core types plus the main entry
//! points (rates, thresholds, EBP tracing, Maxwell bound).

use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

use scldpc::de::{bp_threshold, run_forward_de};
use scldpc::density::bec_density;
use scldpc::ebp::{curve_area, maxwell_bound, trace_ebp};
use scldpc::rates::design_rate;
use scldpc::{ChannelFamily, ChannelParam, CoupledSpec, Density, GridSpec, ScheduleSpec, StopRule};

fn err(e: scldpc::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn family(name: &str) -> PyResult<ChannelFamily> {
    name.parse().map_err(|_| PyValueError::new_err(format!("unknown channel family {name:?}")))
}

#[pyclass(name = "GridSpec", frozen)]
#[derive(Clone)]
struct PyGrid {
    inner: GridSpec,
}

#[pymethods]
impl PyGrid {
    #[new]
    #[pyo3(signature = (llr_max=25.0, bins=2048))]
    fn new(llr_max: f64, bins: usize) -> PyResult<Self> {
        Ok(PyGrid { inner: GridSpec::new(llr_max, bins).map_err(err)? })
    }

    #[getter]
    fn llr_max(&self) -> f64 {
        self.inner.llr_max()
    }

    #[getter]
    fn bins(&self) -> usize {
        self.inner.bins()
    }

    fn __repr__(&self) -> String {
        format!("GridSpec(llr_max={}, bins={})", self.inner.llr_max(), self.inner.bins())
    }
}

#[pyclass(name = "Density", frozen)]
#[derive(Clone)]
struct PyDensity {
    inner: Density,
}

#[pymethods]
impl PyDensity {
    #[staticmethod]
    fn bec(grid: PyGrid, eps: f64) -> PyDensity {
        PyDensity { inner: bec_density(grid.inner, eps) }
    }

    fn entropy(&self) -> f64 {
        self.inner.entropy()
    }

    fn bhattacharyya(&self) -> f64 {
        self.inner.bhattacharyya()
    }

    fn error_prob(&self) -> f64 {
        self.inner.error_prob()
    }

    fn total_mass(&self) -> f64 {
        self.inner.total_mass()
    }

    fn var_conv(&self, other: &PyDensity) -> PyResult<PyDensity> {
        Ok(PyDensity { inner: self.inner.var_conv(&other.inner).map_err(err)? })
    }

    fn chk_conv(&self, other: &PyDensity) -> PyResult<PyDensity> {
        Ok(PyDensity { inner: self.inner.chk_conv(&other.inner).map_err(err)? })
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }
}

#[pyclass(name = "ChannelParam", frozen)]
#[derive(Clone)]
struct PyChannel {
    inner: ChannelParam,
}

#[pymethods]
impl PyChannel {
    #[new]
    fn new(family_name: &str, value: f64) -> PyResult<Self> {
        Ok(PyChannel { inner: ChannelParam::new(family(family_name)?, value).map_err(err)? })
    }

    #[staticmethod]
    fn from_entropy(family_name: &str, h: f64) -> PyResult<Self> {
        Ok(PyChannel { inner: ChannelParam::from_entropy(family(family_name)?, h).map_err(err)? })
    }

    #[getter]
    fn value(&self) -> f64 {
        self.inner.value
    }

    fn entropy(&self) -> f64 {
        self.inner.entropy()
    }

    fn density(&self, grid: PyGrid) -> PyDensity {
        PyDensity { inner: self.inner.density(grid.inner) }
    }
}

#[pyclass(name = "CoupledSpec", frozen)]
#[derive(Clone)]
struct PySpec {
    inner: CoupledSpec,
}

#[pymethods]
impl PySpec {
    #[staticmethod]
    fn uncoupled(l: u32, r: u32) -> PyResult<Self> {
        Ok(PySpec { inner: CoupledSpec::uncoupled(l, r).map_err(err)? })
    }

    #[staticmethod]
    fn line(l: u32, r: u32, big_l: usize, w: usize) -> PyResult<Self> {
        Ok(PySpec { inner: CoupledSpec::line(l, r, big_l, w).map_err(err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (l, r, k, w, kappa=None))]
    fn circular(l: u32, r: u32, k: usize, w: usize, kappa: Option<Vec<f64>>) -> PyResult<Self> {
        Ok(PySpec { inner: CoupledSpec::circular(l, r, k, w, kappa).map_err(err)? })
    }

    #[staticmethod]
    fn one_sided(l: u32, r: u32, k: usize, w: usize, alpha: f64) -> PyResult<Self> {
        Ok(PySpec { inner: CoupledSpec::one_sided(l, r, k, w, alpha).map_err(err)? })
    }

    fn positions(&self) -> usize {
        self.inner.positions()
    }

    fn design_rate(&self) -> PyResult<f64> {
        design_rate(&self.inner).map_err(err)
    }
}

#[pyclass(name = "EbpCurve", frozen)]
struct PyCurve {
    inner: scldpc::EbpCurve,
}

#[pymethods]
impl PyCurve {
    /// Points as (anchor, param_value, h_channel, g_value, residual) tuples.
    fn points(&self) -> Vec<(f64, f64, f64, f64, f64)> {
        self.inner
            .points
            .iter()
            .map(|p| (p.anchor, p.param.value, p.h_channel, p.g_value, p.residual))
            .collect()
    }

    fn area(&self) -> f64 {
        curve_area(&self.inner)
    }

    fn maxwell_bound(&self, rate: f64) -> PyResult<f64> {
        maxwell_bound(&self.inner, rate).map_err(err)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv_string()
    }
}

#[pyfunction]
fn bec_bp_threshold(spec: &PySpec, tol: f64) -> PyResult<f64> {
    scldpc::bec::bec_bp_threshold(&spec.inner, None, tol).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (family_name, spec, grid, tol=1e-3, max_iters=2000))]
fn bp_threshold_entropy(
    family_name: &str,
    spec: &PySpec,
    grid: PyGrid,
    tol: f64,
    max_iters: usize,
) -> PyResult<(f64, f64)> {
    let stop = StopRule { tol_b: 1e-9, max_iters };
    let ch = bp_threshold(family(family_name)?, &spec.inner, grid.inner, tol, stop).map_err(err)?;
    Ok((ch.value, ch.entropy()))
}

#[pyfunction]
fn trace_ebp_curve(
    family_name: &str,
    spec: &PySpec,
    grid: PyGrid,
    anchors: Vec<f64>,
) -> PyResult<PyCurve> {
    let curve = trace_ebp(family(family_name)?, &spec.inner, grid.inner, &anchors).map_err(err)?;
    Ok(PyCurve { inner: curve })
}

#[pyfunction]
#[pyo3(signature = (channel, spec, grid, max_iters=2000))]
fn forward_de_entropies(
    channel: &PyChannel,
    spec: &PySpec,
    grid: PyGrid,
    max_iters: usize,
) -> PyResult<(Vec<f64>, usize, String)> {
    let stop = StopRule { tol_b: 1e-9, max_iters };
    let (x, report) =
        run_forward_de(&channel.inner.density(grid.inner), &spec.inner, ScheduleSpec::Parallel, stop)
            .map_err(err)?;
    Ok((x.entropies(), report.iterations, format!("{:?}", report.stop_reason)))
}

#[pymodule]
fn _scldpc(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyDensity>()?;
    m.add_class::<PyChannel>()?;
    m.add_class::<PySpec>()?;
    m.add_class::<PyCurve>()?;
    m.add_function(wrap_pyfunction!(bec_bp_threshold, m)?)?;
    m.add_function(wrap_pyfunction!(bp_threshold_entropy, m)?)?;
    m.add_function(wrap_pyfunction!(trace_ebp_curve, m)?)?;
    m.add_function(wrap_pyfunction!(forward_de_entropies, m)?)?;
    Ok(())
}
