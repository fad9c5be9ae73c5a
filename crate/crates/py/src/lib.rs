use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use serde::Serialize;

use toastkit::asdim::{self, AsdimWitness, RainbowToast};
use toastkit::cli::{self, RunConfig};
use toastkit::decomp::{self, Bgd, Toast};
use toastkit::equidecomp::{self, Equidecomposition, Grid, Label, Shape, ShapeKind};
use toastkit::flows::{self, ApproxFlows, Divergence, FlowGraph, RoundOptions};
use toastkit::{TorusAction, VertexSet};

create_exception!(toastkit_py, ToastkitError, PyException);

fn err<E: std::fmt::Display>(e: E) -> PyErr {
    ToastkitError::new_err(e.to_string())
}

/// Serializable value → plain Python objects via the json module.
fn to_py<T: Serialize>(py: Python<'_>, v: &T) -> PyResult<Py<PyAny>> {
    let s = serde_json::to_string(v).map_err(err)?;
    Ok(py.import("json")?.call_method1("loads", (s,))?.unbind())
}

fn set_from(size: usize, idx: Vec<usize>) -> PyResult<VertexSet> {
    if let Some(&x) = idx.iter().find(|&&x| x >= size) {
        return Err(err(format!("index {x} outside the grid of {size} points")));
    }
    Ok(VertexSet::from_indices(size, idx))
}

#[pyclass(name = "Action", frozen)]
struct PyAction {
    inner: TorusAction,
}

#[pymethods]
impl PyAction {
    /// Unit translations when `translations` is omitted.
    #[new]
    #[pyo3(signature = (k, n, translations=None, r_free=None))]
    fn new(k: usize, n: u32, translations: Option<Vec<Vec<i64>>>, r_free: Option<u32>) -> PyResult<Self> {
        let inner = match translations {
            None => TorusAction::standard(k, n),
            Some(t) => TorusAction::new(k, n, t, r_free.unwrap_or((n.saturating_sub(1)) / 2)),
        }
        .map_err(err)?;
        Ok(PyAction { inner })
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }
    #[getter]
    fn n(&self) -> u32 {
        self.inner.n()
    }
    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }
    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }
    fn coords(&self, x: usize) -> Vec<u32> {
        self.inner.coords(x)
    }
    fn point(&self, coords: Vec<u32>) -> usize {
        self.inner.point(&coords)
    }
    fn neighbors(&self, x: usize) -> Vec<usize> {
        self.inner.neighbors(x)
    }
    fn __repr__(&self) -> String {
        format!("Action(k={}, N={}, d={})", self.inner.k(), self.inner.n(), self.inner.d())
    }
}

#[pyclass(name = "Shape", frozen)]
struct PyShape {
    inner: Shape,
}

#[pymethods]
impl PyShape {
    #[getter]
    fn pixels(&self) -> Vec<usize> {
        self.inner.pixels.iter().collect()
    }
    #[getter]
    fn boundary(&self) -> Vec<usize> {
        self.inner.boundary.iter().collect()
    }
    fn __len__(&self) -> usize {
        self.inner.count()
    }
}

macro_rules! wrapper {
    ($py:ident, $name:literal, $ty:ty) => {
        #[pyclass(name = $name, frozen)]
        struct $py {
            inner: $ty,
        }

        #[pymethods]
        impl $py {
            fn to_dict(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
                to_py(py, &self.inner)
            }
        }
    };
}

wrapper!(PyWitness, "Witness", AsdimWitness);
wrapper!(PyRainbow, "RainbowToast", RainbowToast);
wrapper!(PyBgd, "Bgd", Bgd);
wrapper!(PyToast, "Toast", Toast);
wrapper!(PyEquidecomposition, "Equidecomposition", Equidecomposition);

#[pyclass(name = "Flows", frozen)]
struct PyFlows {
    c: Divergence,
    inner: ApproxFlows,
}

#[pymethods]
impl PyFlows {
    /// (m, ‖φ_m^out − c‖∞) rows.
    fn decay(&self) -> Vec<(u32, f64)> {
        self.inner.decay.iter().map(|r| (r.m, r.out_error.to_f64())).collect()
    }
}

#[pyclass(name = "Rounding", frozen)]
struct PyRounding {
    inner: flows::Rounding,
}

#[pymethods]
impl PyRounding {
    #[getter]
    fn schedule(&self) -> Vec<u32> {
        self.inner.log.schedule.clone()
    }
    #[getter]
    fn edits(&self) -> usize {
        self.inner.log.entries.len()
    }
}

#[pyfunction]
fn shifted_cube_witness(a: &PyAction, r: u32) -> PyResult<PyWitness> {
    Ok(PyWitness { inner: asdim::shifted_cube_witness(&a.inner, r).map_err(err)? })
}

#[pyfunction]
fn verify_witness(py: Python<'_>, a: &PyAction, w: &PyWitness) -> PyResult<Py<PyAny>> {
    to_py(py, &asdim::verify_witness(&a.inner, &w.inner))
}

#[pyfunction]
fn build_rainbow_toast(a: &PyAction, n_max: u32) -> PyResult<PyRainbow> {
    Ok(PyRainbow { inner: asdim::build_rainbow_toast(&a.inner, n_max).map_err(err)? })
}

#[pyfunction]
fn verify_rainbow_toast(py: Python<'_>, a: &PyAction, rt: &PyRainbow) -> PyResult<Py<PyAny>> {
    to_py(py, &asdim::verify_rainbow_toast(&a.inner, &rt.inner))
}

#[pyfunction]
fn bgd_from_rainbow(a: &PyAction, rt: &PyRainbow, q_big: u32) -> PyResult<PyBgd> {
    Ok(PyBgd { inner: decomp::bgd_from_rainbow(&a.inner, &rt.inner, q_big).map_err(err)? })
}

#[pyfunction]
fn grid_line_bgd(a: &PyAction, pitch: u32, q_big: u32) -> PyResult<PyBgd> {
    Ok(PyBgd { inner: decomp::grid_line_bgd(&a.inner, pitch, q_big).map_err(err)? })
}

#[pyfunction]
fn verify_bgd(py: Python<'_>, a: &PyAction, b: &PyBgd) -> PyResult<Py<PyAny>> {
    to_py(py, &decomp::verify_bgd(&a.inner, &b.inner))
}

#[pyfunction]
fn toast_from_bgd(a: &PyAction, b: &PyBgd, q: u32) -> PyResult<PyToast> {
    Ok(PyToast { inner: decomp::toast_from_bgd(&a.inner, &b.inner, q).map_err(err)? })
}

#[pyfunction]
fn verify_toast(py: Python<'_>, a: &PyAction, t: &PyToast) -> PyResult<Py<PyAny>> {
    to_py(py, &decomp::verify_toast(&a.inner, &t.inner))
}

/// `kind` is "disk", "square" or a PBM path; `label` is "A" or "B".
#[pyfunction]
#[pyo3(signature = (kind, n, target=None, label="A", k=2))]
fn rasterize(kind: &str, n: u32, target: Option<usize>, label: &str, k: usize) -> PyResult<PyShape> {
    let kind = match kind {
        "disk" => ShapeKind::Disk,
        "square" => ShapeKind::Square,
        path => ShapeKind::Mask(path.into()),
    };
    let label = if label == "B" { Label::B } else { Label::A };
    let grid = Grid::new(k, n).map_err(err)?;
    Ok(PyShape { inner: equidecomp::rasterize(&kind, grid, target, label).map_err(err)? })
}

#[pyfunction]
#[pyo3(signature = (points, n, scales=None, k=2))]
fn minkowski_estimate(points: Vec<usize>, n: u32, scales: Option<Vec<u32>>, k: usize) -> PyResult<f64> {
    let grid = Grid::new(k, n).map_err(err)?;
    let set = set_from(grid.size(), points)?;
    let scales = scales.unwrap_or_else(|| equidecomp::default_scales(n));
    Ok(equidecomp::minkowski_estimate(&set, grid, &scales).map_err(err)?.dimension)
}

/// Integral f-flow near φ = phi / 2^exp on a finite graph.
#[pyfunction]
fn integralize(n: usize, edges: Vec<(usize, usize)>, phi: Vec<i64>, exp: u32, f: Vec<i64>) -> PyResult<Vec<i64>> {
    if edges.iter().any(|&(u, v)| u >= n || v >= n) {
        return Err(err("edge endpoint out of range"));
    }
    flows::integralize(&FlowGraph { n, edges }, &phi, exp, &f).map_err(err)
}

#[pyfunction]
fn approx_flows(a: &PyAction, source: &PyShape, sink: &PyShape, m_max: u32) -> PyResult<PyFlows> {
    let c = Divergence::from_sets(&source.inner.pixels, &sink.inner.pixels);
    let inner = flows::approx_flows(&a.inner, &c, m_max).map_err(err)?;
    Ok(PyFlows { c, inner })
}

#[pyfunction]
fn round_flows(a: &PyAction, t: &PyToast, f: &PyFlows) -> PyResult<PyRounding> {
    let inner = flows::round_flows(&a.inner, &t.inner, &f.inner, &f.c, &RoundOptions::default()).map_err(err)?;
    Ok(PyRounding { inner })
}

#[pyfunction]
fn verify_rounded(py: Python<'_>, a: &PyAction, t: &PyToast, f: &PyFlows, r: &PyRounding) -> PyResult<Py<PyAny>> {
    let rep = flows::verify_rounded(&a.inner, &r.inner.psi, &f.c, &t.inner, &r.inner.log, None).map_err(err)?;
    to_py(py, &rep)
}

#[pyfunction]
fn flow_to_pieces(a: &PyAction, r: &PyRounding, sa: &PyShape, sb: &PyShape) -> PyResult<PyEquidecomposition> {
    Ok(PyEquidecomposition {
        inner: equidecomp::flow_to_pieces(&a.inner, &r.inner.psi, &sa.inner, &sb.inner).map_err(err)?,
    })
}

#[pyfunction]
fn verify_equidecomposition(
    py: Python<'_>,
    e: &PyEquidecomposition,
    sa: &PyShape,
    sb: &PyShape,
) -> PyResult<Py<PyAny>> {
    to_py(py, &equidecomp::verify_equidecomposition(&e.inner, &sa.inner.pixels, &sb.inner.pixels))
}

/// Run a CLI pipeline command from a TOML config string; returns the report.
#[pyfunction]
#[pyo3(signature = (command, config="", exhaustive=false))]
fn run(py: Python<'_>, command: &str, config: &str, exhaustive: bool) -> PyResult<Py<PyAny>> {
    let cfg: RunConfig = toml::from_str(config).map_err(err)?;
    let cmd = match command {
        "rasterize" => cli::Command::Rasterize,
        "witness" => cli::Command::Witness,
        "rainbow" => cli::Command::Rainbow,
        "bgd" => cli::Command::Bgd,
        "toast" => cli::Command::Toast,
        "flows" => cli::Command::Flows,
        "round" => cli::Command::Round,
        "square" => cli::Command::Square,
        other => return Err(err(format!("unknown command `{other}`"))),
    };
    let rep = cli::run_pipeline(&cmd, cfg, exhaustive, false).map_err(err)?;
    to_py(py, &rep)
}

#[pymodule]
fn toastkit_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("ToastkitError", m.py().get_type::<ToastkitError>())?;
    m.add_class::<PyAction>()?;
    m.add_class::<PyShape>()?;
    m.add_class::<PyWitness>()?;
    m.add_class::<PyRainbow>()?;
    m.add_class::<PyBgd>()?;
    m.add_class::<PyToast>()?;
    m.add_class::<PyFlows>()?;
    m.add_class::<PyRounding>()?;
    m.add_class::<PyEquidecomposition>()?;
    m.add_function(wrap_pyfunction!(shifted_cube_witness, m)?)?;
    m.add_function(wrap_pyfunction!(verify_witness, m)?)?;
    m.add_function(wrap_pyfunction!(build_rainbow_toast, m)?)?;
    m.add_function(wrap_pyfunction!(verify_rainbow_toast, m)?)?;
    m.add_function(wrap_pyfunction!(bgd_from_rainbow, m)?)?;
    m.add_function(wrap_pyfunction!(grid_line_bgd, m)?)?;
    m.add_function(wrap_pyfunction!(verify_bgd, m)?)?;
    m.add_function(wrap_pyfunction!(toast_from_bgd, m)?)?;
    m.add_function(wrap_pyfunction!(verify_toast, m)?)?;
    m.add_function(wrap_pyfunction!(rasterize, m)?)?;
    m.add_function(wrap_pyfunction!(minkowski_estimate, m)?)?;
    m.add_function(wrap_pyfunction!(integralize, m)?)?;
    m.add_function(wrap_pyfunction!(approx_flows, m)?)?;
    m.add_function(wrap_pyfunction!(round_flows, m)?)?;
    m.add_function(wrap_pyfunction!(verify_rounded, m)?)?;
    m.add_function(wrap_pyfunction!(flow_to_pieces, m)?)?;
    m.add_function(wrap_pyfunction!(verify_equidecomposition, m)?)?;
    m.add_function(wrap_pyfunction!(run, m)?)?;
    Ok(())
}
