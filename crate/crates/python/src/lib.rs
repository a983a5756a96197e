//! Python bindings: grids, symbols, amplitudes and the main workflows.

use std::fmt::Display;

use num_complex::Complex64;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use tpdo_core::diffcalc::{self, LatticeBox, LatticeFunction, MultiIndex};
use tpdo_core::fso::{self, PhaseFunction, TabulatedAmplitude};
use tpdo_core::grid::{self, FrequencyWindow, GridFunction, TorusGrid};
use tpdo_core::hyperbolic::{self, HyperbolicProblem, LatticeMultiplier, SnapshotSchedule};
use tpdo_core::periodise;
use tpdo_core::presets;
use tpdo_core::quantize;
use tpdo_core::symbols::{self, ExtendedSymbol, ExtensionSettings, SymbolOrder, SymbolTable, ThetaHatTable, ToroidalSymbol, TorusAmplitude};

trait OrRaise<T> {
    fn or_raise(self) -> PyResult<T>;
}

impl<T> OrRaise<T> for tpdo_core::Result<T> {
    fn or_raise(self) -> PyResult<T> {
        self.map_err(|e| PyValueError::new_err(e.to_string()))
    }
}

fn fraction<'py>(py: Python<'py>, r: impl Display) -> PyResult<Bound<'py, PyAny>> {
    py.import("fractions")?.getattr("Fraction")?.call1((r.to_string(),))
}

/// Evaluates a Python callable on every point of `b`.
fn tabulate(f: &Bound<'_, PyAny>, b: LatticeBox) -> PyResult<LatticeFunction<f64>> {
    let values = b.points().map(|p| f.call1((p,))?.extract::<f64>()).collect::<PyResult<Vec<f64>>>()?;
    LatticeFunction::from_table(b, values).or_raise()
}

fn check_len(what: &str, got: usize, dim: usize) -> PyResult<()> {
    if got != dim {
        return Err(PyValueError::new_err(format!("{what} has {got} entries, expected {dim}")));
    }
    Ok(())
}

#[pyclass(name = "TorusGrid", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid(TorusGrid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, points: usize) -> PyResult<Self> {
        TorusGrid::new(dim, points).map(PyGrid).or_raise()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn points(&self) -> usize {
        self.0.points()
    }

    #[getter]
    fn spacing(&self) -> f64 {
        self.0.spacing()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn node(&self, index: usize) -> PyResult<Vec<f64>> {
        if index >= self.0.len() {
            return Err(PyValueError::new_err(format!("node {index} out of range")));
        }
        Ok(self.0.node(index))
    }

    fn full_window(&self) -> PyWindow {
        PyWindow(self.0.full_window())
    }

    fn __repr__(&self) -> String {
        format!("TorusGrid(dim={}, points={})", self.0.dim(), self.0.points())
    }
}

#[pyclass(name = "FrequencyWindow", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyWindow(FrequencyWindow);

#[pymethods]
impl PyWindow {
    /// [-K, K-1]^n, or [-K, K]^n when `symmetric`.
    #[new]
    #[pyo3(signature = (dim, cutoff, symmetric = false))]
    fn new(dim: usize, cutoff: usize, symmetric: bool) -> PyResult<Self> {
        let w = if symmetric { FrequencyWindow::symmetric(dim, cutoff) } else { FrequencyWindow::new(dim, cutoff) };
        w.map(PyWindow).or_raise()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn cutoff(&self) -> usize {
        self.0.cutoff()
    }

    fn __len__(&self) -> usize {
        self.0.len()
    }

    fn frequencies(&self) -> Vec<Vec<i64>> {
        self.0.iter().collect()
    }

    fn __repr__(&self) -> String {
        format!("FrequencyWindow(dim={}, lo={}, hi={})", self.0.dim(), self.0.lo(), self.0.hi())
    }
}

#[pyclass(name = "GridFunction", frozen, from_py_object)]
#[derive(Clone)]
struct PyGridFunction(GridFunction);

#[pymethods]
impl PyGridFunction {
    #[new]
    fn new(grid: PyGrid, values: Vec<Complex64>) -> PyResult<Self> {
        GridFunction::new(grid.0, values).map(PyGridFunction).or_raise()
    }

    /// Samples `f(x)` at every grid node; `f` takes a list of coordinates.
    #[staticmethod]
    fn from_function(grid: PyGrid, f: &Bound<'_, PyAny>) -> PyResult<Self> {
        let g = grid.0;
        let values = (0..g.len()).map(|i| f.call1((g.node(i),))?.extract::<Complex64>()).collect::<PyResult<Vec<_>>>()?;
        Self::new(grid, values)
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid())
    }

    #[getter]
    fn values(&self) -> Vec<Complex64> {
        self.0.values().to_vec()
    }

    fn l2_norm(&self) -> f64 {
        self.0.l2_norm()
    }

    fn max_abs_diff(&self, other: &PyGridFunction) -> PyResult<f64> {
        if self.0.grid() != other.0.grid() {
            return Err(PyValueError::new_err("grids differ"));
        }
        Ok(self.0.max_abs_diff(&other.0))
    }

    /// Fourier coefficients on `window`.
    fn spectrum(&self, window: PyWindow) -> PyResult<Vec<Complex64>> {
        Ok(grid::forward_transform(&self.0, window.0).or_raise()?.coeffs().to_vec())
    }
}

#[pyclass(name = "Symbol", frozen, from_py_object)]
#[derive(Clone)]
struct PySymbol(ToroidalSymbol);

#[pymethods]
impl PySymbol {
    /// Named preset such as `"bracket m=-1"` or `"cos-bracket m=-1 a=0.5 b=1"`.
    #[staticmethod]
    fn preset(spec: &str, dim: usize) -> PyResult<Self> {
        presets::symbol_preset(spec, dim).map(PySymbol).or_raise()
    }

    /// Values indexed [x_index * len(window) + xi_index].
    #[staticmethod]
    #[pyo3(signature = (grid, window, values, m = 0.0))]
    fn table(grid: PyGrid, window: PyWindow, values: Vec<Complex64>, m: f64) -> PyResult<Self> {
        let table = SymbolTable::new(grid.0, window.0, values).or_raise()?;
        Ok(PySymbol(ToroidalSymbol::from_table(table, SymbolOrder::with_m(m))))
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    fn eval(&self, x: Vec<f64>, xi: Vec<i64>) -> PyResult<Complex64> {
        check_len("x", x.len(), self.0.dim())?;
        check_len("xi", xi.len(), self.0.dim())?;
        self.0.try_eval(&x, &xi).or_raise()
    }

    fn apply(&self, f: &PyGridFunction, window: PyWindow) -> PyResult<PyGridFunction> {
        quantize::apply_symbol_op(&self.0, &f.0, window.0).map(PyGridFunction).or_raise()
    }

    /// Rows over the grid's full window, columns over `window`.
    fn matrix(&self, grid: PyGrid, window: PyWindow) -> PyResult<Vec<Vec<Complex64>>> {
        let m = quantize::operator_matrix(&self.0, grid.0, window.0).or_raise()?;
        Ok((0..m.nrows()).map(|r| (0..m.ncols()).map(|c| m.get(r, c)).collect()).collect())
    }

    /// Schur bound and power-iteration norm of the truncated operator.
    fn l2_bound<'py>(&self, py: Python<'py>, grid: PyGrid, window: PyWindow) -> PyResult<Bound<'py, PyDict>> {
        let r = quantize::bound_report(&self.0, grid.0, window.0).or_raise()?;
        let d = PyDict::new(py);
        d.set_item("bound", r.bound)?;
        d.set_item("norm", r.empirical_norm)?;
        d.set_item("converged", r.converged)?;
        d.set_item("holds", r.holds())?;
        Ok(d)
    }

    /// Extension to real frequencies; by default the radius meets `tolerance`.
    #[pyo3(signature = (radius = None, tolerance = 1e-8))]
    fn extend(&self, radius: Option<usize>, tolerance: f64) -> PyResult<PyExtended> {
        let table = ThetaHatTable::shared();
        let settings = match radius {
            Some(r) => ExtensionSettings::with_radius(r),
            None => ExtensionSettings::for_tolerance(&table, tolerance, self.0.dim()).or_raise()?,
        };
        symbols::extend_symbol(&self.0, table, settings).map(PyExtended).or_raise()
    }
}

#[pyclass(name = "ExtendedSymbol", frozen)]
struct PyExtended(ExtendedSymbol);

#[pymethods]
impl PyExtended {
    #[getter]
    fn radius(&self) -> usize {
        self.0.radius()
    }

    #[getter]
    fn tail_weight(&self) -> f64 {
        self.0.tail_weight()
    }

    fn eval(&self, x: Vec<f64>, xi: Vec<f64>) -> PyResult<Complex64> {
        check_len("x", x.len(), self.0.dim())?;
        check_len("xi", xi.len(), self.0.dim())?;
        self.0.eval(&x, &xi).or_raise()
    }

    fn restriction_error(&self, grid: PyGrid, window: PyWindow) -> PyResult<f64> {
        self.0.restriction_error(grid.0, window.0).or_raise()
    }
}

#[pyclass(name = "Amplitude", frozen, from_py_object)]
#[derive(Clone)]
struct PyAmplitude(TorusAmplitude);

#[pymethods]
impl PyAmplitude {
    #[staticmethod]
    fn preset(spec: &str, dim: usize) -> PyResult<Self> {
        presets::amplitude_preset(spec, dim).map(PyAmplitude).or_raise()
    }

    #[staticmethod]
    fn from_symbol(symbol: &PySymbol) -> Self {
        PyAmplitude(TorusAmplitude::from_symbol(&symbol.0))
    }

    fn eval(&self, x: Vec<f64>, y: Vec<f64>, xi: Vec<i64>) -> PyResult<Complex64> {
        for (what, len) in [("x", x.len()), ("y", y.len()), ("xi", xi.len())] {
            check_len(what, len, self.0.dim())?;
        }
        Ok(self.0.eval(&x, &y, &xi))
    }

    fn apply(&self, f: &PyGridFunction, window: PyWindow) -> PyResult<PyGridFunction> {
        quantize::apply_amplitude_op(&self.0, &f.0, window.0).map(PyGridFunction).or_raise()
    }

    /// Symbol of Op(a) from the order-`order` reduction.
    fn to_symbol(&self, order: u32, grid: PyGrid, window: PyWindow) -> PyResult<PySymbol> {
        quantize::amplitude_to_symbol(&self.0, order, grid.0, window.0).map(PySymbol).or_raise()
    }
}

#[pyclass(name = "Phase", frozen, from_py_object)]
#[derive(Clone)]
struct PyPhase(PhaseFunction);

#[pymethods]
impl PyPhase {
    #[staticmethod]
    fn preset(spec: &str, dim: usize) -> PyResult<Self> {
        presets::phase_preset(spec, dim).map(PyPhase).or_raise()
    }

    #[staticmethod]
    fn linear(dim: usize) -> Self {
        PyPhase(PhaseFunction::linear(dim))
    }

    fn eval(&self, x: Vec<f64>, xi: Vec<i64>) -> PyResult<f64> {
        check_len("x", x.len(), self.0.dim())?;
        check_len("xi", xi.len(), self.0.dim())?;
        Ok(self.0.eval(&x, &xi))
    }

    /// T_phi,a applied to `f`, summing frequencies over `window`.
    fn apply(&self, amplitude: &PyAmplitude, f: &PyGridFunction, window: PyWindow) -> PyResult<PyGridFunction> {
        fso::apply_fso(&self.0, &amplitude.0, &f.0, window.0).map(PyGridFunction).or_raise()
    }
}

#[pyclass(name = "Multiplier", frozen, from_py_object)]
#[derive(Clone)]
struct PyMultiplier(LatticeMultiplier);

#[pymethods]
impl PyMultiplier {
    /// `"linear v=1"`, `"norm"`, `"bracket"`, ...
    #[staticmethod]
    fn preset(spec: &str, dim: usize) -> PyResult<Self> {
        presets::multiplier_preset(spec, dim).map(PyMultiplier).or_raise()
    }

    fn eval(&self, k: Vec<i64>) -> PyResult<f64> {
        check_len("k", k.len(), self.0.dim())?;
        Ok(self.0.eval(&k))
    }
}

/// Delta^alpha f(xi) for a float-valued callable on integer points.
#[pyfunction]
fn forward_difference(f: &Bound<'_, PyAny>, alpha: Vec<u32>, xi: Vec<i64>) -> PyResult<f64> {
    check_len("xi", xi.len(), alpha.len())?;
    let ext: Vec<i64> = alpha.iter().map(|&a| a as i64).collect();
    let table = tabulate(f, LatticeBox::stencil(&xi, &ext))?;
    diffcalc::forward_difference(&table, &MultiIndex::new(alpha), &xi).or_raise()
}

fn remainder_box(xi: &[i64], eta: &[i64], grow: i64) -> LatticeBox {
    LatticeBox::stencil(xi, eta).hull(&LatticeBox::stencil(xi, &vec![grow; xi.len()])).extend_hi(&vec![grow; xi.len()])
}

/// r_N(xi, eta) for a float-valued callable.
#[pyfunction]
fn taylor_remainder(f: &Bound<'_, PyAny>, xi: Vec<i64>, eta: Vec<i64>, order: u32) -> PyResult<f64> {
    check_len("eta", eta.len(), xi.len())?;
    let table = tabulate(f, remainder_box(&xi, &eta, order as i64))?;
    diffcalc::taylor_remainder(&table, &xi, &eta, order).or_raise()
}

/// Bound on |Delta^omega r_N(xi, eta)|.
#[pyfunction]
#[pyo3(signature = (f, xi, eta, order, omega = None))]
fn remainder_bound(f: &Bound<'_, PyAny>, xi: Vec<i64>, eta: Vec<i64>, order: u32, omega: Option<Vec<u32>>) -> PyResult<f64> {
    check_len("eta", eta.len(), xi.len())?;
    let omega = omega.unwrap_or_else(|| vec![0; xi.len()]);
    check_len("omega", omega.len(), xi.len())?;
    let table = tabulate(f, remainder_box(&xi, &eta, (order + omega.iter().sum::<u32>()) as i64))?;
    diffcalc::remainder_bound(&table, &xi, &eta, order, &MultiIndex::new(omega)).or_raise()
}

/// xi^(gamma) as a `fractions.Fraction`.
#[pyfunction]
fn falling_factorial<'py>(py: Python<'py>, xi: Vec<i64>, gamma: Vec<i64>) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, diffcalc::falling_factorial(&xi, &gamma).or_raise()?)
}

/// The nested-sum chain, equal to theta^(alpha) / alpha!.
#[pyfunction]
fn nested_sum<'py>(py: Python<'py>, theta: Vec<i64>, alpha: Vec<u32>) -> PyResult<Bound<'py, PyAny>> {
    fraction(py, diffcalc::nested_sum(&theta, &MultiIndex::new(alpha)).or_raise()?)
}

#[pyfunction]
fn theta_hat(xi: f64) -> Complex64 {
    symbols::theta_hat(ThetaHatTable::shared().theta(), xi)
}

/// Fourier coefficients on `window` of the periodisation of a compact preset.
#[pyfunction]
fn periodised_spectrum(initial: &str, grid: PyGrid, window: PyWindow) -> PyResult<Vec<Complex64>> {
    let u = presets::compact_preset(initial, grid.0.dim(), grid.0.spacing()).or_raise()?;
    periodise::periodised_spectrum(&u, grid.0, window.0).or_raise()
}

fn orders_dict<'py>(py: Python<'py>, outer: i64, gaps: Vec<f64>) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    d.set_item("outer", outer)?;
    d.set_item("monotone", gaps.windows(2).all(|p| p[1] < p[0]))?;
    d.set_item("discrepancies", gaps)?;
    Ok(d)
}

fn outer_cut(window: &PyWindow, outer: Option<i64>) -> i64 {
    outer.unwrap_or(2 * window.0.cutoff() as i64 / 3)
}

/// Asymptotic T P compositions against the direct one, beyond `outer`.
#[pyfunction]
#[pyo3(signature = (amplitude, symbol, grid, window, orders = vec![1, 2, 3], outer = None))]
fn compose_tp<'py>(
    py: Python<'py>,
    amplitude: &PyAmplitude,
    symbol: &PySymbol,
    grid: PyGrid,
    window: PyWindow,
    orders: Vec<u32>,
    outer: Option<i64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cut = outer_cut(&window, outer);
    let direct = fso::compose_tp_direct(&amplitude.0, &symbol.0, grid.0, window.0, grid.0.full_window()).or_raise()?;
    let gaps = orders
        .iter()
        .map(|&m| fso::compose_tp_asymptotic(&amplitude.0, &symbol.0, m, grid.0, window.0)?.max_abs_diff_beyond(&direct, cut))
        .collect::<tpdo_core::Result<Vec<f64>>>()
        .or_raise()?;
    orders_dict(py, cut, gaps)
}

/// Asymptotic P T compositions against the direct one, beyond `outer`.
#[pyfunction]
#[pyo3(signature = (symbol, phase, amplitude, grid, window, orders = vec![1, 2, 3], radius = 32, outer = None))]
#[allow(clippy::too_many_arguments)]
fn compose_pt<'py>(
    py: Python<'py>,
    symbol: &PySymbol,
    phase: &PyPhase,
    amplitude: &PyAmplitude,
    grid: PyGrid,
    window: PyWindow,
    orders: Vec<u32>,
    radius: usize,
    outer: Option<i64>,
) -> PyResult<Bound<'py, PyDict>> {
    let cut = outer_cut(&window, outer);
    let ext = symbols::extend_symbol(&symbol.0, ThetaHatTable::shared(), ExtensionSettings::with_radius(radius)).or_raise()?;
    let direct: TabulatedAmplitude = fso::compose_pt_direct(&symbol.0, &phase.0, &amplitude.0, grid.0, window.0).or_raise()?;
    let mut gaps = vec![];
    let mut flagged = false;
    for &m in &orders {
        let e = fso::compose_pt_asymptotic(&ext, &phase.0, &amplitude.0, m, grid.0, window.0).or_raise()?;
        flagged |= e.flagged;
        gaps.push(e.amplitude.max_abs_diff_beyond(&direct, cut).or_raise()?);
    }
    let d = orders_dict(py, cut, gaps)?;
    d.set_item("flagged", flagged)?;
    Ok(d)
}

fn problem(a1: &PyMultiplier, initial: &PyGridFunction, t_final: f64, dt: f64, a0: Option<&PySymbol>) -> PyResult<HyperbolicProblem> {
    HyperbolicProblem::new(a1.0.clone(), a0.map(|s| s.0.clone()), initial.0.clone(), t_final, dt).or_raise()
}

/// Split-step evolution of i u_t = a1(D) u + a0(x, D) u.
#[pyfunction]
#[pyo3(signature = (a1, initial, t_final, dt, a0 = None, snapshots = 4))]
fn solve<'py>(
    py: Python<'py>,
    a1: &PyMultiplier,
    initial: &PyGridFunction,
    t_final: f64,
    dt: f64,
    a0: Option<&PySymbol>,
    snapshots: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let p = problem(a1, initial, t_final, dt, a0)?.with_schedule(SnapshotSchedule::Uniform { count: snapshots });
    let trace = py.detach(|| hyperbolic::solve_perturbed(&p)).or_raise()?;
    let d = PyDict::new(py);
    d.set_item("times", trace.times.clone())?;
    d.set_item("norms", trace.norms.clone())?;
    d.set_item("snapshots", trace.snapshots.into_iter().map(PyGridFunction).collect::<Vec<_>>())?;
    Ok(d)
}

/// Differences and observed orders under repeated dt halving.
#[pyfunction]
#[pyo3(signature = (a1, initial, t_final, dt, a0 = None, levels = 4))]
fn self_convergence<'py>(
    py: Python<'py>,
    a1: &PyMultiplier,
    initial: &PyGridFunction,
    t_final: f64,
    dt: f64,
    a0: Option<&PySymbol>,
    levels: usize,
) -> PyResult<Bound<'py, PyDict>> {
    let p = problem(a1, initial, t_final, dt, a0)?;
    let r = py.detach(|| hyperbolic::self_convergence(&p, levels)).or_raise()?;
    let d = PyDict::new(py);
    d.set_item("dts", r.dts)?;
    d.set_item("differences", r.differences)?;
    d.set_item("orders", r.orders)?;
    d.set_item("exact", r.exact)?;
    Ok(d)
}

#[pymodule]
fn tpdo(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyWindow>()?;
    m.add_class::<PyGridFunction>()?;
    m.add_class::<PySymbol>()?;
    m.add_class::<PyExtended>()?;
    m.add_class::<PyAmplitude>()?;
    m.add_class::<PyPhase>()?;
    m.add_class::<PyMultiplier>()?;
    m.add_function(wrap_pyfunction!(forward_difference, m)?)?;
    m.add_function(wrap_pyfunction!(taylor_remainder, m)?)?;
    m.add_function(wrap_pyfunction!(remainder_bound, m)?)?;
    m.add_function(wrap_pyfunction!(falling_factorial, m)?)?;
    m.add_function(wrap_pyfunction!(nested_sum, m)?)?;
    m.add_function(wrap_pyfunction!(theta_hat, m)?)?;
    m.add_function(wrap_pyfunction!(periodised_spectrum, m)?)?;
    m.add_function(wrap_pyfunction!(compose_tp, m)?)?;
    m.add_function(wrap_pyfunction!(compose_pt, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(self_convergence, m)?)?;
    Ok(())
}
