//! Python bindings for the monofourier pricing and portfolio core.

use monofourier::contracts::{
    run_bermudan, run_european, BermudanPutDividend, GridSpec, InterpolationSpace, InterventionSpec, Method, Payoff,
    PayoffKind,
};
use monofourier::grid::Grid1D;
use monofourier::meanvar::{
    constant_mix_moments, monte_carlo, ConstantMix, MVConfig, MeanVarianceSolver, PolicyStore,
};
use monofourier::models::{JumpSpec, ProcessParams};
use monofourier::projection::{build_kernel, BasisKind, ToleranceConfig};
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;

fn py_err(e: monofourier::Error) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn method(name: &str) -> PyResult<Method> {
    Method::parse(name).ok_or_else(|| {
        PyValueError::new_err(format!(
            "unknown method {name:?}; expected one of mono-linear, mono-const, fst-trap, fst-simpson"
        ))
    })
}

/// Uniform log-price grid.
#[pyclass(name = "Grid", frozen)]
struct PyGrid {
    inner: Grid1D,
}

#[pymethods]
impl PyGrid {
    #[new]
    fn new(x_min: f64, x_max: f64, n: usize) -> PyResult<Self> {
        Ok(Self { inner: Grid1D::new(x_min, x_max, n).map_err(py_err)? })
    }

    #[getter]
    fn dx(&self) -> f64 {
        self.inner.dx()
    }

    #[getter]
    fn period(&self) -> f64 {
        self.inner.period()
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn nodes(&self) -> Vec<f64> {
        self.inner.nodes()
    }

    fn __repr__(&self) -> String {
        format!("Grid(x_min={}, x_max={}, n={})", self.inner.x_min(), self.inner.x_max(), self.inner.len())
    }
}

/// Jump diffusion parameters. Use the static constructors.
#[pyclass(name = "Process", frozen)]
struct PyProcess {
    inner: ProcessParams,
}

#[pymethods]
impl PyProcess {
    #[staticmethod]
    fn kou(rate: f64, sigma: f64, lam: f64, p_up: f64, eta_up: f64, eta_down: f64) -> PyResult<Self> {
        let jumps = JumpSpec::Kou { p_up, eta_up, eta_down };
        Ok(Self { inner: ProcessParams::pricing(rate, sigma, lam, jumps).map_err(py_err)? })
    }

    #[staticmethod]
    fn merton(rate: f64, sigma: f64, lam: f64, nu: f64, gamma: f64) -> PyResult<Self> {
        let jumps = JumpSpec::Merton { nu, gamma };
        Ok(Self { inner: ProcessParams::pricing(rate, sigma, lam, jumps).map_err(py_err)? })
    }

    /// Kou model under a real-world drift, without discounting.
    #[staticmethod]
    fn kou_drift(drift: f64, sigma: f64, lam: f64, p_up: f64, eta_up: f64, eta_down: f64) -> PyResult<Self> {
        let jumps = JumpSpec::Kou { p_up, eta_up, eta_down };
        Ok(Self { inner: ProcessParams::mean_variance(drift, sigma, lam, jumps).map_err(py_err)? })
    }

    #[getter]
    fn kappa(&self) -> f64 {
        self.inner.kappa()
    }

    #[getter]
    fn discount(&self) -> f64 {
        self.inner.discount()
    }

    fn __repr__(&self) -> String {
        format!("{:?}", self.inner)
    }
}

#[pyclass(name = "Kernel", frozen)]
struct PyKernel {
    #[pyo3(get)]
    alpha: usize,
    #[pyo3(get)]
    weights: Vec<f64>,
    #[pyo3(get)]
    test1: f64,
    #[pyo3(get)]
    test2: f64,
    #[pyo3(get)]
    mass: f64,
}

/// Monotone projected kernel for one timestep.
#[pyfunction]
#[pyo3(signature = (grid, process, dtau, basis = "linear", eps1 = 1e-6, eps2 = 1e-6, alpha_max = 64, horizon = None))]
#[allow(clippy::too_many_arguments)]
fn kernel(
    grid: &PyGrid,
    process: &PyProcess,
    dtau: f64,
    basis: &str,
    eps1: f64,
    eps2: f64,
    alpha_max: usize,
    horizon: Option<f64>,
) -> PyResult<PyKernel> {
    let basis = match basis {
        "linear" => BasisKind::PiecewiseLinear,
        "constant" => BasisKind::PiecewiseConstant,
        other => return Err(PyValueError::new_err(format!("unknown basis {other:?}"))),
    };
    let tol = ToleranceConfig::new(eps1, eps2, alpha_max, horizon.unwrap_or(dtau)).map_err(py_err)?;
    let k = build_kernel(&grid.inner, &process.inner, dtau, basis, &tol).map_err(py_err)?;
    Ok(PyKernel { alpha: k.alpha, weights: k.weights, test1: k.test1, test2: k.test2, mass: k.c1 })
}

/// European option value at `s0`.
#[pyfunction]
#[pyo3(signature = (process, strike, horizon, n, method_name = "mono-linear", kind = "call", s0 = 100.0, below = 10.0, above = 10.0))]
#[allow(clippy::too_many_arguments)]
fn european(
    py: Python<'_>,
    process: &PyProcess,
    strike: f64,
    horizon: f64,
    n: usize,
    method_name: &str,
    kind: &str,
    s0: f64,
    below: f64,
    above: f64,
) -> PyResult<f64> {
    let kind = match kind {
        "call" => PayoffKind::Call,
        "put" => PayoffKind::Put,
        other => return Err(PyValueError::new_err(format!("unknown payoff {other:?}"))),
    };
    let payoff = Payoff::new(kind, strike).map_err(py_err)?;
    let m = method(method_name)?;
    let grid = GridSpec { s0, below, above, n_nodes: n };
    let params = process.inner;
    py.detach(|| run_european(&params, &grid, &payoff, m, horizon, &ToleranceConfig::with_horizon(horizon)))
        .map_err(py_err)
}

/// Bermudan put with a discrete dividend paid at each monitoring date.
#[pyfunction]
#[pyo3(signature = (process, strike, dividend, horizon, dtau, n, method_name = "mono-linear", s0 = 100.0, below = 10.0, above = 10.0))]
#[allow(clippy::too_many_arguments)]
fn bermudan_put(
    py: Python<'_>,
    process: &PyProcess,
    strike: f64,
    dividend: f64,
    horizon: f64,
    dtau: f64,
    n: usize,
    method_name: &str,
    s0: f64,
    below: f64,
    above: f64,
) -> PyResult<f64> {
    let payoff = Payoff::new(PayoffKind::Put, strike).map_err(py_err)?;
    let m = method(method_name)?;
    let grid = GridSpec { s0, below, above, n_nodes: n };
    let spec = InterventionSpec::BermudanPutDividend(BermudanPutDividend {
        strike,
        dividend,
        interpolation: InterpolationSpace::Price,
    });
    let params = process.inner;
    py.detach(|| {
        run_bermudan(&params, &grid, &payoff, &spec, m, horizon, dtau, &ToleranceConfig::with_horizon(horizon))
    })
    .map_err(py_err)
}

/// Mean-variance portfolio problem on an `n_x` by `n_b` grid with the
/// reference market and contribution schedule.
#[pyclass(name = "MeanVariance", frozen)]
struct PyMeanVariance {
    solver: MeanVarianceSolver,
}

#[pymethods]
impl PyMeanVariance {
    #[new]
    fn new(n_x: usize, n_b: usize) -> PyResult<Self> {
        Ok(Self { solver: MeanVarianceSolver::new(&MVConfig::example(n_x, n_b)).map_err(py_err)? })
    }

    /// Returns `(value, mean, std)` of terminal wealth for target `w_star`.
    fn evaluate(&self, py: Python<'_>, w_star: f64) -> PyResult<(f64, f64, f64)> {
        let (sol, m) = py.detach(|| self.solver.evaluate(w_star)).map_err(py_err)?;
        Ok((sol.value, m.mean, m.std))
    }

    /// Returns `(mean, std, median)` of simulated terminal wealth under the
    /// optimal policy for `w_star`.
    #[pyo3(signature = (w_star, n_sim, seed = 1))]
    fn monte_carlo(&self, py: Python<'_>, w_star: f64, n_sim: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
        let r = py
            .detach(|| {
                let sol = self.solver.solve(w_star)?;
                monte_carlo(&sol.policy, &self.solver.config, n_sim, seed)
            })
            .map_err(py_err)?;
        Ok((r.mean, r.std, r.median))
    }

    /// Moments of a constant-mix strategy from the grid solver.
    fn constant_mix(&self, py: Python<'_>, fraction: f64) -> PyResult<(f64, f64)> {
        let s = &self.solver;
        let policy = PolicyStore::constant_mix(&s.grid, &s.bgrid, &s.config.injections, fraction);
        let m = py.detach(|| s.moments(&policy)).map_err(py_err)?;
        Ok((m.mean, m.std))
    }
}

/// Closed-form `(mean, std)` of a constant-mix strategy.
#[pyfunction]
fn constant_mix(fraction: f64) -> PyResult<(f64, f64)> {
    let m = constant_mix_moments(fraction, &MVConfig::example(64, 40)).map_err(py_err)?;
    Ok((m.mean, m.std))
}

/// Simulated `(mean, std, median)` for a constant-mix strategy.
#[pyfunction]
#[pyo3(signature = (fraction, n_sim, seed = 1))]
fn constant_mix_mc(py: Python<'_>, fraction: f64, n_sim: usize, seed: u64) -> PyResult<(f64, f64, f64)> {
    let cfg = MVConfig::example(64, 40);
    let rule = ConstantMix { fraction, injections: cfg.injections.clone() };
    let r = py.detach(|| monte_carlo(&rule, &cfg, n_sim, seed)).map_err(py_err)?;
    Ok((r.mean, r.std, r.median))
}

#[pymodule]
fn monofourier_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyProcess>()?;
    m.add_class::<PyKernel>()?;
    m.add_class::<PyMeanVariance>()?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(european, m)?)?;
    m.add_function(wrap_pyfunction!(bermudan_put, m)?)?;
    m.add_function(wrap_pyfunction!(constant_mix, m)?)?;
    m.add_function(wrap_pyfunction!(constant_mix_mc, m)?)?;
    Ok(())
}
