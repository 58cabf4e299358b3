//! Payoffs, interpolation, intervention operators and the one-dimensional
//! European and Bermudan runners.

use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::models::{GreensSpectrum, ProcessParams};
use crate::projection::{build_kernel, BasisKind, ToleranceConfig};
use crate::stepping::{AsymptoticForm, AuxiliaryGrid, Propagator, QuadratureRule};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PayoffKind {
    Call,
    Put,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Payoff {
    pub kind: PayoffKind,
    pub strike: f64,
}

impl Payoff {
    pub fn new(kind: PayoffKind, strike: f64) -> Result<Self> {
        if !(strike > 0.0 && strike.is_finite()) {
            return Err(Error::InvalidArgument(format!("strike = {strike} must be positive")));
        }
        Ok(Self { kind, strike })
    }
}

/// Payoff at log price `x`.
pub fn payoff_eval(payoff: &Payoff, x: f64) -> f64 {
    let s = x.exp();
    match payoff.kind {
        PayoffKind::Call => (s - payoff.strike).max(0.0),
        PayoffKind::Put => (payoff.strike - s).max(0.0),
    }
}

/// Values on a grid, natural order.
#[derive(Debug, Clone, PartialEq)]
pub struct ValueCurve {
    pub grid: Grid1D,
    pub values: Vec<f64>,
}

impl ValueCurve {
    pub fn new(grid: Grid1D, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::LengthMismatch { expected: grid.len(), got: values.len() });
        }
        Ok(Self { grid, values })
    }

    pub fn from_payoff(grid: Grid1D, payoff: &Payoff) -> Self {
        let values = grid.nodes().iter().map(|&x| payoff_eval(payoff, x)).collect();
        Self { grid, values }
    }

    /// Write rows `x, v`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "x,value")?;
        for (i, v) in self.values.iter().enumerate() {
            let x = self.grid.node_at(i);
            writeln!(out, "{},{}", crate::report::fmt_sig(x, 11), crate::report::fmt_sig(*v, 11))?;
        }
        Ok(())
    }
}

/// Left node index and weight for linear interpolation at `x`; flat beyond
/// the last node.
pub(crate) fn bracket(grid: &Grid1D, x: f64) -> (usize, f64) {
    let n = grid.len();
    let z = (x - grid.x_min()) / grid.dx();
    if z >= (n - 1) as f64 {
        return (n - 2, 1.0);
    }
    let z = z.max(0.0);
    let i = (z.floor() as usize).min(n - 2);
    (i, z - i as f64)
}

/// Linear interpolation in `x`.
pub fn linear_interpolate(curve: &ValueCurve, x: f64) -> Result<f64> {
    let g = &curve.grid;
    if x.is_nan() || x < g.x_min() - 1e-12 * g.dx() {
        return Err(Error::InvalidArgument(format!("x = {x} below x_min = {}", g.x_min())));
    }
    let (i, t) = bracket(g, x);
    Ok(curve.values[i] + t * (curve.values[i + 1] - curve.values[i]))
}

/// Linear interpolation in the price `s = e^x` between the bracketing nodes.
pub fn price_interpolate(curve: &ValueCurve, s: f64) -> Result<f64> {
    let g = &curve.grid;
    if !(s > 0.0) || s < g.x_min().exp() * (1.0 - 1e-12) {
        return Err(Error::InvalidArgument(format!("price {s} below the grid")));
    }
    let (i, t) = bracket(g, s.ln());
    if t >= 1.0 || t <= 0.0 {
        return Ok(curve.values[i] + t * (curve.values[i + 1] - curve.values[i]));
    }
    let s0 = g.node_at(i).exp();
    let s1 = g.node_at(i + 1).exp();
    let t = ((s - s0) / (s1 - s0)).clamp(0.0, 1.0);
    Ok(curve.values[i] + t * (curve.values[i + 1] - curve.values[i]))
}

/// Coordinate in which the dividend-shifted continuation value is
/// interpolated.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InterpolationSpace {
    LogPrice,
    Price,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BermudanPutDividend {
    pub strike: f64,
    pub dividend: f64,
    pub interpolation: InterpolationSpace,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum InterventionSpec {
    None,
    BermudanPutDividend(BermudanPutDividend),
}

/// `max(v(log(max(e^x - D, e^x_min))), max(K - e^x, 0))`.
pub fn bermudan_intervention(curve: &ValueCurve, spec: &BermudanPutDividend) -> Result<ValueCurve> {
    if !(spec.dividend >= 0.0) {
        return Err(Error::InvalidArgument("dividend must be non-negative".into()));
    }
    let g = curve.grid;
    let floor = g.x_min().exp();
    let put = Payoff { kind: PayoffKind::Put, strike: spec.strike };
    let mut out = Vec::with_capacity(g.len());
    for i in 0..g.len() {
        let x = g.node_at(i);
        let s = (x.exp() - spec.dividend).max(floor);
        let cont = match spec.interpolation {
            InterpolationSpace::Price => price_interpolate(curve, s)?,
            InterpolationSpace::LogPrice => linear_interpolate(curve, s.ln().max(g.x_min()))?,
        };
        out.push(cont.max(payoff_eval(&put, x)));
    }
    Ok(ValueCurve { grid: g, values: out })
}

pub fn apply_intervention(curve: &ValueCurve, spec: &InterventionSpec) -> Result<ValueCurve> {
    match spec {
        InterventionSpec::None => Ok(curve.clone()),
        InterventionSpec::BermudanPutDividend(b) => bermudan_intervention(curve, b),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Method {
    MonoLinear,
    MonoConstant,
    FstTrapezoidal,
    FstSimpson,
}

impl Method {
    pub const ALL: [Method; 4] =
        [Method::MonoLinear, Method::MonoConstant, Method::FstTrapezoidal, Method::FstSimpson];

    pub fn name(&self) -> &'static str {
        match self {
            Method::MonoLinear => "mono-linear",
            Method::MonoConstant => "mono-const",
            Method::FstTrapezoidal => "fst-trap",
            Method::FstSimpson => "fst-simpson",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|m| m.name() == s)
    }

    /// Build the one-step operator on `grid`.
    pub fn propagator(
        &self,
        grid: &Grid1D,
        params: &ProcessParams,
        dtau: f64,
        tol: &ToleranceConfig,
    ) -> Result<Propagator> {
        Ok(match self {
            Method::MonoLinear => {
                Propagator::monotone(build_kernel(grid, params, dtau, BasisKind::PiecewiseLinear, tol)?)
            }
            Method::MonoConstant => {
                Propagator::monotone(build_kernel(grid, params, dtau, BasisKind::PiecewiseConstant, tol)?)
            }
            Method::FstTrapezoidal => {
                Propagator::fourier(GreensSpectrum::new(grid, dtau, params)?, QuadratureRule::Trapezoidal)
            }
            Method::FstSimpson => {
                Propagator::fourier(GreensSpectrum::new(grid, dtau, params)?, QuadratureRule::Simpson)
            }
        })
    }
}

/// Log-price grid centred on `log s0`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub s0: f64,
    pub below: f64,
    pub above: f64,
    pub n_nodes: usize,
}

impl GridSpec {
    pub fn build(&self) -> Result<Grid1D> {
        if !(self.s0 > 0.0) {
            return Err(Error::InvalidGrid("s0 must be positive".into()));
        }
        let c = self.s0.ln();
        Grid1D::new(c - self.below, c + self.above, self.n_nodes)
    }
}

/// Single-step European solution. `guard` wraps the step in the auxiliary
/// grid with the given right wing.
pub fn run_european_curve(
    params: &ProcessParams,
    grid: &GridSpec,
    payoff: &Payoff,
    method: Method,
    horizon: f64,
    tol: &ToleranceConfig,
    guard: Option<AsymptoticForm>,
) -> Result<ValueCurve> {
    let g = grid.build()?;
    let v0 = ValueCurve::from_payoff(g, payoff);
    let values = match guard {
        None => method.propagator(&g, params, horizon, tol)?.step(&v0.values)?,
        Some(a) => {
            let aux = AuxiliaryGrid::new(&g)?;
            method.propagator(&aux.doubled, params, horizon, tol)?.guarded_step(&v0.values, &aux, a)?
        }
    };
    ValueCurve::new(g, values)
}

pub fn run_european(
    params: &ProcessParams,
    grid: &GridSpec,
    payoff: &Payoff,
    method: Method,
    horizon: f64,
    tol: &ToleranceConfig,
) -> Result<f64> {
    let c = run_european_curve(params, grid, payoff, method, horizon, tol, None)?;
    linear_interpolate(&c, grid.s0.ln())
}

/// Bermudan solution with the intervention applied at each of the
/// `T / dtau` monitoring dates after the terminal one.
#[allow(clippy::too_many_arguments)]
pub fn run_bermudan_curve(
    params: &ProcessParams,
    grid: &GridSpec,
    payoff: &Payoff,
    spec: &InterventionSpec,
    method: Method,
    horizon: f64,
    dtau: f64,
    tol: &ToleranceConfig,
    a_form: AsymptoticForm,
) -> Result<ValueCurve> {
    let m = monitoring_count(horizon, dtau)?;
    let g = grid.build()?;
    let aux = AuxiliaryGrid::new(&g)?;
    let prop = method.propagator(&aux.doubled, params, dtau, tol)?;
    let mut v = ValueCurve::from_payoff(g, payoff);
    for _ in 0..m {
        v.values = prop.guarded_step(&v.values, &aux, a_form)?;
        v = apply_intervention(&v, spec)?;
    }
    Ok(v)
}

#[allow(clippy::too_many_arguments)]
pub fn run_bermudan(
    params: &ProcessParams,
    grid: &GridSpec,
    payoff: &Payoff,
    spec: &InterventionSpec,
    method: Method,
    horizon: f64,
    dtau: f64,
    tol: &ToleranceConfig,
) -> Result<f64> {
    let c = run_bermudan_curve(params, grid, payoff, spec, method, horizon, dtau, tol, AsymptoticForm::Zero)?;
    linear_interpolate(&c, grid.s0.ln())
}

pub(crate) fn monitoring_count(horizon: f64, dtau: f64) -> Result<usize> {
    if !(horizon > 0.0 && dtau > 0.0) {
        return Err(Error::InvalidArgument("horizon and dtau must be positive".into()));
    }
    let m = (horizon / dtau).round();
    if m < 1.0 || (m * dtau - horizon).abs() > 1e-9 * horizon {
        return Err(Error::InvalidArgument(format!("horizon {horizon} is not a multiple of {dtau}")));
    }
    Ok(m as usize)
}
