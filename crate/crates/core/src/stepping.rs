//! Single timestep propagators: the quadrature based Fourier step, the
//! epsilon-monotone step and the wrap-around guard on a doubled grid.

use crate::error::{Error, Result};
use crate::grid::{Grid1D, SpectralPlan};
use crate::models::GreensSpectrum;
use crate::projection::ProjectedKernel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum QuadratureRule {
    Trapezoidal,
    Simpson,
}

impl QuadratureRule {
    /// Weights in natural order. Trapezoidal halves both end nodes; Simpson
    /// uses 1/3 at both ends and alternates 2/3, 4/3 on even and odd
    /// interior entries.
    pub fn weights(&self, n: usize) -> Vec<f64> {
        let mut w: Vec<f64> = match self {
            QuadratureRule::Trapezoidal => vec![1.0; n],
            QuadratureRule::Simpson => {
                (0..n).map(|i| if i % 2 == 0 { 2.0 / 3.0 } else { 4.0 / 3.0 }).collect()
            }
        };
        let end = match self {
            QuadratureRule::Trapezoidal => 0.5,
            QuadratureRule::Simpson => 1.0 / 3.0,
        };
        if n > 0 {
            w[0] = end;
            w[n - 1] = end;
        }
        w
    }
}

/// Large-x extension used on the right wing of the auxiliary grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum AsymptoticForm {
    Zero,
    ExpX,
    /// Constant extension by the last base value.
    Flat,
}

/// Doubled grid `[x_min - P/2, x_max + P/2)` with `2N` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AuxiliaryGrid {
    pub base: Grid1D,
    pub doubled: Grid1D,
}

impl AuxiliaryGrid {
    pub fn new(base: &Grid1D) -> Result<Self> {
        let doubled = Grid1D::from_center(base.center(), base.dx(), 2 * base.len())?;
        Ok(Self { base: *base, doubled })
    }

    /// Offset of the first base node inside the doubled grid.
    pub fn offset(&self) -> usize {
        self.base.len() / 2
    }

    /// Extend base values to the doubled grid: constant `v(x_min)` on the
    /// left, `A(x)` on the right.
    pub fn extend(&self, values: &[f64], a_form: AsymptoticForm) -> Result<Vec<f64>> {
        let n = self.base.len();
        if values.len() != n {
            return Err(Error::LengthMismatch { expected: n, got: values.len() });
        }
        let off = self.offset();
        let mut out = Vec::with_capacity(2 * n);
        out.extend(std::iter::repeat_n(values[0], off));
        out.extend_from_slice(values);
        for i in off + n..2 * n {
            out.push(match a_form {
                AsymptoticForm::Zero => 0.0,
                AsymptoticForm::ExpX => self.doubled.node_at(i).exp(),
                AsymptoticForm::Flat => values[n - 1],
            });
        }
        Ok(out)
    }

    /// Base node values out of a doubled-grid vector.
    pub fn restrict(&self, aux: &[f64]) -> Vec<f64> {
        let off = self.offset();
        aux[off..off + self.base.len()].to_vec()
    }
}

/// `idft(dft(w v) G)`.
pub fn fst_step(values: &[f64], spectrum: &GreensSpectrum, rule: QuadratureRule) -> Result<Vec<f64>> {
    Propagator::fourier(spectrum.clone(), rule).step(values)
}

/// `dx sum_j g~_{k-j} v_j` through the kernel spectrum.
pub fn mono_step(values: &[f64], kernel: &ProjectedKernel) -> Result<Vec<f64>> {
    Propagator::monotone(kernel.clone()).step(values)
}

/// Direct periodic convolution `dx sum_j g_{k-j} v_j`, for testing.
pub fn brute_force_convolve(values: &[f64], weights: &[f64], dx: f64) -> Vec<f64> {
    let n = values.len();
    let h = n / 2;
    (0..n)
        .map(|k| {
            let mut acc = 0.0;
            for (j, v) in values.iter().enumerate() {
                // signed offset k - j lives at natural index (k - j + N/2) mod N
                let d = (k + n + h - j) % n;
                acc += weights[d] * v;
            }
            dx * acc
        })
        .collect()
}

#[derive(Debug, Clone)]
enum Scheme {
    Monotone(ProjectedKernel),
    Fourier { spectrum: GreensSpectrum, weights: Vec<f64> },
}

/// A prepared one-step operator on a fixed grid.
#[derive(Debug, Clone)]
pub struct Propagator {
    grid: Grid1D,
    plan: SpectralPlan,
    scheme: Scheme,
}

impl Propagator {
    pub fn monotone(kernel: ProjectedKernel) -> Self {
        Self { grid: kernel.grid, plan: SpectralPlan::new(kernel.grid.len()), scheme: Scheme::Monotone(kernel) }
    }

    pub fn fourier(spectrum: GreensSpectrum, rule: QuadratureRule) -> Self {
        let n = spectrum.grid.len();
        Self {
            grid: spectrum.grid,
            plan: SpectralPlan::new(n),
            scheme: Scheme::Fourier { weights: rule.weights(n), spectrum },
        }
    }

    pub fn grid(&self) -> &Grid1D {
        &self.grid
    }

    pub fn kernel(&self) -> Option<&ProjectedKernel> {
        match &self.scheme {
            Scheme::Monotone(k) => Some(k),
            Scheme::Fourier { .. } => None,
        }
    }

    pub fn step(&self, values: &[f64]) -> Result<Vec<f64>> {
        match &self.scheme {
            Scheme::Monotone(k) => self.plan.convolve(values, &k.spectrum),
            Scheme::Fourier { spectrum, weights } => {
                if values.len() != weights.len() {
                    return Err(Error::LengthMismatch { expected: weights.len(), got: values.len() });
                }
                let wv: Vec<f64> = values.iter().zip(weights).map(|(v, w)| v * w).collect();
                self.plan.convolve(&wv, &spectrum.spectrum)
            }
        }
    }

    /// Step base-grid values on the auxiliary grid and keep the base nodes.
    /// The propagator must live on `aux.doubled`.
    pub fn guarded_step(&self, values: &[f64], aux: &AuxiliaryGrid, a_form: AsymptoticForm) -> Result<Vec<f64>> {
        if self.grid != aux.doubled {
            return Err(Error::InvalidArgument("propagator is not built on the auxiliary grid".into()));
        }
        let ext = aux.extend(values, a_form)?;
        Ok(aux.restrict(&self.step(&ext)?))
    }
}

/// Free-function form of [`Propagator::guarded_step`].
pub fn wrap_guard_step(
    values: &[f64],
    aux: &AuxiliaryGrid,
    a_form: AsymptoticForm,
    stepper: &Propagator,
) -> Result<Vec<f64>> {
    stepper.guarded_step(values, aux, a_form)
}
