//! Uniform periodic grids, frequency bookkeeping and the spectral
//! convolution shared by all timestepping schemes.
//!
//! Physical value arrays are kept in natural order: entry `i` belongs to
//! signed node `j = i - N/2`, so entry 0 is `x_min`. Spectra are kept in the
//! storage order of the FFT routine (signed frequency `k` at `k mod N`).

use std::sync::Arc;

use num_complex::Complex64;
use rustfft::{Fft, FftPlanner};

use crate::error::{Error, Result};

/// Uniform grid of `N` nodes `x_j = x_hat0 + j dx`, `j = -N/2 .. N/2-1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid1D {
    x_hat0: f64,
    dx: f64,
    n: usize,
}

impl Grid1D {
    /// Grid covering `[x_min, x_max)` with period `x_max - x_min`.
    pub fn new(x_min: f64, x_max: f64, n: usize) -> Result<Self> {
        if !(x_min.is_finite() && x_max.is_finite()) || x_max <= x_min {
            return Err(Error::InvalidGrid(format!(
                "need finite x_min < x_max, got [{x_min}, {x_max}]"
            )));
        }
        check_size(n)?;
        let dx = (x_max - x_min) / n as f64;
        Ok(Self { x_hat0: x_min + (n / 2) as f64 * dx, dx, n })
    }

    /// Grid with centre node `x_hat0` and spacing `dx`.
    pub fn from_center(x_hat0: f64, dx: f64, n: usize) -> Result<Self> {
        if !x_hat0.is_finite() || !(dx > 0.0 && dx.is_finite()) {
            return Err(Error::InvalidGrid(format!("bad centre {x_hat0} or spacing {dx}")));
        }
        check_size(n)?;
        Ok(Self { x_hat0, dx, n })
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    pub fn dx(&self) -> f64 {
        self.dx
    }

    pub fn center(&self) -> f64 {
        self.x_hat0
    }

    /// Period `P = N dx`.
    pub fn period(&self) -> f64 {
        self.n as f64 * self.dx
    }

    pub fn x_min(&self) -> f64 {
        self.node_at(0)
    }

    /// Right end of the periodic domain (not itself a node).
    pub fn x_max(&self) -> f64 {
        self.x_min() + self.period()
    }

    /// Coordinate of signed node `j`.
    pub fn node(&self, j: isize) -> f64 {
        self.x_hat0 + j as f64 * self.dx
    }

    /// Coordinate of natural-order entry `i`.
    pub fn node_at(&self, i: usize) -> f64 {
        self.node(i as isize - (self.n / 2) as isize)
    }

    /// All node coordinates in natural order.
    pub fn nodes(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.node_at(i)).collect()
    }

    pub fn frequencies(&self) -> FrequencyIndexing {
        FrequencyIndexing { n: self.n, period: self.period() }
    }
}

fn check_size(n: usize) -> Result<()> {
    if n < 2 || !n.is_power_of_two() {
        return Err(Error::InvalidGrid(format!("node count {n} is not a power of two >= 2")));
    }
    Ok(())
}

/// Signed frequency index bookkeeping for a period-`P` grid of `N` nodes.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrequencyIndexing {
    pub n: usize,
    pub period: f64,
}

impl FrequencyIndexing {
    /// Signed index `k` in `[-N/2, N/2-1]` held at FFT storage slot `s`.
    pub fn signed(&self, s: usize) -> isize {
        let n = self.n as isize;
        let s = s as isize;
        if s >= n / 2 { s - n } else { s }
    }

    /// FFT storage slot of signed index `k`.
    pub fn slot(&self, k: isize) -> usize {
        k.rem_euclid(self.n as isize) as usize
    }

    /// `omega_k = k / P` for the frequency stored at slot `s`.
    pub fn omega(&self, s: usize) -> f64 {
        self.signed(s) as f64 / self.period
    }

    /// All frequencies in storage order.
    pub fn omegas(&self) -> Vec<f64> {
        (0..self.n).map(|s| self.omega(s)).collect()
    }
}

/// Complex spectrum in FFT storage order.
#[derive(Debug, Clone, PartialEq)]
pub struct ComplexSpectrum {
    pub values: Vec<Complex64>,
}

impl ComplexSpectrum {
    pub fn new(values: Vec<Complex64>) -> Self {
        Self { values }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    /// Spectrum `dx * sum_m exp(-2 pi i m k / N) g_m` of natural-order
    /// weights `g`.
    pub fn from_kernel_weights(weights: &[f64], dx: f64) -> Self {
        let plan = SpectralPlan::new(weights.len());
        let mut buf = to_storage(weights);
        plan.forward.process(&mut buf);
        for c in &mut buf {
            *c *= dx;
        }
        Self { values: buf }
    }
}

/// Rotate a natural-order real array into FFT storage order.
pub fn to_storage(values: &[f64]) -> Vec<Complex64> {
    let n = values.len();
    let h = n / 2;
    (0..n).map(|s| Complex64::new(values[(s + h) % n], 0.0)).collect()
}

/// Forward and inverse FFT plans for one transform length.
#[derive(Clone)]
pub struct SpectralPlan {
    n: usize,
    forward: Arc<dyn Fft<f64>>,
    inverse: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for SpectralPlan {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("SpectralPlan").field("n", &self.n).finish()
    }
}

impl SpectralPlan {
    pub fn new(n: usize) -> Self {
        let mut planner = FftPlanner::new();
        Self { n, forward: planner.plan_fft_forward(n), inverse: planner.plan_fft_inverse(n) }
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// `V_k = (1/N) sum_l exp(-2 pi i k l / N) v_l` for natural-order `v`.
    pub fn dft(&self, values: &[f64]) -> Result<ComplexSpectrum> {
        self.check(values.len())?;
        let mut buf = to_storage(values);
        self.forward.process(&mut buf);
        let s = 1.0 / self.n as f64;
        for c in &mut buf {
            *c *= s;
        }
        Ok(ComplexSpectrum { values: buf })
    }

    /// `v_l = sum_k exp(2 pi i k l / N) V_k`, complex result in natural order.
    pub fn idft(&self, spectrum: &ComplexSpectrum) -> Result<Vec<Complex64>> {
        self.check(spectrum.len())?;
        let mut buf = spectrum.values.clone();
        self.inverse.process(&mut buf);
        let h = self.n / 2;
        Ok((0..self.n).map(|i| buf[(i + h) % self.n]).collect())
    }

    /// `Re idft(dft(v) * G)`; fails when the discarded imaginary part is
    /// larger than `1e-10 * max|v|`, which signals an indexing error.
    pub fn convolve(&self, values: &[f64], spectrum: &ComplexSpectrum) -> Result<Vec<f64>> {
        self.check(values.len())?;
        self.check(spectrum.len())?;
        let n = self.n;
        let mut buf = to_storage(values);
        self.forward.process(&mut buf);
        let s = 1.0 / n as f64;
        for (c, g) in buf.iter_mut().zip(&spectrum.values) {
            *c = *c * *g * s;
        }
        self.inverse.process(&mut buf);
        let vmax = values.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        let limit = 1e-10 * vmax.max(f64::MIN_POSITIVE);
        let mut residue = 0.0f64;
        let h = n / 2;
        let mut out = Vec::with_capacity(n);
        for i in 0..n {
            let c = buf[(i + h) % n];
            residue = residue.max(c.im.abs());
            out.push(c.re);
        }
        if !residue.is_finite() || out.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("spectral convolution"));
        }
        if residue > limit {
            return Err(Error::NonHermitian { residue, limit });
        }
        Ok(out)
    }

    fn check(&self, len: usize) -> Result<()> {
        if len != self.n {
            return Err(Error::LengthMismatch { expected: self.n, got: len });
        }
        Ok(())
    }
}

/// One-shot spectral convolution.
pub fn convolve_spectral(values: &[f64], spectrum: &ComplexSpectrum) -> Result<Vec<f64>> {
    if values.len() != spectrum.len() {
        return Err(Error::LengthMismatch { expected: spectrum.len(), got: values.len() });
    }
    SpectralPlan::new(values.len()).convolve(values, spectrum)
}

/// Replace the unpaired Nyquist bin with its real part so the spectrum is
/// exactly Hermitian. For real input the real part of the inverse transform
/// is unchanged by this.
pub fn symmetrize_nyquist(spectrum: &mut [Complex64]) {
    let n = spectrum.len();
    if n >= 2 {
        spectrum[n / 2].im = 0.0;
    }
}
