//! Projection of the Green's function onto local basis functions and the
//! alpha-doubling construction of an epsilon-monotone kernel.

use std::f64::consts::PI;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::{symmetrize_nyquist, ComplexSpectrum, FrequencyIndexing, Grid1D};
use crate::models::{greens_transform, ProcessParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisKind {
    PiecewiseLinear,
    PiecewiseConstant,
}

/// Tolerances for the monotonicity and accuracy tests.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub eps1: f64,
    pub eps2: f64,
    pub alpha_max: usize,
    /// Total horizon used to scale `eps1` by `dtau / T`.
    pub horizon: f64,
}

impl ToleranceConfig {
    pub fn new(eps1: f64, eps2: f64, alpha_max: usize, horizon: f64) -> Result<Self> {
        if !(eps1 > 0.0 && eps2 > 0.0) {
            return Err(Error::InvalidArgument("eps1 and eps2 must be positive".into()));
        }
        if alpha_max < 2 || !alpha_max.is_power_of_two() {
            return Err(Error::InvalidArgument(format!(
                "alpha_max = {alpha_max} must be a power of two >= 2"
            )));
        }
        if !(horizon > 0.0) {
            return Err(Error::InvalidArgument("horizon must be positive".into()));
        }
        Ok(Self { eps1, eps2, alpha_max, horizon })
    }

    pub fn with_horizon(horizon: f64) -> Self {
        Self { eps1: 1e-6, eps2: 1e-6, alpha_max: 64, horizon }
    }
}

/// Fourier transform of the basis function, normalised to 1 at the origin.
pub fn basis_factor(omega: f64, dx: f64, basis: BasisKind) -> f64 {
    let z = PI * omega * dx;
    let s = if z == 0.0 { 1.0 } else { z.sin() / z };
    match basis {
        BasisKind::PiecewiseLinear => s * s,
        BasisKind::PiecewiseConstant => s,
    }
}

/// Projected kernel weights `g~_j` in natural order (entry `i` is `j = i - N/2`),
/// from a truncated series of `alpha N` terms.
pub fn project_weights(
    grid: &Grid1D,
    params: &ProcessParams,
    dtau: f64,
    alpha: usize,
    basis: BasisKind,
) -> Result<Vec<f64>> {
    if alpha == 0 || !alpha.is_power_of_two() {
        return Err(Error::InvalidArgument(format!("alpha = {alpha} must be a power of two")));
    }
    let n = grid.len();
    let m = alpha * n;
    let period = grid.period();
    let dx = grid.dx();
    let fine = FrequencyIndexing { n: m, period };
    let mut y: Vec<Complex64> = (0..m)
        .map(|s| {
            let w = fine.omega(s);
            greens_transform(w, dtau, params) * basis_factor(w, dx, basis)
        })
        .collect();
    symmetrize_nyquist(&mut y);
    FftPlanner::new().plan_fft_inverse(m).process(&mut y);
    let scale = 1.0 / period;
    let mut weights = Vec::with_capacity(n);
    let mut residue = 0.0f64;
    let mut wmax = 0.0f64;
    for i in 0..n {
        let j = i as isize - (n / 2) as isize;
        let c = y[(j * alpha as isize).rem_euclid(m as isize) as usize] * scale;
        residue = residue.max(c.im.abs());
        wmax = wmax.max(c.re.abs());
        weights.push(c.re);
    }
    if !residue.is_finite() || !wmax.is_finite() {
        return Err(Error::NonFinite("kernel projection"));
    }
    let limit = 1e-10 * wmax;
    if residue > limit {
        return Err(Error::NonHermitian { residue, limit });
    }
    Ok(weights)
}

/// `sum_j dx min(g~_j, 0)`.
pub fn monotonicity_test(weights: &[f64], dx: f64) -> f64 {
    weights.iter().map(|w| dx * w.min(0.0)).sum()
}

/// `max_j dx |g~_j(alpha) - g~_j(alpha / 2)|`.
pub fn accuracy_test(weights_alpha: &[f64], weights_half: &[f64], dx: f64) -> Result<f64> {
    if weights_alpha.len() != weights_half.len() {
        return Err(Error::LengthMismatch { expected: weights_alpha.len(), got: weights_half.len() });
    }
    Ok(weights_alpha
        .iter()
        .zip(weights_half)
        .fold(0.0f64, |m, (a, b)| m.max(dx * (a - b).abs())))
}

/// Projected Green's kernel that passed both tests.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectedKernel {
    pub grid: Grid1D,
    pub dtau: f64,
    pub basis: BasisKind,
    pub alpha: usize,
    pub weights: Vec<f64>,
    pub spectrum: ComplexSpectrum,
    pub test1: f64,
    pub test2: f64,
    /// `dx sum_j g~_j`.
    pub c1: f64,
}

impl ProjectedKernel {
    /// Write rows `y_j, g~_j`.
    pub fn write_csv<W: std::io::Write>(&self, mut out: W) -> std::io::Result<()> {
        writeln!(out, "y,weight")?;
        for (i, w) in self.weights.iter().enumerate() {
            let y = (i as f64 - (self.grid.len() / 2) as f64) * self.grid.dx();
            writeln!(out, "{},{}", crate::report::fmt_sig(y, 11), crate::report::fmt_sig(*w, 11))?;
        }
        Ok(())
    }
}

/// Double `alpha` from 1 until the monotonicity and accuracy tests pass.
pub fn build_kernel(
    grid: &Grid1D,
    params: &ProcessParams,
    dtau: f64,
    basis: BasisKind,
    tol: &ToleranceConfig,
) -> Result<ProjectedKernel> {
    let dx = grid.dx();
    let limit1 = tol.eps1 * dtau / tol.horizon;
    let mut prev = project_weights(grid, params, dtau, 1, basis)?;
    let mut alpha = 2;
    let (mut test1, mut test2) = (f64::NAN, f64::NAN);
    while alpha <= tol.alpha_max {
        let w = project_weights(grid, params, dtau, alpha, basis)?;
        test1 = monotonicity_test(&w, dx);
        test2 = accuracy_test(&w, &prev, dx)?;
        if test1.abs() < limit1 && test2 < tol.eps2 {
            let c1 = dx * w.iter().sum::<f64>();
            let spectrum = ComplexSpectrum::from_kernel_weights(&w, dx);
            return Ok(ProjectedKernel {
                grid: *grid,
                dtau,
                basis,
                alpha,
                weights: w,
                spectrum,
                test1,
                test2,
                c1,
            });
        }
        prev = w;
        alpha *= 2;
    }
    Err(Error::ProjectionNotConverged { alpha_max: tol.alpha_max, test1, test2 })
}

/// Upper bounds on `|test1|` and `test2` for a diffusive model.
pub fn theoretical_bounds(
    alpha: usize,
    n_nodes: usize,
    params: &ProcessParams,
    dtau: f64,
    period: f64,
) -> Result<(f64, f64)> {
    if !(params.sigma > 0.0) {
        return Err(Error::InvalidModel("bounds need sigma > 0".into()));
    }
    let a = alpha as f64;
    let n = n_nodes as f64;
    let c4 = 2.0 * params.sigma * params.sigma * PI * PI * dtau / (period * period);
    let dx = period / n;
    let b1 = 8.0 / (PI * PI * a * a) * (-c4 * n * n * a * a / 4.0).exp()
        / (1.0 - (-c4 * n * a).exp());
    let b2 = 64.0 / (PI * PI * a * a) * (dx / period) * (-c4 * n * n * a * a / 16.0).exp()
        / (1.0 - (-c4 * n * a / 2.0).exp());
    Ok((b1, b2))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::JumpSpec;

    fn kou_reference() -> ProcessParams {
        let jumps = JumpSpec::Kou { p_up: 0.3445, eta_up: 3.0465, eta_down: 3.0775 };
        ProcessParams::pricing(0.05, 0.15, 0.1, jumps).unwrap()
    }

    fn euro_grid(n: usize) -> Grid1D {
        let c = 100f64.ln();
        Grid1D::new(c - 10.0, c + 10.0, n).unwrap()
    }

    #[test]
    fn basis_factor_values() {
        assert_eq!(basis_factor(0.0, 0.1, BasisKind::PiecewiseLinear), 1.0);
        let w = 0.5 / 0.1; // pi w dx = pi / 2
        let v = basis_factor(w, 0.1, BasisKind::PiecewiseLinear);
        assert!((v - 4.0 / (PI * PI)).abs() < 1e-15);
        let c = basis_factor(3.3, 0.1, BasisKind::PiecewiseConstant);
        assert!((basis_factor(3.3, 0.1, BasisKind::PiecewiseLinear) - c * c).abs() < 1e-15);
    }

    #[test]
    fn simple_tests() {
        assert_eq!(monotonicity_test(&[1.0, 2.0], 0.5), 0.0);
        assert_eq!(monotonicity_test(&[-1.0, 2.0], 1.0), -1.0);
        assert_eq!(accuracy_test(&[1.0, 2.0], &[1.0, 2.0], 0.1).unwrap(), 0.0);
        assert!(accuracy_test(&[1.0], &[1.0, 2.0], 0.1).is_err());
    }

    #[test]
    fn mass_is_discount_factor() {
        let g = euro_grid(256);
        for alpha in [1, 2, 4, 8] {
            let w = project_weights(&g, &kou_reference(), 0.25, alpha, BasisKind::PiecewiseLinear).unwrap();
            let mass = g.dx() * w.iter().sum::<f64>();
            assert!((mass - (-0.05f64 * 0.25).exp()).abs() < 1e-12);
        }
    }

    #[test]
    fn kernel_converges_quickly_for_kou_reference() {
        let g = euro_grid(1024);
        let k = build_kernel(
            &g,
            &kou_reference(),
            0.25,
            BasisKind::PiecewiseLinear,
            &ToleranceConfig::with_horizon(0.25),
        )
        .unwrap();
        assert!(k.alpha <= 4);
        assert!(k.test1.abs() < 1e-6 && k.test2 < 1e-6);
        assert!((k.spectrum.values[0].re - k.c1).abs() < 1e-12);
    }

    #[test]
    fn pure_drift_does_not_converge() {
        // sigma cannot be zero in a validated model, so use a tiny value
        let p = ProcessParams::pricing(0.05, 1e-9, 0.0, JumpSpec::Merton { nu: 0.0, gamma: 0.1 })
            .unwrap();
        let g = euro_grid(64);
        let r = build_kernel(&g, &p, 0.25, BasisKind::PiecewiseLinear, &ToleranceConfig::with_horizon(0.25));
        assert!(matches!(r, Err(Error::ProjectionNotConverged { .. })));
    }

    #[test]
    fn bounds_decrease_in_alpha() {
        let p = kou_reference();
        let (a1, a2) = theoretical_bounds(2, 128, &p, 0.25, 20.0).unwrap();
        let (b1, b2) = theoretical_bounds(4, 128, &p, 0.25, 20.0).unwrap();
        assert!(a1 > b1 && a2 > b2 && b1 > 0.0 && b2 > 0.0);
    }
}
