//! Jump diffusion models and the Fourier transform of their Green's
//! function over one monitoring interval.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};
use crate::grid::{symmetrize_nyquist, ComplexSpectrum, Grid1D};

/// Log jump size distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum JumpSpec {
    /// Asymmetric double exponential.
    Kou { p_up: f64, eta_up: f64, eta_down: f64 },
    /// Normal log jumps with mean `nu` and standard deviation `gamma`.
    Merton { nu: f64, gamma: f64 },
}

impl JumpSpec {
    fn validate(&self) -> Result<()> {
        match *self {
            JumpSpec::Kou { p_up, eta_up, eta_down } => {
                if !(0.0..=1.0).contains(&p_up) {
                    return Err(Error::InvalidModel(format!("p_up = {p_up} outside [0, 1]")));
                }
                if !(eta_up > 1.0 && eta_up.is_finite()) {
                    return Err(Error::InvalidModel(format!("eta_up = {eta_up} must exceed 1")));
                }
                if !(eta_down > 0.0 && eta_down.is_finite()) {
                    return Err(Error::InvalidModel(format!("eta_down = {eta_down} must be positive")));
                }
            }
            JumpSpec::Merton { nu, gamma } => {
                if !nu.is_finite() || !(gamma > 0.0 && gamma.is_finite()) {
                    return Err(Error::InvalidModel(format!("Merton nu = {nu}, gamma = {gamma}")));
                }
            }
        }
        Ok(())
    }

    /// `E[xi^m]` where `xi = exp(y)` is the jump multiplier.
    pub fn multiplier_moment(&self, m: f64) -> Result<f64> {
        match *self {
            JumpSpec::Kou { p_up, eta_up, eta_down } => {
                if m >= eta_up || m <= -eta_down {
                    return Err(Error::MomentUndefined { order: m });
                }
                Ok(p_up * eta_up / (eta_up - m) + (1.0 - p_up) * eta_down / (eta_down + m))
            }
            JumpSpec::Merton { nu, gamma } => Ok((m * nu + 0.5 * m * m * gamma * gamma).exp()),
        }
    }

    /// Characteristic function of the log jump, `E[exp(-2 pi i omega y)]`.
    pub fn char_fn(&self, omega: f64) -> Complex64 {
        let iw = Complex64::new(0.0, 2.0 * PI * omega);
        match *self {
            JumpSpec::Kou { p_up, eta_up, eta_down } => {
                p_up / (1.0 - iw / eta_up) + (1.0 - p_up) / (1.0 + iw / eta_down)
            }
            JumpSpec::Merton { nu, gamma } => {
                let pw = PI * omega;
                (2.0 * Complex64::new(-(pw * gamma).powi(2), pw * nu)).exp()
            }
        }
    }

    /// Draw one log jump size.
    pub fn sample<R: rand::Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        use rand_distr::{Distribution, Exp, StandardNormal};
        match *self {
            JumpSpec::Kou { p_up, eta_up, eta_down } => {
                let u: f64 = rng.random();
                if u < p_up {
                    Exp::new(eta_up).expect("validated").sample(rng)
                } else {
                    -Exp::new(eta_down).expect("validated").sample(rng)
                }
            }
            JumpSpec::Merton { nu, gamma } => {
                let z: f64 = StandardNormal.sample(rng);
                nu + gamma * z
            }
        }
    }
}

/// `kappa = E[xi] - 1`.
pub fn kappa(jumps: &JumpSpec) -> f64 {
    jumps.multiplier_moment(1.0).map(|e| e - 1.0).unwrap_or(f64::NAN)
}

/// Pricing problems discount at the risk free rate under the risk neutral
/// drift. Mean-variance problems use the real world drift and no discounting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ModelMode {
    Pricing { rate: f64 },
    MeanVariance { drift: f64 },
}

/// Jump diffusion `dS/S = (mu - lambda kappa) dt + sigma dZ + d(sum (xi - 1))`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ProcessParams {
    pub mode: ModelMode,
    pub sigma: f64,
    pub lambda: f64,
    pub jumps: JumpSpec,
}

impl ProcessParams {
    pub fn new(mode: ModelMode, sigma: f64, lambda: f64, jumps: JumpSpec) -> Result<Self> {
        if !(sigma > 0.0 && sigma.is_finite()) {
            return Err(Error::InvalidModel(format!("sigma = {sigma} must be positive")));
        }
        if !(lambda >= 0.0 && lambda.is_finite()) {
            return Err(Error::InvalidModel(format!("lambda = {lambda} must be non-negative")));
        }
        let rate = match mode {
            ModelMode::Pricing { rate } => rate,
            ModelMode::MeanVariance { drift } => drift,
        };
        if !rate.is_finite() {
            return Err(Error::InvalidModel("non-finite drift".into()));
        }
        jumps.validate()?;
        Ok(Self { mode, sigma, lambda, jumps })
    }

    pub fn pricing(rate: f64, sigma: f64, lambda: f64, jumps: JumpSpec) -> Result<Self> {
        Self::new(ModelMode::Pricing { rate }, sigma, lambda, jumps)
    }

    pub fn mean_variance(drift: f64, sigma: f64, lambda: f64, jumps: JumpSpec) -> Result<Self> {
        Self::new(ModelMode::MeanVariance { drift }, sigma, lambda, jumps)
    }

    /// Drift `mu` of the stock.
    pub fn drift(&self) -> f64 {
        match self.mode {
            ModelMode::Pricing { rate } => rate,
            ModelMode::MeanVariance { drift } => drift,
        }
    }

    /// Discount rate `rho`.
    pub fn discount(&self) -> f64 {
        match self.mode {
            ModelMode::Pricing { rate } => rate,
            ModelMode::MeanVariance { .. } => 0.0,
        }
    }

    pub fn kappa(&self) -> f64 {
        kappa(&self.jumps)
    }

    /// Drift of `log S` excluding jumps: `mu - lambda kappa - sigma^2 / 2`.
    pub fn log_drift(&self) -> f64 {
        self.drift() - self.lambda * self.kappa() - 0.5 * self.sigma * self.sigma
    }

    /// Characteristic exponent `Psi(omega)`.
    pub fn char_exponent(&self, omega: f64) -> Complex64 {
        let w = 2.0 * PI * omega;
        Complex64::new(
            -0.5 * self.sigma * self.sigma * w * w - (self.discount() + self.lambda),
            self.log_drift() * w,
        ) + self.lambda * self.jumps.char_fn(omega)
    }
}

/// `G(omega, dt) = exp(Psi(omega) dt)`.
pub fn greens_transform(omega: f64, dt: f64, params: &ProcessParams) -> Complex64 {
    (params.char_exponent(omega) * dt).exp()
}

/// `psi(m)` with `E[S_t^m] = S_0^m exp(psi(m) t)`.
pub fn moment_exponent(m: f64, params: &ProcessParams) -> Result<f64> {
    let em = params.jumps.multiplier_moment(m)?;
    let s2 = params.sigma * params.sigma;
    Ok(m * (params.drift() - params.lambda * params.kappa() - 0.5 * s2)
        + 0.5 * m * m * s2
        + params.lambda * (em - 1.0))
}

/// Green's function transform sampled on the `N` grid frequencies.
#[derive(Debug, Clone, PartialEq)]
pub struct GreensSpectrum {
    pub grid: Grid1D,
    pub dt: f64,
    pub spectrum: ComplexSpectrum,
}

impl GreensSpectrum {
    /// Sample `G(omega_k)` for every grid frequency; the unpaired Nyquist
    /// bin keeps its real part only.
    pub fn new(grid: &Grid1D, dt: f64, params: &ProcessParams) -> Result<Self> {
        if !(dt > 0.0 && dt.is_finite()) {
            return Err(Error::InvalidArgument(format!("dt = {dt} must be positive")));
        }
        let f = grid.frequencies();
        let mut values: Vec<Complex64> =
            (0..grid.len()).map(|s| greens_transform(f.omega(s), dt, params)).collect();
        if values.iter().any(|c| !c.re.is_finite() || !c.im.is_finite()) {
            return Err(Error::NonFinite("Green's function transform"));
        }
        symmetrize_nyquist(&mut values);
        Ok(Self { grid: *grid, dt, spectrum: ComplexSpectrum::new(values) })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn kou() -> JumpSpec {
        JumpSpec::Kou { p_up: 0.3445, eta_up: 3.0465, eta_down: 3.0775 }
    }

    #[test]
    fn kou_kappa() {
        let k = kappa(&kou());
        let expect = 0.3445 * 3.0465 / 2.0465 + 0.6555 * 3.0775 / 4.0775 - 1.0;
        assert!((k - expect).abs() < 1e-15);
    }

    #[test]
    fn merton_kappa_small_gamma() {
        let k = kappa(&JumpSpec::Merton { nu: 0.0, gamma: 1e-9 });
        assert!(k.abs() < 1e-15);
    }

    #[test]
    fn green_at_zero_frequency() {
        let p = ProcessParams::pricing(0.05, 0.15, 0.1, kou()).unwrap();
        let g = greens_transform(0.0, 0.25, &p);
        assert!((g.re - (-0.05f64 * 0.25).exp()).abs() < 1e-15);
        assert!(g.im.abs() < 1e-15);
        let p0 = ProcessParams::mean_variance(0.05, 0.15, 0.1, kou()).unwrap();
        assert!((greens_transform(0.0, 1.0, &p0).re - 1.0).abs() < 1e-15);
    }

    #[test]
    fn pure_diffusion_is_gaussian() {
        let p = ProcessParams::pricing(0.05, 0.2, 0.0, kou()).unwrap();
        let w = 0.7;
        let dt = 0.5;
        let g = greens_transform(w, dt, &p);
        let phase = 2.0 * PI * w * (0.05 - 0.02) * dt;
        let amp = (-0.02 * (2.0 * PI * w).powi(2) * dt - 0.05 * dt).exp();
        assert!((g - Complex64::from_polar(amp, phase)).norm() < 1e-15);
    }

    #[test]
    fn hermitian_symmetry() {
        let p = ProcessParams::pricing(0.05, 0.15, 0.1, JumpSpec::Merton { nu: -1.08, gamma: 0.4 })
            .unwrap();
        for &w in &[0.1, 1.3, 7.9] {
            let a = greens_transform(w, 0.3, &p);
            let b = greens_transform(-w, 0.3, &p);
            assert!((a - b.conj()).norm() < 1e-15);
        }
    }

    #[test]
    fn moment_exponent_first_moment_is_drift() {
        let p = ProcessParams::mean_variance(0.10, 0.1765, 0.0585, kou()).unwrap();
        assert!((moment_exponent(1.0, &p).unwrap() - 0.10).abs() < 1e-14);
        assert!(moment_exponent(3.5, &p).is_err());
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(ProcessParams::pricing(0.05, -0.1, 0.1, kou()).is_err());
        assert!(ProcessParams::pricing(0.05, 0.1, -0.1, kou()).is_err());
        let bad = JumpSpec::Kou { p_up: 0.5, eta_up: 0.9, eta_down: 3.0 };
        assert!(ProcessParams::pricing(0.05, 0.1, 0.1, bad).is_err());
    }

    #[test]
    fn spectrum_nyquist_is_real() {
        let g = Grid1D::new(-5.0, 5.0, 64).unwrap();
        let p = ProcessParams::pricing(0.05, 0.15, 0.1, kou()).unwrap();
        let s = GreensSpectrum::new(&g, 0.001, &p).unwrap();
        assert_eq!(s.spectrum.values[32].im, 0.0);
        for k in 1..32 {
            let a = s.spectrum.values[k];
            let b = s.spectrum.values[64 - k];
            assert!((a - b.conj()).norm() < 1e-15);
        }
    }
}
