use super::MVConfig;
use crate::error::{Error, Result};
use crate::models::moment_exponent;
use crate::meanvar::Moments;

/// Closed-form mean and standard deviation of terminal wealth when the
/// portfolio is rebalanced to stock fraction `p` at every date.
pub fn constant_mix_moments(fraction: f64, config: &MVConfig) -> Result<Moments> {
    if !(0.0..=1.0).contains(&fraction) {
        return Err(Error::InvalidArgument(format!("stock fraction {fraction} outside [0, 1]")));
    }
    let dt = config.dt();
    let r = config.rate;
    let psi1 = moment_exponent(1.0, &config.params)?;
    let psi2 = moment_exponent(2.0, &config.params)?;
    let p = fraction;
    let er = p * (psi1 * dt).exp() + (1.0 - p) * (r * dt).exp();
    let er2 = p * p * (psi2 * dt).exp()
        + 2.0 * p * (1.0 - p) * ((psi1 + r) * dt).exp()
        + (1.0 - p) * (1.0 - p) * (2.0 * r * dt).exp();
    let (mut m1, mut m2) = (0.0f64, 0.0f64);
    for &q in &config.injections {
        m2 += 2.0 * q * m1 + q * q;
        m1 += q;
        m1 *= er;
        m2 *= er2;
    }
    Ok(Moments { mean: m1, std: (m2 - m1 * m1).max(0.0).sqrt() })
}
