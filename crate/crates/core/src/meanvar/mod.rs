//! Multiperiod mean-variance asset allocation: value function over
//! (log stock amount, bond amount), optimal rebalancing with surplus
//! withdrawal, moments of terminal wealth, the embedding search and
//! Monte Carlo checks.

mod bgrid;
mod constmix;
mod montecarlo;
mod solver;

pub use bgrid::BGrid;
pub use constmix::constant_mix_moments;
pub use montecarlo::{monte_carlo, ConstantMix, MonteCarloSummary, RebalanceRule};
pub use solver::{
    advance_time, apply_control, newton_on_mean, newton_on_mean_from, terminal_condition, MeanVarianceSolver, Moments,
    NewtonResult, PolicySlice, PolicyStore, Surface2D, ValueSolution,
};

use crate::error::{Error, Result};
use crate::models::{ModelMode, ProcessParams};
use crate::projection::ToleranceConfig;

/// Problem data for the mean-variance solver.
#[derive(Debug, Clone, PartialEq)]
pub struct MVConfig {
    pub horizon: f64,
    pub rebalance_count: usize,
    /// Injection `q_n` at each date `t_n = n T / M`, `n = 0 .. M-1`.
    pub injections: Vec<f64>,
    pub rate: f64,
    pub params: ProcessParams,
    pub w_star: f64,
    pub n_x: usize,
    pub n_b: usize,
    /// Stock axis spans `[log s_ref - x_below, log s_ref + x_above]`.
    pub s_ref: f64,
    pub x_below: f64,
    pub x_above: f64,
    /// Upper end of the uniformly spaced part of the bond grid.
    pub b_fine: f64,
    pub tol: ToleranceConfig,
}

impl MVConfig {
    /// Parameters of the thirty-year savings example.
    pub fn example(n_x: usize, n_b: usize) -> Self {
        let jumps = crate::models::JumpSpec::Kou { p_up: 0.2758, eta_up: 4.4273, eta_down: 5.262 };
        Self {
            horizon: 30.0,
            rebalance_count: 30,
            injections: vec![10.0; 30],
            rate: 0.00827,
            params: ProcessParams::mean_variance(0.08885, 0.14777, 0.3222, jumps)
                .expect("valid example parameters"),
            w_star: 1022.0,
            n_x,
            n_b,
            s_ref: 100.0,
            x_below: 10.0,
            x_above: 5.0,
            b_fine: 1200.0,
            tol: ToleranceConfig::with_horizon(30.0),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.rebalance_count == 0 || self.injections.len() != self.rebalance_count {
            return Err(Error::InvalidArgument(format!(
                "need one injection per rebalance date ({} dates, {} injections)",
                self.rebalance_count,
                self.injections.len()
            )));
        }
        if self.injections.iter().any(|q| !(*q >= 0.0)) {
            return Err(Error::InvalidArgument("injections must be non-negative".into()));
        }
        if !(self.horizon > 0.0) || !self.rate.is_finite() || !(self.w_star > 0.0) {
            return Err(Error::InvalidArgument("horizon, rate and W* must be valid".into()));
        }
        if !matches!(self.params.mode, ModelMode::MeanVariance { .. }) {
            return Err(Error::InvalidModel("mean-variance problems need the mean-variance mode".into()));
        }
        if !(self.s_ref > 0.0 && self.x_below > 0.0 && self.x_above > 0.0 && self.b_fine > 0.0) {
            return Err(Error::InvalidGrid("bad localisation".into()));
        }
        if self.b_fine >= self.b_max() {
            return Err(Error::InvalidGrid("b_fine must lie below b_max".into()));
        }
        Ok(())
    }

    pub fn dt(&self) -> f64 {
        self.horizon / self.rebalance_count as f64
    }

    pub fn date(&self, n: usize) -> f64 {
        n as f64 * self.dt()
    }

    pub fn x_min(&self) -> f64 {
        self.s_ref.ln() - self.x_below
    }

    pub fn x_max(&self) -> f64 {
        self.s_ref.ln() + self.x_above
    }

    pub fn b_max(&self) -> f64 {
        self.x_max().exp()
    }

    /// Largest wealth after injection that is kept invested at date `n`.
    pub fn withdrawal_cap(&self, n: usize) -> Result<f64> {
        let q = discounted_contributions(self, n)?;
        Ok(self.w_star * (-self.rate * (self.horizon - self.date(n))).exp() - q)
    }
}

/// `Q_n = sum_{j > n} exp(-r (t_j - t_n)) q_j`.
pub fn discounted_contributions(config: &MVConfig, n: usize) -> Result<f64> {
    let m = config.rebalance_count;
    if n >= m {
        return Err(Error::InvalidArgument(format!("date index {n} out of range 0..{m}")));
    }
    let tn = config.date(n);
    Ok((n + 1..m)
        .map(|j| (-config.rate * (config.date(j) - tn)).exp() * config.injections[j])
        .sum())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn contributions() {
        let mut c = MVConfig::example(64, 40);
        assert_eq!(discounted_contributions(&c, 29).unwrap(), 0.0);
        assert!(discounted_contributions(&c, 30).is_err());
        let direct: f64 = (1..30).map(|j| 10.0 * (-0.00827 * j as f64).exp()).sum();
        let a = (-0.00827f64).exp();
        let geometric = 10.0 * a * (1.0 - a.powi(29)) / (1.0 - a);
        let q0 = discounted_contributions(&c, 0).unwrap();
        assert!((q0 - direct).abs() < 1e-12 && (q0 - geometric).abs() < 1e-10);
        c.rate = 0.0;
        assert!((discounted_contributions(&c, 0).unwrap() - 290.0).abs() < 1e-12);
    }

    #[test]
    fn validation() {
        let mut c = MVConfig::example(64, 40);
        assert!(c.validate().is_ok());
        c.injections.pop();
        assert!(c.validate().is_err());
    }
}
