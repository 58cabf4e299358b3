//! Experiment configuration files (TOML with fixed sections).

use std::path::{Path, PathBuf};

use serde::Deserialize;
use thiserror::Error;

use crate::contracts::{
    BermudanPutDividend, GridSpec, InterpolationSpace, InterventionSpec, Method, Payoff, PayoffKind,
};
use crate::meanvar::MVConfig;
use crate::models::{JumpSpec, ProcessParams};
use crate::projection::ToleranceConfig;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ConfigError {
    #[error("cannot read {path}: {reason}")]
    Io { path: String, reason: String },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("invalid `{field}`: {reason}")]
    Invalid { field: String, reason: String },
}

fn invalid(field: &str, reason: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { field: field.into(), reason: reason.into() }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Problem {
    European,
    Bermudan,
    Meanvar,
    Constmix,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSection {
    pub problem: Problem,
    /// Table or figure the experiment reproduces.
    pub source: String,
    #[serde(default)]
    pub methods: Vec<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum JumpKind {
    Kou,
    Merton,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelSection {
    pub sigma: f64,
    pub lambda: f64,
    pub jumps: JumpKind,
    /// Risk free rate; pricing problems also use it as drift and discount.
    pub rate: f64,
    /// Real world stock drift (mean-variance problems only).
    pub drift: Option<f64>,
    pub p_up: Option<f64>,
    pub eta_up: Option<f64>,
    pub eta_down: Option<f64>,
    pub nu: Option<f64>,
    pub gamma: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ContractSection {
    pub payoff: String,
    pub strike: f64,
    pub s0: f64,
    #[serde(default)]
    pub dividend: f64,
    #[serde(default = "default_interp")]
    pub interpolation: String,
}

fn default_interp() -> String {
    "price".into()
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSection {
    /// Node counts in the log-price (or log stock amount) direction.
    pub ladder: Vec<usize>,
    /// Bond node counts paired with `ladder` (mean-variance only).
    #[serde(default)]
    pub b_nodes: Vec<usize>,
    pub x_below: f64,
    pub x_above: f64,
    /// Centre of the log grid for mean-variance problems.
    pub s_ref: Option<f64>,
    #[serde(default)]
    pub guard: bool,
    pub b_fine: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HorizonSection {
    pub horizon: f64,
    pub dtau: Option<f64>,
    pub rebalance_count: Option<usize>,
    pub injection: Option<f64>,
    pub w_star: Option<f64>,
    pub target_mean: Option<f64>,
    pub stock_fraction: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ToleranceSection {
    #[serde(default = "default_eps")]
    pub eps1: f64,
    #[serde(default = "default_eps")]
    pub eps2: f64,
    #[serde(default = "default_alpha_max")]
    pub alpha_max: usize,
    #[serde(default = "default_mean_tol")]
    pub mean_tol: f64,
}

fn default_eps() -> f64 {
    1e-6
}
fn default_alpha_max() -> usize {
    64
}
fn default_mean_tol() -> f64 {
    1e-5
}

impl Default for ToleranceSection {
    fn default() -> Self {
        Self { eps1: 1e-6, eps2: 1e-6, alpha_max: 64, mean_tol: 1e-5 }
    }
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MonteCarloSection {
    pub n_sim: Vec<usize>,
    #[serde(default)]
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Default, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    #[serde(default)]
    pub kernel_dump: bool,
    #[serde(default)]
    pub curve_dump: bool,
    #[serde(default)]
    pub policy_dump: bool,
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentSection,
    pub model: ModelSection,
    pub contract: Option<ContractSection>,
    pub grid: GridSection,
    pub horizon: HorizonSection,
    #[serde(default)]
    pub tolerances: ToleranceSection,
    pub montecarlo: Option<MonteCarloSection>,
    #[serde(default)]
    pub output: OutputSection,
}

/// Read and validate a configuration file.
pub fn parse_config(path: &Path) -> Result<ExperimentConfig, ConfigError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| ConfigError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    parse_config_str(&text)
}

pub fn parse_config_str(text: &str) -> Result<ExperimentConfig, ConfigError> {
    let cfg: ExperimentConfig = toml::from_str(text).map_err(|e| {
        let line = e.span().map(|s| text[..s.start].matches('\n').count() + 1).unwrap_or(0);
        ConfigError::Parse { line, message: e.message().trim().to_string() }
    })?;
    cfg.validate()?;
    Ok(cfg)
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), ConfigError> {
        let g = &self.grid;
        if g.ladder.is_empty() {
            return Err(invalid("grid.ladder", "empty"));
        }
        if let Some(n) = g.ladder.iter().find(|n| **n < 4 || !n.is_power_of_two()) {
            return Err(invalid("grid.ladder", format!("{n} is not a power of two >= 4")));
        }
        if g.ladder.windows(2).any(|w| w[1] <= w[0]) {
            return Err(invalid("grid.ladder", "must be strictly increasing"));
        }
        if !(g.x_below > 0.0 && g.x_above > 0.0) {
            return Err(invalid("grid.x_below", "localisation widths must be positive"));
        }
        self.process_params()?;
        self.tolerance()?;
        for m in &self.experiment.methods {
            if Method::parse(m).is_none() {
                return Err(invalid("experiment.methods", format!("unknown method `{m}`")));
            }
        }
        match self.experiment.problem {
            Problem::European | Problem::Bermudan => {
                if self.experiment.methods.is_empty() {
                    return Err(invalid("experiment.methods", "at least one method is required"));
                }
                self.payoff()?;
                self.grid_spec(g.ladder[0])?;
                if self.experiment.problem == Problem::Bermudan {
                    let d = self.horizon.dtau.ok_or_else(|| invalid("horizon.dtau", "required"))?;
                    crate::contracts::monitoring_count(self.horizon.horizon, d)
                        .map_err(|e| invalid("horizon.dtau", e.to_string()))?;
                    self.intervention()?;
                }
            }
            Problem::Meanvar | Problem::Constmix => {
                if self.experiment.problem == Problem::Meanvar && g.b_nodes.len() != g.ladder.len() {
                    return Err(invalid("grid.b_nodes", "needs one entry per ladder entry"));
                }
                if g.b_nodes.windows(2).any(|w| w[1] <= w[0]) {
                    return Err(invalid("grid.b_nodes", "must be strictly increasing"));
                }
                let c = self.mv_config(0)?;
                c.validate().map_err(|e| invalid("horizon", e.to_string()))?;
                if self.experiment.problem == Problem::Constmix && self.horizon.stock_fraction.is_none() {
                    return Err(invalid("horizon.stock_fraction", "required"));
                }
            }
        }
        if let Some(mc) = &self.montecarlo {
            if mc.n_sim.iter().any(|n| *n < 2) {
                return Err(invalid("montecarlo.n_sim", "need at least two paths"));
            }
        }
        Ok(())
    }

    pub fn methods(&self) -> Vec<Method> {
        self.experiment.methods.iter().filter_map(|m| Method::parse(m)).collect()
    }

    pub fn process_params(&self) -> Result<ProcessParams, ConfigError> {
        let m = &self.model;
        let need = |v: Option<f64>, f: &str| v.ok_or_else(|| invalid(&format!("model.{f}"), "required for this jump model"));
        let jumps = match m.jumps {
            JumpKind::Kou => JumpSpec::Kou {
                p_up: need(m.p_up, "p_up")?,
                eta_up: need(m.eta_up, "eta_up")?,
                eta_down: need(m.eta_down, "eta_down")?,
            },
            JumpKind::Merton => JumpSpec::Merton { nu: need(m.nu, "nu")?, gamma: need(m.gamma, "gamma")? },
        };
        let r = match self.experiment.problem {
            Problem::European | Problem::Bermudan => ProcessParams::pricing(m.rate, m.sigma, m.lambda, jumps),
            Problem::Meanvar | Problem::Constmix => {
                ProcessParams::mean_variance(need(m.drift, "drift")?, m.sigma, m.lambda, jumps)
            }
        };
        r.map_err(|e| invalid("model", e.to_string()))
    }

    pub fn tolerance(&self) -> Result<ToleranceConfig, ConfigError> {
        let t = &self.tolerances;
        ToleranceConfig::new(t.eps1, t.eps2, t.alpha_max, self.horizon.horizon)
            .map_err(|e| invalid("tolerances", e.to_string()))
    }

    fn contract(&self) -> Result<&ContractSection, ConfigError> {
        self.contract.as_ref().ok_or_else(|| invalid("contract", "section required"))
    }

    pub fn payoff(&self) -> Result<Payoff, ConfigError> {
        let c = self.contract()?;
        let kind = match c.payoff.as_str() {
            "call" => PayoffKind::Call,
            "put" => PayoffKind::Put,
            other => return Err(invalid("contract.payoff", format!("unknown payoff `{other}`"))),
        };
        Payoff::new(kind, c.strike).map_err(|e| invalid("contract.strike", e.to_string()))
    }

    pub fn grid_spec(&self, n: usize) -> Result<GridSpec, ConfigError> {
        let c = self.contract()?;
        if !(c.s0 > 0.0) {
            return Err(invalid("contract.s0", "must be positive"));
        }
        Ok(GridSpec { s0: c.s0, below: self.grid.x_below, above: self.grid.x_above, n_nodes: n })
    }

    pub fn intervention(&self) -> Result<InterventionSpec, ConfigError> {
        let c = self.contract()?;
        if !(c.dividend >= 0.0) {
            return Err(invalid("contract.dividend", "must be non-negative"));
        }
        let interpolation = match c.interpolation.as_str() {
            "price" => InterpolationSpace::Price,
            "log" => InterpolationSpace::LogPrice,
            other => return Err(invalid("contract.interpolation", format!("unknown space `{other}`"))),
        };
        Ok(InterventionSpec::BermudanPutDividend(BermudanPutDividend {
            strike: c.strike,
            dividend: c.dividend,
            interpolation,
        }))
    }

    /// Mean-variance problem data for ladder entry `level`.
    pub fn mv_config(&self, level: usize) -> Result<MVConfig, ConfigError> {
        let h = &self.horizon;
        let m = h.rebalance_count.ok_or_else(|| invalid("horizon.rebalance_count", "required"))?;
        let q = h.injection.ok_or_else(|| invalid("horizon.injection", "required"))?;
        let n_b = self.grid.b_nodes.get(level).copied().unwrap_or(305);
        Ok(MVConfig {
            horizon: h.horizon,
            rebalance_count: m,
            injections: vec![q; m],
            rate: self.model.rate,
            params: self.process_params()?,
            w_star: h.w_star.unwrap_or(1.0),
            n_x: self.grid.ladder[level.min(self.grid.ladder.len() - 1)],
            n_b,
            s_ref: self.grid.s_ref.unwrap_or(100.0),
            x_below: self.grid.x_below,
            x_above: self.grid.x_above,
            b_fine: self.grid.b_fine.unwrap_or(1200.0),
            tol: self.tolerance()?,
        })
    }
}

/// Shipped experiment definitions, by name.
pub const PRESETS: [(&str, &str); 6] = [
    ("table2", include_str!("../presets/european_T025.toml")),
    ("table3", include_str!("../presets/european_T0001.toml")),
    ("table5", include_str!("../presets/bermudan.toml")),
    ("table7", include_str!("../presets/meanvar_fixed.toml")),
    ("table8", include_str!("../presets/constmix.toml")),
    ("table9", include_str!("../presets/meanvar_newton.toml")),
];

pub fn preset(name: &str) -> Option<ExperimentConfig> {
    PRESETS
        .iter()
        .find(|(n, _)| *n == name)
        .map(|(_, text)| parse_config_str(text).expect("shipped presets are valid"))
}
