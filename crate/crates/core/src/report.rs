//! Experiment orchestration, convergence tables and CSV output.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::config::{ConfigError, ExperimentConfig, Problem};
use crate::contracts::{run_bermudan_curve, run_european_curve, linear_interpolate, Method};
use crate::error::Error;
use crate::meanvar::{
    constant_mix_moments, monte_carlo, newton_on_mean, ConstantMix, MeanVarianceSolver, Moments, PolicyStore,
    ValueSolution,
};
use crate::stepping::AsymptoticForm;

#[derive(Debug, Error)]
pub enum RunError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error("numerical failure: {0}")]
    Numerical(#[from] Error),
    #[error("cannot write {path}: {reason}")]
    Io { path: String, reason: String },
}

impl RunError {
    /// Process exit code for this failure.
    pub fn exit_code(&self) -> i32 {
        match self {
            RunError::Config(_) => 2,
            RunError::Numerical(_) => 3,
            RunError::Io { .. } => 1,
        }
    }
}

/// Format with `sig` significant digits.
pub fn fmt_sig(x: f64, sig: usize) -> String {
    if x == 0.0 || !x.is_finite() {
        return format!("{x}");
    }
    let mag = x.abs().log10().floor() as i32;
    let dec = (sig as i32 - 1 - mag).max(0) as usize;
    format!("{x:.dec$}")
}

fn fmt_ratio(r: Option<f64>) -> String {
    match r {
        None => "N/A".into(),
        Some(v) if !v.is_finite() => "undef".into(),
        Some(v) => fmt_sig(v, 2),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ConvergenceRow {
    pub label: String,
    pub value: f64,
    pub change: Option<f64>,
    /// From the third row on; not finite when the change vanishes.
    pub ratio: Option<f64>,
}

/// Changes and ratios of successive changes along a refinement ladder.
pub fn convergence_rows(labels: &[String], values: &[f64]) -> Vec<ConvergenceRow> {
    (0..values.len())
        .map(|k| {
            let change = (k >= 1).then(|| values[k] - values[k - 1]);
            let ratio = (k >= 2).then(|| {
                let den = values[k] - values[k - 1];
                if den == 0.0 { f64::NAN } else { (values[k - 1] - values[k - 2]) / den }
            });
            ConvergenceRow { label: labels[k].clone(), value: values[k], change, ratio }
        })
        .collect()
}

/// Comma separated table with a header row.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct CsvTable {
    pub header: Vec<String>,
    pub rows: Vec<Vec<String>>,
}

impl CsvTable {
    pub fn new(header: &[&str]) -> Self {
        Self { header: header.iter().map(|s| s.to_string()).collect(), rows: Vec::new() }
    }

    pub fn push(&mut self, row: Vec<String>) {
        self.rows.push(row);
    }

    pub fn render(&self) -> String {
        let mut s = self.header.join(",");
        s.push('\n');
        for r in &self.rows {
            s.push_str(&r.join(","));
            s.push('\n');
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), RunError> {
        write_file(path, self.render().as_bytes())
    }
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<(), RunError> {
    let io = |e: std::io::Error| RunError::Io { path: path.display().to_string(), reason: e.to_string() };
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(io)?;
    }
    fs::write(path, bytes).map_err(io)
}

fn write_with(path: &Path, f: impl FnOnce(&mut Vec<u8>) -> std::io::Result<()>) -> Result<(), RunError> {
    let mut buf = Vec::new();
    f(&mut buf).map_err(|e| RunError::Io { path: path.display().to_string(), reason: e.to_string() })?;
    write_file(path, &buf)
}

/// Run overrides taken from the command line.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub out: Option<PathBuf>,
    pub seed: Option<u64>,
}

/// Convergence rows of one method on a 1-D pricing problem.
pub fn run_convergence(cfg: &ExperimentConfig, method: Method) -> Result<Vec<ConvergenceRow>, RunError> {
    let mut labels = Vec::new();
    let mut values = Vec::new();
    for &n in &cfg.grid.ladder {
        let curve = pricing_curve(cfg, method, n)?;
        labels.push(n.to_string());
        values.push(linear_interpolate(&curve, cfg.grid_spec(n)?.s0.ln())?);
    }
    Ok(convergence_rows(&labels, &values))
}

fn pricing_curve(cfg: &ExperimentConfig, method: Method, n: usize) -> Result<crate::contracts::ValueCurve, RunError> {
    let params = cfg.process_params()?;
    let grid = cfg.grid_spec(n)?;
    let payoff = cfg.payoff()?;
    let tol = cfg.tolerance()?;
    let t = cfg.horizon.horizon;
    let a_form = match payoff.kind {
        crate::contracts::PayoffKind::Call => AsymptoticForm::ExpX,
        crate::contracts::PayoffKind::Put => AsymptoticForm::Zero,
    };
    Ok(match cfg.experiment.problem {
        Problem::European => {
            run_european_curve(&params, &grid, &payoff, method, t, &tol, cfg.grid.guard.then_some(a_form))?
        }
        _ => {
            let dtau = cfg.horizon.dtau.unwrap_or(t);
            run_bermudan_curve(&params, &grid, &payoff, &cfg.intervention()?, method, t, dtau, &tol, a_form)?
        }
    })
}

/// Run an experiment, writing its CSV files below the output directory.
/// Returns a human readable summary.
pub fn run_experiment(cfg: &ExperimentConfig, ov: &Overrides) -> Result<String, RunError> {
    let out = ov.out.clone().or_else(|| cfg.output.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
    match cfg.experiment.problem {
        Problem::European | Problem::Bermudan => run_pricing(cfg, &out),
        Problem::Meanvar => run_meanvar(cfg, &out, ov.seed),
        Problem::Constmix => run_constmix(cfg, &out, ov.seed),
    }
}

fn problem_name(p: Problem) -> &'static str {
    match p {
        Problem::European => "european",
        Problem::Bermudan => "bermudan",
        Problem::Meanvar => "meanvar",
        Problem::Constmix => "constmix",
    }
}

fn run_pricing(cfg: &ExperimentConfig, out: &Path) -> Result<String, RunError> {
    let mut table = CsvTable::new(&["method", "N", "value", "change", "ratio"]);
    let mut summary = String::new();
    for method in cfg.methods() {
        for row in run_convergence(cfg, method)? {
            let _ = writeln!(summary, "{:12} {:>6} {:>16} {:>6}", method.name(), row.label, fmt_sig(row.value, 11), fmt_ratio(row.ratio));
            table.push(vec![
                method.name().into(),
                row.label,
                fmt_sig(row.value, 11),
                row.change.map_or("N/A".into(), |c| fmt_sig(c, 11)),
                fmt_ratio(row.ratio),
            ]);
        }
        let n = cfg.grid.ladder[0];
        if cfg.output.curve_dump {
            let c = pricing_curve(cfg, method, n)?;
            write_with(&out.join(format!("curve_{}_{n}.csv", method.name())), |w| c.write_csv(w))?;
        }
        if cfg.output.kernel_dump {
            if let Some(k) = method
                .propagator(&cfg.grid_spec(n)?.build()?, &cfg.process_params()?, kernel_dtau(cfg), &cfg.tolerance()?)?
                .kernel()
            {
                write_with(&out.join(format!("kernel_{}_{n}.csv", method.name())), |w| k.write_csv(w))?;
            }
        }
    }
    table.write(&out.join(format!("{}_convergence.csv", problem_name(cfg.experiment.problem))))?;
    Ok(summary)
}

fn kernel_dtau(cfg: &ExperimentConfig) -> f64 {
    match cfg.experiment.problem {
        Problem::Bermudan => cfg.horizon.dtau.unwrap_or(cfg.horizon.horizon),
        _ => cfg.horizon.horizon,
    }
}

fn run_meanvar(cfg: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<String, RunError> {
    let mut labels = Vec::new();
    let mut results: Vec<(ValueSolution, Moments)> = Vec::new();
    let mut frontier = CsvTable::new(&["w_star", "mean", "std"]);
    for level in 0..cfg.grid.ladder.len() {
        let mv = cfg.mv_config(level)?;
        let solver = MeanVarianceSolver::new(&mv)?;
        let (sol, m) = match cfg.horizon.target_mean {
            Some(target) => {
                let w0 = results.last().map_or(mv.w_star, |(s, _)| s.w_star);
                let r = newton_on_mean(&solver, target, w0, cfg.tolerances.mean_tol, 20)?;
                (r.solution, r.moments)
            }
            None => solver.evaluate(mv.w_star)?,
        };
        frontier.push(vec![fmt_sig(sol.w_star, 11), fmt_sig(m.mean, 11), fmt_sig(m.std, 11)]);
        labels.push(format!("{}x{}", mv.n_x, mv.n_b));
        results.push((sol, m));
    }
    let rows = |f: &dyn Fn(&(ValueSolution, Moments)) -> f64| {
        convergence_rows(&labels, &results.iter().map(f).collect::<Vec<_>>())
    };
    let value = rows(&|r| r.0.value);
    let mean = rows(&|r| r.1.mean);
    let std = rows(&|r| r.1.std);
    let mut table = CsvTable::new(&[
        "N_x", "N_b", "w_star", "value", "value_ratio", "mean", "mean_ratio", "std", "std_ratio",
    ]);
    let mut summary = String::new();
    for (k, (sol, _)) in results.iter().enumerate() {
        let (nx, nb) = (sol.policy.grid.len(), sol.policy.bgrid.len());
        table.push(vec![
            nx.to_string(),
            nb.to_string(),
            fmt_sig(sol.w_star, 11),
            fmt_sig(value[k].value, 11),
            fmt_ratio(value[k].ratio),
            fmt_sig(mean[k].value, 11),
            fmt_ratio(mean[k].ratio),
            fmt_sig(std[k].value, 11),
            fmt_ratio(std[k].ratio),
        ]);
        let _ = writeln!(
            summary,
            "{nx:>5} x {nb:<5} W* {} value {} E {} std {}",
            fmt_sig(sol.w_star, 11),
            fmt_sig(value[k].value, 11),
            fmt_sig(mean[k].value, 11),
            fmt_sig(std[k].value, 11)
        );
    }
    table.write(&out.join("meanvar_convergence.csv"))?;
    frontier.write(&out.join("frontier.csv"))?;

    let (finest, pide) = results.last().expect("non-empty ladder");
    if cfg.output.policy_dump {
        write_policy(&finest.policy, &cfg.mv_config(cfg.grid.ladder.len() - 1)?, out)?;
    }
    if let Some(mc) = &cfg.montecarlo {
        let mv = cfg.mv_config(cfg.grid.ladder.len() - 1)?;
        let mut t = CsvTable::new(&["n_sim", "mean", "std_error", "std", "median"]);
        for &n in &mc.n_sim {
            let r = monte_carlo(&finest.policy, &mv, n, seed.unwrap_or(mc.seed))?;
            let _ = writeln!(
                summary,
                "MC {n:>9}: E {} ({}) std {} median {}  [PIDE E {} std {}]",
                fmt_sig(r.mean, 7),
                fmt_sig(r.std_error, 2),
                fmt_sig(r.std, 7),
                fmt_sig(r.median, 4),
                fmt_sig(pide.mean, 7),
                fmt_sig(pide.std, 7)
            );
            t.push(vec![n.to_string(), fmt_sig(r.mean, 11), fmt_sig(r.std_error, 11), fmt_sig(r.std, 11), fmt_sig(r.median, 11)]);
        }
        t.write(&out.join("montecarlo.csv"))?;
    }
    Ok(summary)
}

/// One file per rebalance date with rows `x, b, b*, c*`, plus a heat map
/// of the stock fraction against wealth at zero bond holdings.
pub fn write_policy(policy: &PolicyStore, mv: &crate::meanvar::MVConfig, out: &Path) -> Result<(), RunError> {
    let xs = policy.grid.nodes();
    let nx = xs.len();
    let mut heat = CsvTable::new(&["t", "wealth", "stock_fraction"]);
    for (n, slice) in policy.dates.iter().enumerate() {
        let mut t = CsvTable::new(&["x", "b", "b_star", "c_star"]);
        for (j, b) in policy.bgrid.nodes().iter().enumerate() {
            for (m, x) in xs.iter().enumerate() {
                let i = j * nx + m;
                t.push(vec![fmt_sig(*x, 11), fmt_sig(*b, 11), fmt_sig(slice.b_star[i], 11), fmt_sig(slice.c_star[i], 11)]);
            }
        }
        t.write(&out.join("policy").join(format!("policy_t{n:02}.csv")))?;
        let q = policy.injections[n];
        for (m, x) in xs.iter().enumerate() {
            let w = x.exp() + q - slice.c_star[m];
            let frac = if w > 0.0 { (w - slice.b_star[m]) / w } else { 0.0 };
            heat.push(vec![fmt_sig(mv.date(n), 11), fmt_sig(x.exp(), 11), fmt_sig(frac, 11)]);
        }
    }
    heat.write(&out.join("policy_heatmap.csv"))
}

fn run_constmix(cfg: &ExperimentConfig, out: &Path, seed: Option<u64>) -> Result<String, RunError> {
    let mv = cfg.mv_config(0)?;
    let p = cfg.horizon.stock_fraction.expect("validated");
    let m = constant_mix_moments(p, &mv)?;
    let mut t = CsvTable::new(&["stock_fraction", "mean", "std", "n_sim", "median"]);
    let mut summary = format!("fraction {p}: E {} std {}\n", fmt_sig(m.mean, 11), fmt_sig(m.std, 11));
    let rule = ConstantMix { fraction: p, injections: mv.injections.clone() };
    match &cfg.montecarlo {
        Some(mc) => {
            for &n in &mc.n_sim {
                let r = monte_carlo(&rule, &mv, n, seed.unwrap_or(mc.seed))?;
                let _ = writeln!(summary, "MC {n}: median {}", fmt_sig(r.median, 6));
                t.push(vec![fmt_sig(p, 11), fmt_sig(m.mean, 11), fmt_sig(m.std, 11), n.to_string(), fmt_sig(r.median, 11)]);
            }
        }
        None => t.push(vec![fmt_sig(p, 11), fmt_sig(m.mean, 11), fmt_sig(m.std, 11), "0".into(), "N/A".into()]),
    }
    t.write(&out.join("constmix.csv"))?;
    Ok(summary)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn significant_digits() {
        assert_eq!(fmt_sig(3.97348604123, 11), "3.9734860412");
        assert_eq!(fmt_sig(97148.8991, 11), "97148.899100");
        assert_eq!(fmt_sig(0.19337297842, 11), "0.19337297842");
        assert_eq!(fmt_sig(4.012, 2), "4.0");
        assert_eq!(fmt_sig(23.4, 2), "23");
    }

    #[test]
    fn ratios() {
        let labels: Vec<String> = (0..4).map(|i| i.to_string()).collect();
        let rows = convergence_rows(&labels, &[1.0, 1.5, 1.625, 1.65625]);
        assert!(rows[0].ratio.is_none() && rows[1].ratio.is_none());
        assert!((rows[2].ratio.unwrap() - 4.0).abs() < 1e-12);
        assert!((rows[3].ratio.unwrap() - 4.0).abs() < 1e-12);
        let flat = convergence_rows(&labels, &[2.0, 2.0, 2.0, 2.0]);
        assert!(flat[2].ratio.unwrap().is_nan());
        assert_eq!(fmt_ratio(flat[2].ratio), "undef");
    }

    #[test]
    fn csv_render() {
        let mut t = CsvTable::new(&["a", "b"]);
        t.push(vec!["1".into(), "2".into()]);
        assert_eq!(t.render(), "a,b\n1,2\n");
    }
}
