use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson, StandardNormal};
use rayon::prelude::*;

use super::{MVConfig, PolicyStore};
use crate::error::{Error, Result};

/// Rebalancing decision at date `n` given stock `s` and bond `b` before the
/// injection. Returns `(b*, c*)`.
pub trait RebalanceRule: Sync {
    fn rebalance(&self, n: usize, s: f64, b: f64) -> (f64, f64);

    /// Wealth kept at the horizon.
    fn terminal(&self, w: f64) -> f64 {
        w
    }
}

impl RebalanceRule for PolicyStore {
    fn rebalance(&self, n: usize, s: f64, b: f64) -> (f64, f64) {
        self.lookup(n, s, b)
    }

    fn terminal(&self, w: f64) -> f64 {
        self.terminal_wealth(w)
    }
}

/// Fixed stock fraction, no withdrawals.
#[derive(Debug, Clone)]
pub struct ConstantMix {
    pub fraction: f64,
    pub injections: Vec<f64>,
}

impl RebalanceRule for ConstantMix {
    fn rebalance(&self, n: usize, s: f64, b: f64) -> (f64, f64) {
        ((1.0 - self.fraction) * (s + b + self.injections[n]), 0.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MonteCarloSummary {
    pub mean: f64,
    pub std: f64,
    pub median: f64,
    /// Half width of the 99% confidence interval of the mean.
    pub std_error: f64,
}

/// Simulate terminal wealth from zero initial wealth. Path `i` draws from
/// stream `i` of a ChaCha8 generator keyed by `seed`, so results do not
/// depend on the thread count.
pub fn monte_carlo<R: RebalanceRule>(rule: &R, config: &MVConfig, n_sim: usize, seed: u64) -> Result<MonteCarloSummary> {
    if n_sim < 2 {
        return Err(Error::InvalidArgument("need at least two paths".into()));
    }
    let p = &config.params;
    let dt = config.dt();
    let drift = p.log_drift() * dt;
    let vol = p.sigma * dt.sqrt();
    let growth = (config.rate * dt).exp();
    let poisson = if p.lambda > 0.0 {
        Some(Poisson::new(p.lambda * dt).map_err(|e| Error::InvalidModel(e.to_string()))?)
    } else {
        None
    };
    let m = config.rebalance_count;
    let mut finals: Vec<f64> = (0..n_sim as u64)
        .into_par_iter()
        .map(|path| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(path);
            let (mut s, mut b) = (0.0f64, 0.0f64);
            for n in 0..m {
                let (bs, c) = rule.rebalance(n, s, b);
                let w = s + b + config.injections[n] - c;
                let bs = bs.clamp(0.0, w.max(0.0));
                b = bs * growth;
                s = (w - bs).max(0.0) * log_return(&mut rng, drift, vol, poisson.as_ref(), p).exp();
            }
            rule.terminal(s + b)
        })
        .collect();
    let n = n_sim as f64;
    let mean = finals.iter().sum::<f64>() / n;
    let var = finals.iter().map(|w| (w - mean) * (w - mean)).sum::<f64>() / (n - 1.0);
    let std = var.sqrt();
    finals.sort_unstable_by(f64::total_cmp);
    let median = if n_sim % 2 == 1 {
        finals[n_sim / 2]
    } else {
        0.5 * (finals[n_sim / 2 - 1] + finals[n_sim / 2])
    };
    Ok(MonteCarloSummary { mean, std, median, std_error: 2.58 * std / n.sqrt() })
}

fn log_return<G: Rng>(
    rng: &mut G,
    drift: f64,
    vol: f64,
    poisson: Option<&Poisson<f64>>,
    p: &crate::models::ProcessParams,
) -> f64 {
    let z: f64 = StandardNormal.sample(rng);
    let mut y = drift + vol * z;
    if let Some(d) = poisson {
        let k = d.sample(rng) as u64;
        for _ in 0..k {
            y += p.jumps.sample(rng);
        }
    }
    y
}
