#![allow(dead_code)]

use monofourier::contracts::{
    BermudanPutDividend, GridSpec, InterpolationSpace, InterventionSpec, Method, Payoff, PayoffKind,
};
use monofourier::models::{JumpSpec, ProcessParams};
use monofourier::projection::ToleranceConfig;

pub const LADDER: [usize; 6] = [512, 1024, 2048, 4096, 8192, 16384];

// European call, T = .25; columns mono-linear, mono-const, fst-trap, fst-simpson
pub const TABLE2: [[f64; 4]; 6] = [
    [3.9808516210, 3.9443958729, 3.9075619850, 3.9784907318],
    [3.9753205007, 3.9662547470, 3.9571661688, 3.9737010716],
    [3.9739391670, 3.9716756819, 3.9694107823, 3.9734923202],
    [3.9735939225, 3.9730282349, 3.9724624589, 3.9734796846],
    [3.9735076171, 3.9733662066, 3.9732247908, 3.9734789013],
    [3.9734860412, 3.9734506895, 3.9734153372, 3.9734788524],
];

// European call, T = .001
pub const TABLE3: [[f64; 4]; 6] = [
    [0.19662316859, 0.94284763015, 0.24774086499, 319.45747026],
    [0.19467436458, 0.041410269769, 0.21909081933, 521.62802838],
    [0.19376651687, 0.15335986938, 0.18611676723, 439.13444172],
    [0.19346709107, 0.18477993505, 0.17728640855, 27.002978049],
    [0.19339179620, 0.19127438852, 0.18913280108, 0.19367805822],
    [0.19337297842, 0.19284673379, 0.19231903134, 0.19338110881],
];

// Bermudan put with dividend
pub const TABLE5: [[f64; 4]; 6] = [
    [24.811127744, 24.806532754, 24.801967268, 24.802639420],
    [24.789931363, 24.788800257, 24.787670043, 24.787731820],
    [24.782264461, 24.781982815, 24.781701225, 24.781787212],
    [24.781134292, 24.781063962, 24.780993635, 24.781007785],
    [24.780822977, 24.780805394, 24.780787811, 24.780788678],
    [24.780744620, 24.780740225, 24.780735831, 24.780737159],
];

pub fn euro_params() -> ProcessParams {
    let jumps = JumpSpec::Kou { p_up: 0.3445, eta_up: 3.0465, eta_down: 3.0775 };
    ProcessParams::pricing(0.05, 0.15, 0.1, jumps).unwrap()
}

pub fn berm_params() -> ProcessParams {
    ProcessParams::pricing(0.05, 0.15, 0.1, JumpSpec::Merton { nu: -1.08, gamma: 0.4 }).unwrap()
}

pub fn grid(n: usize) -> GridSpec {
    GridSpec { s0: 100.0, below: 10.0, above: 10.0, n_nodes: n }
}

pub fn call() -> Payoff {
    Payoff::new(PayoffKind::Call, 100.0).unwrap()
}

pub fn put() -> Payoff {
    Payoff::new(PayoffKind::Put, 100.0).unwrap()
}

pub fn dividend_spec() -> InterventionSpec {
    InterventionSpec::BermudanPutDividend(BermudanPutDividend {
        strike: 100.0,
        dividend: 1.0,
        interpolation: InterpolationSpace::Price,
    })
}

pub fn tol(horizon: f64) -> ToleranceConfig {
    ToleranceConfig::with_horizon(horizon)
}

pub fn european(method: Method, n: usize, t: f64) -> f64 {
    monofourier::contracts::run_european(&euro_params(), &grid(n), &call(), method, t, &tol(t)).unwrap()
}

pub fn bermudan(method: Method, n: usize) -> f64 {
    monofourier::contracts::run_bermudan(
        &berm_params(),
        &grid(n),
        &put(),
        &dividend_spec(),
        method,
        10.0,
        1.0,
        &tol(10.0),
    )
    .unwrap()
}

/// Ratios of successive changes from the third entry on.
pub fn ratios(v: &[f64]) -> Vec<f64> {
    (2..v.len()).map(|k| (v[k - 1] - v[k - 2]) / (v[k] - v[k - 1])).collect()
}
