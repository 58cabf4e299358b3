mod common;

use std::sync::OnceLock;

use monofourier::contracts::{
    apply_intervention, bermudan_intervention, BermudanPutDividend, GridSpec, InterpolationSpace, Method,
    ValueCurve,
};
use monofourier::grid::{ComplexSpectrum, Grid1D, SpectralPlan};
use monofourier::meanvar::{
    apply_control, constant_mix_moments, MVConfig, MeanVarianceSolver, PolicyStore, Surface2D,
};
use monofourier::models::{greens_transform, JumpSpec, ProcessParams};
use monofourier::projection::{
    accuracy_test, build_kernel, monotonicity_test, project_weights, theoretical_bounds, BasisKind,
    ToleranceConfig,
};
use monofourier::stepping::{brute_force_convolve, AsymptoticForm, AuxiliaryGrid, Propagator};
use proptest::prelude::*;

const EPS1: f64 = 1e-6;

fn jumps() -> impl Strategy<Value = JumpSpec> {
    prop_oneof![
        (0.05..0.95f64, 1.5..8.0f64, 0.5..8.0f64)
            .prop_map(|(p_up, eta_up, eta_down)| JumpSpec::Kou { p_up, eta_up, eta_down }),
        (-1.5..0.5f64, 0.05..0.8f64).prop_map(|(nu, gamma)| JumpSpec::Merton { nu, gamma }),
    ]
}

fn params() -> impl Strategy<Value = ProcessParams> {
    (0.0..0.1f64, 0.05..0.5f64, 0.0..1.0f64, jumps())
        .prop_map(|(r, s, l, j)| ProcessParams::pricing(r, s, l, j).unwrap())
}

fn pow2(lo: u32, hi: u32) -> impl Strategy<Value = usize> {
    (lo..=hi).prop_map(|k| 1usize << k)
}

fn sup(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| m.max(x.abs()))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn kernel_mass_is_discount_factor(
        p in params(),
        dt in 0.01..1.0f64,
        n in pow2(6, 10),
        alpha in pow2(0, 3),
        linear in any::<bool>(),
    ) {
        let g = Grid1D::from_center(100f64.ln(), 20.0 / n as f64, n).unwrap();
        let basis = if linear { BasisKind::PiecewiseLinear } else { BasisKind::PiecewiseConstant };
        let w = project_weights(&g, &p, dt, alpha, basis).unwrap();
        let mass = g.dx() * w.iter().sum::<f64>();
        prop_assert!((mass - (-p.discount() * dt).exp()).abs() < 1e-12, "mass {mass}");
    }

    #[test]
    fn fourier_semigroup_and_decay(p in params(), a in 0.01..0.5f64, b in 0.01..0.5f64, w in -20.0..20.0f64) {
        let lhs = greens_transform(w, a, &p) * greens_transform(w, b, &p);
        let rhs = greens_transform(w, a + b, &p);
        prop_assert!((lhs - rhs).norm() <= 1e-12 * rhs.norm().max(1e-300));
        let conj = greens_transform(-w, a, &p).conj();
        prop_assert!((conj - greens_transform(w, a, &p)).norm() < 1e-14);
        let bound = (-0.5 * p.sigma * p.sigma * (2.0 * std::f64::consts::PI * w).powi(2) * a).exp();
        prop_assert!(greens_transform(w, a, &p).norm() <= bound * (1.0 + 1e-12));
    }

    #[test]
    fn jump_transform_is_one_at_zero(j in jumps()) {
        prop_assert_eq!(j.char_fn(0.0).re, 1.0);
        prop_assert_eq!(j.char_fn(0.0).im, 0.0);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(100))]

    #[test]
    fn spectral_convolution_matches_direct_sum(
        n in pow2(2, 8),
        seed in prop::collection::vec(-1.0..1.0f64, 512),
        dx in 0.01..1.0f64,
    ) {
        let v = &seed[..n];
        let w = &seed[256..256 + n];
        let spec = ComplexSpectrum::from_kernel_weights(w, dx);
        let fast = SpectralPlan::new(n).convolve(v, &spec).unwrap();
        let slow = brute_force_convolve(v, w, dx);
        let err = fast.iter().zip(&slow).fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        prop_assert!(err < 1e-10, "max error {err}");
    }

    #[test]
    fn parseval_and_shift_equivariance(n in pow2(2, 8), seed in prop::collection::vec(-1.0..1.0f64, 512), shift in 0usize..256) {
        let v = &seed[..n];
        let plan = SpectralPlan::new(n);
        let f = plan.dft(v).unwrap();
        let energy: f64 = f.values.iter().map(|c| c.norm_sqr()).sum::<f64>() * n as f64;
        let direct: f64 = v.iter().map(|x| x * x).sum();
        prop_assert!((energy - direct).abs() <= 1e-10 * direct.max(1e-300));

        let s = shift % n;
        let spec = ComplexSpectrum::from_kernel_weights(&seed[256..256 + n], 0.1);
        let rot = |x: &[f64]| -> Vec<f64> { (0..n).map(|i| x[(i + n - s) % n]).collect() };
        let a = plan.convolve(&rot(v), &spec).unwrap();
        let b = rot(&plan.convolve(v, &spec).unwrap());
        let err = a.iter().zip(&b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
        prop_assert!(err < 1e-12, "shift error {err}");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn truncation_bounds_dominate_measured_tests(k in 9u32..=13, dt in 0.001..0.25f64) {
        let p = common::euro_params();
        let g = common::grid(1 << k).build().unwrap();
        for alpha in [2usize, 4, 8] {
            let w = project_weights(&g, &p, dt, alpha, BasisKind::PiecewiseLinear).unwrap();
            let half = project_weights(&g, &p, dt, alpha / 2, BasisKind::PiecewiseLinear).unwrap();
            let t1 = monotonicity_test(&w, g.dx()).abs();
            let t2 = accuracy_test(&w, &half, g.dx()).unwrap();
            let (b1, b2) = theoretical_bounds(alpha, g.len(), &p, dt, g.period()).unwrap();
            // measured values bottom out at round-off
            let noise = 1e-14;
            prop_assert!(t1 <= b1 + noise, "alpha {alpha}: test1 {t1} > bound {b1}");
            prop_assert!(t2 <= b2 + noise, "alpha {alpha}: test2 {t2} > bound {b2}");
        }
    }
}

struct Bermudan {
    aux: AuxiliaryGrid,
    prop: Propagator,
    spec: monofourier::contracts::InterventionSpec,
}

fn bermudan_pipeline() -> &'static Bermudan {
    static B: OnceLock<Bermudan> = OnceLock::new();
    B.get_or_init(|| {
        let g = GridSpec { s0: 100.0, below: 10.0, above: 10.0, n_nodes: 256 }.build().unwrap();
        let aux = AuxiliaryGrid::new(&g).unwrap();
        let prop = Method::MonoLinear
            .propagator(&aux.doubled, &common::berm_params(), 1.0, &ToleranceConfig::with_horizon(10.0))
            .unwrap();
        Bermudan { aux, prop, spec: common::dividend_spec() }
    })
}

fn run_pipeline(b: &Bermudan, v0: &[f64], steps: usize) -> Vec<f64> {
    let mut v = ValueCurve::new(b.aux.base, v0.to_vec()).unwrap();
    for _ in 0..steps {
        v.values = b.prop.guarded_step(&v.values, &b.aux, AsymptoticForm::Zero).unwrap();
        v = apply_intervention(&v, &b.spec).unwrap();
    }
    v.values
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(50))]

    #[test]
    fn discrete_comparison_on_bermudan(
        w0 in prop::collection::vec(-20.0..120.0f64, 256),
        gap in prop::collection::vec(0.0..30.0f64, 256),
    ) {
        let b = bermudan_pipeline();
        let u0: Vec<f64> = w0.iter().zip(&gap).map(|(w, d)| w + d).collect();
        let un = run_pipeline(b, &u0, 10);
        let wn = run_pipeline(b, &w0, 10);
        let worst = un.iter().zip(&wn).fold(f64::INFINITY, |m, (u, w)| m.min(u - w));
        prop_assert!(worst >= -2.0 * EPS1 * sup(&gap), "min(u - w) = {worst}");
    }
}

fn stability_propagator() -> &'static Propagator {
    static P: OnceLock<Propagator> = OnceLock::new();
    P.get_or_init(|| {
        let g = common::grid(512).build().unwrap();
        let p = ProcessParams::mean_variance(0.08885, 0.14777, 0.3222, common::euro_params().jumps).unwrap();
        Method::MonoLinear.propagator(&g, &p, 1.0 / 30.0, &ToleranceConfig::with_horizon(1.0)).unwrap()
    })
}

/// Non-expansive shift of the curve in price by `d`.
fn shift(v: &[f64], d: f64) -> Vec<f64> {
    let g = stability_propagator().grid();
    let c = ValueCurve::new(*g, v.to_vec()).unwrap();
    g.nodes()
        .iter()
        .map(|x| monofourier::contracts::price_interpolate(&c, (x.exp() - d).max(g.x_min().exp())).unwrap())
        .collect()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    #[test]
    fn sup_norm_stability(v0 in prop::collection::vec(-50.0..50.0f64, 512), m in prop_oneof![Just(10usize), Just(30)], d in 0.0..3.0f64) {
        let p = stability_propagator();
        let bound = (2.0 * EPS1).exp() * sup(&v0);
        let mut v = v0.clone();
        for _ in 0..m {
            v = shift(&p.step(&v).unwrap(), d);
            prop_assert!(sup(&v) < bound);
        }
    }

    #[test]
    fn minimum_value_bound(v0 in prop::collection::vec(-5.0..50.0f64, 512), m in prop_oneof![Just(10usize), Just(30)]) {
        let p = stability_propagator();
        let k = p.kernel().unwrap();
        let c3: f64 = k.grid.dx() * k.weights.iter().map(|w| w.max(0.0)).sum::<f64>();
        let c2 = (2.0 * EPS1).exp() * sup(&v0);
        let min0 = v0.iter().cloned().fold(f64::INFINITY, f64::min);
        let mut v = v0.clone();
        for n in 1..=m {
            v = p.step(&v).unwrap();
            let min = v.iter().cloned().fold(f64::INFINITY, f64::min);
            let floor = min0 * c3.powi(n as i32) - c2 * (EPS1.exp() - 1.0);
            prop_assert!(min >= floor - 1e-12 * c2, "step {n}: {min} < {floor}");
        }
    }

    #[test]
    fn intervention_is_monotone_and_non_expansive(
        v in prop::collection::vec(-10.0..120.0f64, 256),
        d in prop::collection::vec(0.0..5.0f64, 256),
        dividend in 0.0..3.0f64,
        log_space in any::<bool>(),
    ) {
        let g = GridSpec { s0: 100.0, below: 10.0, above: 10.0, n_nodes: 256 }.build().unwrap();
        let spec = BermudanPutDividend {
            strike: 100.0,
            dividend,
            interpolation: if log_space { InterpolationSpace::LogPrice } else { InterpolationSpace::Price },
        };
        let u: Vec<f64> = v.iter().zip(&d).map(|(a, b)| a + b).collect();
        let iv = bermudan_intervention(&ValueCurve::new(g, v.clone()).unwrap(), &spec).unwrap();
        let iu = bermudan_intervention(&ValueCurve::new(g, u).unwrap(), &spec).unwrap();
        let mut gap = 0.0f64;
        for (a, b) in iu.values.iter().zip(&iv.values) {
            prop_assert!(a >= b);
            gap = gap.max(a - b);
        }
        prop_assert!(gap <= sup(&d) + 1e-12);
    }
}

#[test]
fn mono_stays_above_negative_tolerance_at_small_timestep() {
    let t = 0.001;
    let curve = monofourier::contracts::run_european_curve(
        &common::euro_params(),
        &common::grid(512),
        &common::call(),
        Method::MonoLinear,
        t,
        &common::tol(t),
        None,
    )
    .unwrap();
    let payoff_sup = curve.grid.nodes().iter().map(|x| (x.exp() - 100.0).max(0.0)).fold(0.0, f64::max);
    let min = curve.values.iter().cloned().fold(f64::INFINITY, f64::min);
    assert!(min >= -EPS1 * payoff_sup, "min {min}");
}

#[test]
fn bermudan_kernel_mass_and_negative_mass() {
    let g = common::grid(1024).build().unwrap();
    let p = common::berm_params();
    let k = build_kernel(&g, &p, 1.0, BasisKind::PiecewiseLinear, &common::tol(10.0)).unwrap();
    assert!((k.c1 - (-0.05f64).exp()).abs() < 1e-12);
    let negative: f64 = k.weights.iter().map(|w| g.dx() * w.min(0.0).abs()).sum();
    assert!(negative < EPS1 * 1.0 / 10.0);
}

#[test]
fn symmetric_kernel_without_drift() {
    // zero log drift and symmetric jumps give an even kernel
    let sigma = 0.2;
    let jumps = JumpSpec::Merton { nu: 0.0, gamma: 0.3 };
    let kappa = monofourier::models::kappa(&jumps);
    let drift = 0.5 * sigma * sigma + 0.4 * kappa;
    let p = ProcessParams::mean_variance(drift, sigma, 0.4, jumps).unwrap();
    assert!(p.log_drift().abs() < 1e-15);
    let g = Grid1D::from_center(0.0, 0.05, 256).unwrap();
    let w = project_weights(&g, &p, 0.5, 4, BasisKind::PiecewiseLinear).unwrap();
    for j in 1..128 {
        assert!((w[128 + j] - w[128 - j]).abs() < 1e-12, "j = {j}");
    }
}

#[test]
fn bermudan_ratios_near_second_order_at_finest_levels() {
    for (c, m) in Method::ALL.iter().enumerate() {
        let v: Vec<f64> = common::LADDER.iter().map(|&n| common::bermudan(*m, n)).collect();
        let r = common::ratios(&v);
        for &x in &r[r.len() - 2..] {
            assert!((3.3..=4.5).contains(&x), "{} ratio {x}", m.name());
        }
        assert!((v[5] - common::TABLE5[5][c]).abs() < 1e-7);
    }
}

fn small_mv() -> &'static MeanVarianceSolver {
    static S: OnceLock<MeanVarianceSolver> = OnceLock::new();
    S.get_or_init(|| MeanVarianceSolver::new(&MVConfig::example(128, 77)).unwrap())
}

#[test]
fn meanvar_solve_is_thread_count_independent() {
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| small_mv().evaluate(1022.0).unwrap())
    };
    let (a, ma) = run(1);
    let (b, mb) = run(8);
    let bits = |v: &[f64]| v.iter().map(|x| x.to_bits()).collect::<Vec<_>>();
    assert_eq!(bits(&a.surface.values), bits(&b.surface.values));
    assert_eq!(a.value.to_bits(), b.value.to_bits());
    assert_eq!(ma.mean.to_bits(), mb.mean.to_bits());
    assert_eq!(ma.std.to_bits(), mb.std.to_bits());
    for (x, y) in a.policy.dates.iter().zip(&b.policy.dates) {
        assert_eq!(bits(&x.b_star), bits(&y.b_star));
        assert_eq!(bits(&x.c_star), bits(&y.c_star));
    }
}

#[test]
fn meanvar_policy_satisfies_constraints() {
    let (sol, _) = small_mv().evaluate(1022.0).unwrap();
    sol.policy.audit().unwrap();
}

#[test]
fn control_is_no_worse_than_extreme_candidates() {
    let s = small_mv();
    let surf = Surface2D::from_fn(&s.grid, &s.bgrid, |x, b| ((x.exp() + b - 900.0).min(0.0)).powi(2) + (x - 5.0).abs());
    let n = 12;
    let (out, _) = apply_control(&surf, &s.grid, &s.bgrid, &s.config, n).unwrap();
    let cap = s.config.withdrawal_cap(n).unwrap().max(0.0);
    let q = s.config.injections[n];
    let floor = s.grid.x_min().exp();
    let bs = s.bgrid.nodes();
    for (j, b) in bs.iter().enumerate() {
        for (m, x) in s.grid.nodes().iter().enumerate() {
            let wp = (x.exp() + b + q).min(cap);
            let v = out.get(m, j);
            let all_stock = surf.interpolate(&s.grid, &s.bgrid, wp.max(floor).ln(), 0.0);
            let k = bs.iter().rposition(|&bk| bk <= wp).unwrap();
            let most_bond = surf.interpolate(&s.grid, &s.bgrid, (wp - bs[k]).max(floor).ln(), bs[k]);
            assert!(v <= all_stock + 1e-9 * (1.0 + all_stock.abs()));
            assert!(v <= most_bond + 1e-9 * (1.0 + most_bond.abs()));
        }
    }
}

#[test]
fn constant_mix_through_moment_propagation() {
    let cfg = MVConfig::example(1024, 609);
    let solver = MeanVarianceSolver::new(&cfg).unwrap();
    let policy = PolicyStore::constant_mix(&solver.grid, &solver.bgrid, &cfg.injections, 0.6);
    let pde = solver.moments(&policy).unwrap();
    let exact = constant_mix_moments(0.6, &cfg).unwrap();
    assert!((pde.mean - exact.mean).abs() / exact.mean < 5e-3, "{} vs {}", pde.mean, exact.mean);
    assert!((pde.std - exact.std).abs() / exact.std < 5e-3, "{} vs {}", pde.std, exact.std);
}
