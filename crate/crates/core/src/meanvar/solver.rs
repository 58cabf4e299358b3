use rayon::prelude::*;

use super::{BGrid, MVConfig};
use crate::contracts::bracket;
use crate::error::{Error, Result};
use crate::grid::Grid1D;
use crate::projection::{build_kernel, BasisKind};
use crate::stepping::{AsymptoticForm, AuxiliaryGrid, Propagator};

/// Values `v[m, j]` on the stock x bond tensor grid, stored one bond
/// column after another.
#[derive(Debug, Clone, PartialEq)]
pub struct Surface2D {
    pub n_x: usize,
    pub n_b: usize,
    pub values: Vec<f64>,
}

impl Surface2D {
    pub fn from_fn(grid: &Grid1D, bgrid: &BGrid, f: impl Fn(f64, f64) -> f64) -> Self {
        let xs = grid.nodes();
        let mut values = Vec::with_capacity(xs.len() * bgrid.len());
        for &b in bgrid.nodes() {
            values.extend(xs.iter().map(|&x| f(x, b)));
        }
        Self { n_x: xs.len(), n_b: bgrid.len(), values }
    }

    pub fn get(&self, m: usize, j: usize) -> f64 {
        self.values[j * self.n_x + m]
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.values[j * self.n_x..(j + 1) * self.n_x]
    }

    /// Bilinear interpolation at log stock amount `x` and bond amount `b`.
    pub fn interpolate(&self, grid: &Grid1D, bgrid: &BGrid, x: f64, b: f64) -> f64 {
        let (i, tx) = bracket(grid, x);
        let (k, tb) = bgrid.bracket(b);
        let lerp = |j: usize| {
            let c = self.column(j);
            c[i] + tx * (c[i + 1] - c[i])
        };
        if tb == 0.0 {
            lerp(k)
        } else {
            (1.0 - tb) * lerp(k) + tb * lerp(k + 1)
        }
    }
}

/// `(min(e^x + b - W*, 0))^2`.
pub fn terminal_condition(grid: &Grid1D, bgrid: &BGrid, w_star: f64) -> Surface2D {
    Surface2D::from_fn(grid, bgrid, |x, b| {
        let d = (x.exp() + b - w_star).min(0.0);
        d * d
    })
}

/// Interpolate each column at `b e^{r dt}` and take one guarded step.
pub fn advance_time(
    surface: &Surface2D,
    propagator: &Propagator,
    aux: &AuxiliaryGrid,
    bgrid: &BGrid,
    rate: f64,
    dt: f64,
    a_form: AsymptoticForm,
) -> Result<Surface2D> {
    let nx = surface.n_x;
    if nx != aux.base.len() || surface.n_b != bgrid.len() {
        return Err(Error::LengthMismatch { expected: aux.base.len() * bgrid.len(), got: surface.values.len() });
    }
    let growth = (rate * dt).exp();
    let cols: Vec<Vec<f64>> = bgrid
        .nodes()
        .par_iter()
        .map(|&b| {
            let (k, t) = bgrid.bracket(b * growth);
            let lo = surface.column(k);
            let col: Vec<f64> = if t == 0.0 {
                lo.to_vec()
            } else {
                let hi = surface.column(k + 1);
                lo.iter().zip(hi).map(|(a, c)| (1.0 - t) * a + t * c).collect()
            };
            propagator.guarded_step(&col, aux, a_form)
        })
        .collect::<Result<_>>()?;
    Ok(Surface2D { n_x: nx, n_b: surface.n_b, values: cols.concat() })
}

/// Controls chosen at one rebalance date.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicySlice {
    pub b_star: Vec<f64>,
    pub c_star: Vec<f64>,
}

/// Controls for every rebalance date, indexed forward in time.
#[derive(Debug, Clone, PartialEq)]
pub struct PolicyStore {
    pub grid: Grid1D,
    pub bgrid: BGrid,
    pub injections: Vec<f64>,
    pub dates: Vec<PolicySlice>,
    /// Wealth above this level is withdrawn at the horizon.
    pub terminal_cap: Option<f64>,
}

impl PolicyStore {
    /// Rebalance to a fixed stock fraction with no withdrawals.
    pub fn constant_mix(grid: &Grid1D, bgrid: &BGrid, injections: &[f64], fraction: f64) -> Self {
        let dates = injections
            .iter()
            .map(|&q| {
                let w = Surface2D::from_fn(grid, bgrid, |x, b| x.exp() + b + q);
                PolicySlice {
                    b_star: w.values.iter().map(|w| (1.0 - fraction) * w).collect(),
                    c_star: vec![0.0; w.values.len()],
                }
            })
            .collect();
        Self { grid: *grid, bgrid: bgrid.clone(), injections: injections.to_vec(), dates, terminal_cap: None }
    }

    /// Terminal wealth counted in the moments.
    pub fn terminal_wealth(&self, w: f64) -> f64 {
        match self.terminal_cap {
            Some(c) => w.min(c),
            None => w,
        }
    }

    /// Check `0 <= b* <= W'` and `c* >= 0` at every stored node.
    pub fn audit(&self) -> Result<()> {
        let xs = self.grid.nodes();
        let nx = xs.len();
        for (n, s) in self.dates.iter().enumerate() {
            let q = self.injections[n];
            for (idx, (&b, &c)) in s.b_star.iter().zip(&s.c_star).enumerate() {
                let w = xs[idx % nx].exp() + self.bgrid.nodes()[idx / nx] + q - c;
                if !(c >= 0.0) || !(b >= 0.0) || b > w * (1.0 + 1e-12) {
                    return Err(Error::InvalidArgument(format!(
                        "policy violates constraints at date {n}, node {idx}: b* = {b}, c* = {c}, W' = {w}"
                    )));
                }
            }
        }
        Ok(())
    }

    /// Controls at date `n` for stock amount `s` and bond amount `b` before
    /// the injection, bilinearly interpolated and clipped to feasibility.
    /// Returns `(b*, c*)`.
    pub fn lookup(&self, n: usize, s: f64, b: f64) -> (f64, f64) {
        let floor = self.grid.x_min().exp();
        let x = s.max(floor).ln();
        let slice = &self.dates[n];
        let nx = self.grid.len();
        let (i, tx) = bracket(&self.grid, x);
        let (k, tb) = self.bgrid.bracket(b);
        let bil = |v: &[f64]| {
            let at = |j: usize| v[j * nx + i] + tx * (v[j * nx + i + 1] - v[j * nx + i]);
            if tb == 0.0 { at(k) } else { (1.0 - tb) * at(k) + tb * at(k + 1) }
        };
        let total = s + b + self.injections[n];
        let c = bil(&slice.c_star).clamp(0.0, total);
        let bs = bil(&slice.b_star).clamp(0.0, total - c);
        (bs, c)
    }
}

/// Optimal rebalancing at date `n`: withdraw the surplus above the
/// discounted target, then search the bond grid for the best split.
pub fn apply_control(
    surface: &Surface2D,
    grid: &Grid1D,
    bgrid: &BGrid,
    config: &MVConfig,
    n: usize,
) -> Result<(Surface2D, PolicySlice)> {
    let nx = grid.len();
    let q = *config
        .injections
        .get(n)
        .ok_or_else(|| Error::InvalidArgument(format!("date index {n} out of range")))?;
    let cap = config.withdrawal_cap(n)?.max(0.0);
    let x_min = grid.x_min();
    let floor = x_min.exp();
    let inv_dx = 1.0 / grid.dx();
    let last = (nx - 1) as f64;
    let bs = bgrid.nodes();
    let v = &surface.values;

    let search = |wp: f64| -> (f64, usize) {
        let mut best = f64::INFINITY;
        let mut kb = 0;
        for (k, &b) in bs.iter().enumerate() {
            if b > wp {
                break;
            }
            let z = ((wp - b).max(floor).ln() - x_min) * inv_dx;
            let col = &v[k * nx..(k + 1) * nx];
            let val = if z >= last {
                col[nx - 1]
            } else {
                let z = z.max(0.0);
                let i = z as usize;
                col[i] + (z - i as f64) * (col[i + 1] - col[i])
            };
            if val < best {
                best = val;
                kb = k;
            }
        }
        (best, kb)
    };
    let at_cap = search(cap);
    let xs = grid.nodes();

    if let Some((count, h)) = bgrid.uniform_prefix() {
        if count >= 2 && cap < bs[count - 1] {
            let lerp_at = |s: f64| -> (usize, f64) {
                let z = (s.max(floor).ln() - x_min) * inv_dx;
                if z >= last {
                    (nx - 2, 1.0)
                } else {
                    let z = z.max(0.0);
                    let i = z as usize;
                    (i, z - i as f64)
                }
            };
            let rows = uniform_search(surface, bs, &xs, q, cap, h, at_cap, lerp_at);
            return finish(rows, nx, bs);
        }
    }

    let cols: Vec<(Vec<f64>, Vec<f64>, Vec<f64>)> = bs
        .par_iter()
        .map(|&b| {
            let mut val = Vec::with_capacity(nx);
            let mut bst = Vec::with_capacity(nx);
            let mut cst = Vec::with_capacity(nx);
            for &x in &xs {
                let w = x.exp() + b + q;
                let (wp, (best, kb)) = if w >= cap { (cap, at_cap) } else { (w, search(w)) };
                val.push(best);
                bst.push(bs[kb]);
                cst.push(w - wp);
            }
            (val, bst, cst)
        })
        .collect();
    let mut values = Vec::with_capacity(nx * bs.len());
    let mut b_star = Vec::with_capacity(nx * bs.len());
    let mut c_star = Vec::with_capacity(nx * bs.len());
    for (a, b, c) in cols {
        values.extend(a);
        b_star.extend(b);
        c_star.extend(c);
    }
    check_finite(Surface2D { n_x: nx, n_b: bs.len(), values }, PolicySlice { b_star, c_star })
}

fn check_finite(surface: Surface2D, slice: PolicySlice) -> Result<(Surface2D, PolicySlice)> {
    if surface.values.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite("control search"));
    }
    Ok((surface, slice))
}

type Row = (Vec<f64>, Vec<usize>, Vec<f64>);

/// Search when every reachable bond node lies on the equally spaced prefix:
/// the stock amount `W' - b_k` then depends only on the row and `j - k`, so
/// the interpolation stencil is tabulated once per row.
#[allow(clippy::too_many_arguments)]
fn uniform_search(
    surface: &Surface2D,
    bs: &[f64],
    xs: &[f64],
    q: f64,
    cap: f64,
    h: f64,
    at_cap: (f64, usize),
    lerp_at: impl Fn(f64) -> (usize, f64) + Sync,
) -> Vec<Row> {
    let nx = xs.len();
    let nb = bs.len();
    let v = &surface.values;
    let mut vt = vec![0.0; nx * nb];
    for k in 0..nb {
        for i in 0..nx {
            vt[i * nb + k] = v[k * nx + i];
        }
    }
    xs.par_iter()
        .map(|&x| {
            let base = x.exp() + q;
            let mut val = Vec::with_capacity(nb);
            let mut kst = Vec::with_capacity(nb);
            let mut cst = Vec::with_capacity(nb);
            let searched = bs.iter().take_while(|&&b| base + b < cap).count();
            let k_top = if searched == 0 {
                0
            } else {
                let w_top = base + bs[searched - 1];
                bs.iter().take_while(|&&b| b <= w_top).count()
            };
            // d = j - k runs over [-(k_top - 1), searched - 1]
            let d_lo = k_top as isize - 1;
            let table: Vec<(usize, f64)> = (-d_lo..searched as isize)
                .map(|d| lerp_at(base + d as f64 * h))
                .collect();
            for (j, &b) in bs.iter().enumerate() {
                let w = base + b;
                if j >= searched {
                    val.push(at_cap.0);
                    kst.push(at_cap.1);
                    cst.push(w - cap);
                    continue;
                }
                let mut best = f64::INFINITY;
                let mut kb = 0;
                for (k, &bk) in bs.iter().enumerate() {
                    if bk > w {
                        break;
                    }
                    let (i, t) = table[(j as isize - k as isize + d_lo) as usize];
                    let lo = vt[i * nb + k];
                    let c = lo + t * (vt[(i + 1) * nb + k] - lo);
                    if c < best {
                        best = c;
                        kb = k;
                    }
                }
                val.push(best);
                kst.push(kb);
                cst.push(0.0);
            }
            (val, kst, cst)
        })
        .collect()
}

fn finish(rows: Vec<Row>, nx: usize, bs: &[f64]) -> Result<(Surface2D, PolicySlice)> {
    let nb = bs.len();
    let mut values = vec![0.0; nx * nb];
    let mut b_star = vec![0.0; nx * nb];
    let mut c_star = vec![0.0; nx * nb];
    for (m, (val, kst, cst)) in rows.into_iter().enumerate() {
        for j in 0..nb {
            values[j * nx + m] = val[j];
            b_star[j * nx + m] = bs[kst[j]];
            c_star[j * nx + m] = cst[j];
        }
    }
    check_finite(Surface2D { n_x: nx, n_b: nb, values }, PolicySlice { b_star, c_star })
}

/// Map a surface through stored controls without optimising.
fn apply_policy(surface: &Surface2D, store: &PolicyStore, n: usize) -> Surface2D {
    let grid = &store.grid;
    let bgrid = &store.bgrid;
    let nx = grid.len();
    let floor = grid.x_min().exp();
    let q = store.injections[n];
    let slice = &store.dates[n];
    let xs = grid.nodes();
    let cols: Vec<Vec<f64>> = bgrid
        .nodes()
        .par_iter()
        .enumerate()
        .map(|(j, &b)| {
            (0..nx)
                .map(|m| {
                    let idx = j * nx + m;
                    let wp = xs[m].exp() + b + q - slice.c_star[idx];
                    let bst = slice.b_star[idx];
                    let x = (wp - bst).max(floor).ln();
                    surface.interpolate(grid, bgrid, x, bst)
                })
                .collect()
        })
        .collect();
    Surface2D { n_x: nx, n_b: bgrid.len(), values: cols.concat() }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValueSolution {
    pub w_star: f64,
    /// Value at zero initial wealth.
    pub value: f64,
    pub surface: Surface2D,
    pub policy: PolicyStore,
}

/// Grids and kernel for one discretisation, reusable across targets.
#[derive(Debug, Clone)]
pub struct MeanVarianceSolver {
    pub config: MVConfig,
    pub grid: Grid1D,
    pub aux: AuxiliaryGrid,
    pub bgrid: BGrid,
    pub propagator: Propagator,
}

impl MeanVarianceSolver {
    pub fn new(config: &MVConfig) -> Result<Self> {
        config.validate()?;
        let grid = Grid1D::new(config.x_min(), config.x_max(), config.n_x)?;
        let aux = AuxiliaryGrid::new(&grid)?;
        let bgrid = BGrid::build(config.n_b, config.b_fine, config.b_max())?;
        let kernel = build_kernel(&aux.doubled, &config.params, config.dt(), BasisKind::PiecewiseLinear, &config.tol)?;
        Ok(Self { config: config.clone(), grid, aux, bgrid, propagator: Propagator::monotone(kernel) })
    }

    /// Backward recursion for target `w_star`.
    pub fn solve(&self, w_star: f64) -> Result<ValueSolution> {
        let mut cfg = self.config.clone();
        cfg.w_star = w_star;
        let m = cfg.rebalance_count;
        let mut v = terminal_condition(&self.grid, &self.bgrid, w_star);
        let mut dates = vec![None; m];
        for n in (0..m).rev() {
            v = advance_time(&v, &self.propagator, &self.aux, &self.bgrid, cfg.rate, cfg.dt(), AsymptoticForm::Zero)?;
            let (nv, slice) = apply_control(&v, &self.grid, &self.bgrid, &cfg, n)?;
            v = nv;
            dates[n] = Some(slice);
        }
        let policy = PolicyStore {
            grid: self.grid,
            bgrid: self.bgrid.clone(),
            injections: cfg.injections.clone(),
            dates: dates.into_iter().map(|d| d.expect("filled")).collect(),
            terminal_cap: Some(w_star),
        };
        Ok(ValueSolution { w_star, value: v.get(0, 0), surface: v, policy })
    }

    /// Mean and standard deviation of terminal wealth under `policy`,
    /// starting from zero wealth.
    pub fn moments(&self, policy: &PolicyStore) -> Result<Moments> {
        let m = self.config.rebalance_count;
        if policy.dates.len() != m || policy.grid != self.grid || policy.bgrid != self.bgrid {
            return Err(Error::InvalidArgument("policy does not match this solver".into()));
        }
        let mut u1 = Surface2D::from_fn(&self.grid, &self.bgrid, |x, b| policy.terminal_wealth(x.exp() + b));
        let mut u2 =
            Surface2D::from_fn(&self.grid, &self.bgrid, |x, b| policy.terminal_wealth(x.exp() + b).powi(2));
        let (r, dt) = (self.config.rate, self.config.dt());
        for n in (0..m).rev() {
            u1 = advance_time(&u1, &self.propagator, &self.aux, &self.bgrid, r, dt, AsymptoticForm::Flat)?;
            u2 = advance_time(&u2, &self.propagator, &self.aux, &self.bgrid, r, dt, AsymptoticForm::Flat)?;
            u1 = apply_policy(&u1, policy, n);
            u2 = apply_policy(&u2, policy, n);
        }
        let mean = u1.get(0, 0);
        let var = u2.get(0, 0) - mean * mean;
        if !mean.is_finite() || !var.is_finite() {
            return Err(Error::NonFinite("moment propagation"));
        }
        Ok(Moments { mean, std: var.max(0.0).sqrt() })
    }

    pub fn evaluate(&self, w_star: f64) -> Result<(ValueSolution, Moments)> {
        let s = self.solve(w_star)?;
        let m = self.moments(&s.policy)?;
        Ok((s, m))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NewtonResult {
    pub w_star: f64,
    pub moments: Moments,
    pub solution: ValueSolution,
    pub iterations: usize,
}

/// Find `W*` with `E[W_T] = target` by safeguarded secant steps.
pub fn newton_on_mean(
    solver: &MeanVarianceSolver,
    target: f64,
    w_initial: f64,
    rel_tol: f64,
    max_iter: usize,
) -> Result<NewtonResult> {
    let start = solver.evaluate(w_initial)?;
    newton_on_mean_from(solver, target, start, rel_tol, max_iter)
}

/// As [`newton_on_mean`], reusing an evaluation already made at the
/// starting target.
pub fn newton_on_mean_from(
    solver: &MeanVarianceSolver,
    target: f64,
    start: (ValueSolution, Moments),
    rel_tol: f64,
    max_iter: usize,
) -> Result<NewtonResult> {
    let eval = |w: f64| -> Result<(f64, ValueSolution, Moments)> {
        let (s, m) = solver.evaluate(w)?;
        Ok((m.mean - target, s, m))
    };
    let done = |f: f64| f.abs() <= rel_tol * target.abs();
    let (s0, m0) = start;
    let mut w0 = s0.w_star;
    let mut f0 = m0.mean - target;
    if done(f0) {
        return Ok(NewtonResult { w_star: w0, moments: m0, solution: s0, iterations: 1 });
    }
    let mut w1 = if w0 - f0 > 0.0 { w0 - f0 } else { w0 * 1.01 };
    let (mut f1, mut s1, mut m1) = eval(w1)?;
    // bracket [lo, hi] with f(lo) < 0 < f(hi) once known
    let mut lo: Option<(f64, f64)> = None;
    let mut hi: Option<(f64, f64)> = None;
    let note = |w: f64, f: f64, lo: &mut Option<(f64, f64)>, hi: &mut Option<(f64, f64)>| {
        if f < 0.0 {
            if lo.is_none_or(|(lw, _)| w > lw) {
                *lo = Some((w, f));
            }
        } else if hi.is_none_or(|(hw, _)| w < hw) {
            *hi = Some((w, f));
        }
    };
    note(w0, f0, &mut lo, &mut hi);
    note(w1, f1, &mut lo, &mut hi);
    for it in 2..=max_iter {
        if done(f1) {
            return Ok(NewtonResult { w_star: w1, moments: m1, solution: s1, iterations: it });
        }
        let mut w2 = if f1 != f0 { w1 - f1 * (w1 - w0) / (f1 - f0) } else { f64::NAN };
        if let (Some((a, _)), Some((b, _))) = (lo, hi) {
            let (l, h) = if a < b { (a, b) } else { (b, a) };
            if !(w2 > l && w2 < h) {
                w2 = 0.5 * (l + h);
            }
        } else if !w2.is_finite() || w2 <= 0.0 {
            return Err(Error::RootSearch(format!("target mean {target} is not bracketed")));
        }
        let (f2, s2, m2) = eval(w2)?;
        note(w2, f2, &mut lo, &mut hi);
        w0 = w1;
        f0 = f1;
        w1 = w2;
        f1 = f2;
        s1 = s2;
        m1 = m2;
    }
    if done(f1) {
        return Ok(NewtonResult { w_star: w1, moments: m1, solution: s1, iterations: max_iter });
    }
    Err(Error::RootSearch(format!("no convergence in {max_iter} iterations, residual {f1}")))
}
