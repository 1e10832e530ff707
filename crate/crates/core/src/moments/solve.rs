use serde::Serialize;

use super::signals::{hat_table, InputSignals};
use crate::error::{Error, Result};
use crate::kernel::{pair_transition_series, symmetrize, JumpKernel, PairField, TorusGeometry, TorusKernel};

/// Normwise relative agreement required between the integrator and the
/// Duhamel quadrature.
pub const CONSISTENCY_TOL: f64 = 1e-4;
/// Largest normwise relative change allowed when the step is halved.
pub const REFINEMENT_TOL: f64 = 1e-3;
/// Largest torus-squared state count for second moments.
pub const SECOND_MOMENT_STATE_CAP: usize = 1_000_000;

#[derive(Debug, Clone)]
pub struct MomentModel {
    pub kernel: JumpKernel,
    pub geometry: TorusGeometry,
    pub gamma: f64,
}

#[derive(Debug, Clone)]
pub struct SolveOptions {
    /// Integrator step; must divide the signal grid step.
    pub dt: f64,
    /// Number of evenly spaced grid times checked against the quadrature.
    pub check_points: usize,
    /// Additional grid times to check.
    pub extra_checks: Vec<f64>,
}

impl SolveOptions {
    pub fn new(dt: f64) -> Self {
        Self {
            dt,
            check_points: 8,
            extra_checks: Vec::new(),
        }
    }
}

/// A moment field on the signal grid up to `t_end`, flattened per time.
#[derive(Debug, Clone, Serialize)]
pub struct MomentField {
    pub times: Vec<f64>,
    /// `values[k][x]` for first moments, `values[k][x * n + y]` for second.
    pub values: Vec<Vec<f64>>,
    pub sites: usize,
    pub pairs: bool,
    /// Max normwise relative integrator-vs-quadrature gap over the checks.
    pub quadrature_gap: f64,
    pub check_times: Vec<f64>,
    /// Normwise relative change under step halving.
    pub refinement_change: f64,
}

impl MomentField {
    pub fn at(&self, t: f64) -> Option<&[f64]> {
        let tol = 1e-9 * t.max(1.0);
        self.times
            .iter()
            .position(|&s| (s - t).abs() <= tol)
            .map(|k| self.values[k].as_slice())
    }

    pub fn at_site(&self, t: f64, x: usize) -> Option<f64> {
        self.at(t).map(|v| v[x])
    }

    pub fn at_pair(&self, t: f64, x: usize, y: usize) -> Option<f64> {
        self.at(t).map(|v| v[x * self.sites + y])
    }
}

struct Grid {
    h: f64,
    len: usize,
    substeps: usize,
}

fn grid(signals: &InputSignals, t_end: f64, dt: f64) -> Result<Grid> {
    let h = signals.step;
    let m = (t_end / h).round();
    if !(t_end > 0.0) || (m * h - t_end).abs() > 1e-9 * t_end.max(1.0) {
        return Err(Error::Config(format!("t_end {t_end} is not on the signal grid (step {h})")));
    }
    if m as usize + 1 > signals.vacancy.len() {
        return Err(Error::Config(format!(
            "signals cover [0, {}] but t_end = {t_end}",
            signals.t_max()
        )));
    }
    let sub = (h / dt).round();
    if !(dt > 0.0) || sub < 1.0 || (sub * dt - h).abs() > 1e-9 * h {
        return Err(Error::Config(format!("dt {dt} must divide the signal step {h}")));
    }
    Ok(Grid {
        h,
        len: m as usize + 1,
        substeps: sub as usize,
    })
}

fn check_indices(g: &Grid, opts: &SolveOptions) -> Vec<usize> {
    let last = g.len - 1;
    let n = opts.check_points.max(1).min(last);
    let mut idx: Vec<usize> = (1..=n).map(|i| (i * last).div_ceil(n)).collect();
    for &t in &opts.extra_checks {
        let k = (t / g.h).round() as usize;
        if k >= 1 && k <= last && (k as f64 * g.h - t).abs() < 1e-9 * t.max(1.0) {
            idx.push(k);
        }
    }
    idx.sort_unstable();
    idx.dedup();
    idx
}

/// Classical RK4 on `y' = A y + s(tau)` with `A` given by `apply` and the
/// source sampled per grid interval `k` at fraction `theta`.
fn rk4<A, S>(n: usize, g: &Grid, substeps: usize, apply: A, source: S) -> Vec<Vec<f64>>
where
    A: Fn(&[f64], &mut [f64]),
    S: Fn(usize, f64, &mut [f64]),
{
    let dt = g.h / substeps as f64;
    let mut y = vec![0.0; n];
    let mut out = Vec::with_capacity(g.len);
    out.push(y.clone());
    let (mut k1, mut k2, mut k3, mut k4) = (vec![0.0; n], vec![0.0; n], vec![0.0; n], vec![0.0; n]);
    let mut tmp = vec![0.0; n];
    let mut src = vec![0.0; n];
    let rhs = |k: usize, theta: f64, y: &[f64], out: &mut [f64], src: &mut [f64]| {
        apply(y, out);
        src.iter_mut().for_each(|v| *v = 0.0);
        source(k, theta, src);
        for (o, s) in out.iter_mut().zip(src.iter()) {
            *o += s;
        }
    };
    for k in 0..g.len - 1 {
        for j in 0..substeps {
            let th0 = j as f64 / substeps as f64;
            let thm = (j as f64 + 0.5) / substeps as f64;
            let th1 = (j + 1) as f64 / substeps as f64;
            rhs(k, th0, &y, &mut k1, &mut src);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * dt * k1[i];
            }
            rhs(k, thm, &tmp, &mut k2, &mut src);
            for i in 0..n {
                tmp[i] = y[i] + 0.5 * dt * k2[i];
            }
            rhs(k, thm, &tmp, &mut k3, &mut src);
            for i in 0..n {
                tmp[i] = y[i] + dt * k3[i];
            }
            rhs(k, th1, &tmp, &mut k4, &mut src);
            for i in 0..n {
                y[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
            }
        }
        out.push(y.clone());
    }
    out
}

fn normwise_gap(a: &[f64], b: &[f64]) -> f64 {
    let scale = b.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let diff = a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs()));
    if scale > 0.0 { diff / scale } else { diff }
}

fn max_change(a: &[Vec<f64>], b: &[Vec<f64>]) -> f64 {
    a.iter().zip(b).map(|(x, y)| normwise_gap(x, y)).fold(0.0, f64::max)
}

#[inline]
fn lerp(v: &[f64], k: usize, theta: f64) -> f64 {
    v[k] + theta * (v[k + 1] - v[k])
}

/// Composite Simpson weights on the half grid `i h / 2`, `i = 0..=2m`, for
/// signals linear on each whole interval.
fn half_grid_weights(h: f64, m: usize) -> Vec<f64> {
    (0..=2 * m)
        .map(|i| {
            if i == 0 || i == 2 * m {
                h / 6.0
            } else if i % 2 == 0 {
                h / 3.0
            } else {
                2.0 * h / 3.0
            }
        })
        .collect()
}

#[inline]
fn half_value(v: &[f64], i: usize) -> f64 {
    if i % 2 == 0 { v[i / 2] } else { 0.5 * (v[i / 2] + v[i / 2 + 1]) }
}

/// Weighted symmetric neighbour list of the rate-two symmetrised walk.
fn hat_generator(model: &MomentModel) -> Result<TorusKernel> {
    TorusKernel::new(&symmetrize(&model.kernel), &model.geometry)
}

/// `f_x(t) = E xi_x(t)` from `xi(0) = 0`: RK4 on
/// `f' = L^(1)* f + gamma delta_0 P(xi_0 = 0)`, checked against the Duhamel form
/// `gamma int_0^t P(xi_0(s) = 0) p^_{0x}(t - s) ds`.
pub fn solve_first_moment(
    model: &MomentModel,
    signals: &InputSignals,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<MomentField> {
    let g = grid(signals, t_end, opts.dt)?;
    let geom = &model.geometry;
    let n = geom.num_sites();
    let hat = hat_generator(model)?;
    let entries: Vec<(Vec<usize>, f64)> = hat
        .entries()
        .iter()
        .map(|&(inc, p)| ((0..n).map(|x| geom.add(x, inc)).collect(), 2.0 * p))
        .collect();
    let apply = |f: &[f64], out: &mut [f64]| {
        for x in 0..n {
            let mut acc = 0.0;
            for (nb, w) in &entries {
                acc += w * (f[nb[x]] - f[x]);
            }
            out[x] = acc;
        }
    };
    let gamma = model.gamma;
    let vac = &signals.vacancy;
    let source = |k: usize, th: f64, s: &mut [f64]| s[0] = gamma * lerp(vac, k, th);
    let coarse = rk4(n, &g, g.substeps, apply, source);
    let fine = rk4(n, &g, 2 * g.substeps, apply, source);
    let refinement_change = max_change(&coarse, &fine);
    if refinement_change > REFINEMENT_TOL {
        return Err(Error::Unstable(format!(
            "halving dt changed the first moment by {refinement_change:.3e}; use a smaller dt"
        )));
    }
    let table = hat_table(&model.kernel, geom, g.h / 2.0, (g.len - 1) as f64 * g.h)?;
    let checks = check_indices(&g, opts);
    let mut gap = 0.0f64;
    for &m in &checks {
        let quad = first_moment_quadrature_fields(&table, vac, gamma, g.h, m);
        gap = gap.max(normwise_gap(&coarse[m], &quad));
    }
    if gap > CONSISTENCY_TOL {
        return Err(Error::Numerical(format!(
            "first moment: integrator and quadrature differ by {gap:.3e} (relative)"
        )));
    }
    Ok(MomentField {
        times: (0..g.len).map(|k| k as f64 * g.h).collect(),
        values: coarse,
        sites: n,
        pairs: false,
        quadrature_gap: gap,
        check_times: checks.iter().map(|&k| k as f64 * g.h).collect(),
        refinement_change,
    })
}

fn first_moment_quadrature_fields(
    table: &crate::kernel::TransitionTable,
    vacancy: &[f64],
    gamma: f64,
    h: f64,
    m: usize,
) -> Vec<f64> {
    let n = table.geometry().num_sites();
    let w = half_grid_weights(h, m);
    let mut out = vec![0.0; n];
    for (i, wi) in w.iter().enumerate() {
        let a = half_value(vacancy, i) * wi * gamma;
        if a == 0.0 {
            continue;
        }
        let field = table.field(2 * m - i);
        for (o, p) in out.iter_mut().zip(field) {
            *o += a * p;
        }
    }
    out
}

/// Duhamel quadrature of the first moment at the origin at grid time `t`,
/// for any vacancy path on the grid of `table` (step `2 h'`). Linear in the
/// path, so it also applies to single-replica indicator paths.
pub fn first_moment_quadrature(
    table: &crate::kernel::TransitionTable,
    vacancy: &[f64],
    gamma: f64,
    step: f64,
    t: f64,
    x: usize,
) -> Result<f64> {
    let m = (t / step).round() as usize;
    if (m as f64 * step - t).abs() > 1e-9 * t.max(1.0) || m >= vacancy.len() || 2 * m >= table.times().len() {
        return Err(Error::Config(format!("time {t} is not covered by the signal grid")));
    }
    let w = half_grid_weights(step, m);
    Ok(w.iter()
        .enumerate()
        .map(|(i, wi)| gamma * wi * half_value(vacancy, i) * table.field(2 * m - i)[x])
        .sum())
}

/// `f_{x,y}(t) = E[xi_x (xi_y - delta_xy)]` from `xi(0) = 0` on the squared
/// torus, checked against the pair-kernel Duhamel form.
pub fn solve_second_moment(
    model: &MomentModel,
    signals: &InputSignals,
    t_end: f64,
    opts: &SolveOptions,
) -> Result<MomentField> {
    let (lonely, cross) = match (&signals.lonely, &signals.cross) {
        (Some(l), Some(c)) => (l, c),
        _ => return Err(Error::Config("second moments need per-site lonely and cross signals".into())),
    };
    let g = grid(signals, t_end, opts.dt)?;
    let geom = &model.geometry;
    let n = geom.num_sites();
    if n.saturating_mul(n) > SECOND_MOMENT_STATE_CAP {
        return Err(Error::CapExceeded(format!(
            "{n}^2 pair states exceed the cap of {SECOND_MOMENT_STATE_CAP}"
        )));
    }
    let tk = TorusKernel::new(&model.kernel, geom)?;
    // For increment z with weight p_z the adjoint pulls from (x, y - z),
    // (x - z, y) and (x + z, y + z).
    let moves: Vec<(Vec<usize>, Vec<usize>, f64)> = tk
        .entries()
        .iter()
        .map(|&(inc, p)| {
            let minus = (0..n).map(|x| geom.sub(x, inc)).collect();
            let plus = (0..n).map(|x| geom.add(x, inc)).collect();
            (minus, plus, p)
        })
        .collect();
    let apply = |f: &[f64], out: &mut [f64]| {
        for x in 0..n {
            for y in 0..n {
                let c = f[x * n + y];
                let mut acc = 0.0;
                for (minus, plus, p) in &moves {
                    acc += p * (f[x * n + minus[y]] + f[minus[x] * n + y] + f[plus[x] * n + plus[y]] - 3.0 * c);
                }
                out[x * n + y] = acc;
            }
        }
    };
    let gamma = model.gamma;
    let source = |k: usize, th: f64, s: &mut [f64]| {
        for x in 1..n {
            s[x * n + x] += gamma * (lonely[k][x] + th * (lonely[k + 1][x] - lonely[k][x]));
        }
        for z in 1..n {
            let c = gamma * (cross[k][z] + th * (cross[k + 1][z] - cross[k][z]));
            s[z] += c;
            s[z * n] += c;
        }
    };
    let coarse = rk4(n * n, &g, g.substeps, apply, source);
    let fine = rk4(n * n, &g, 2 * g.substeps, apply, source);
    let refinement_change = max_change(&coarse, &fine);
    if refinement_change > REFINEMENT_TOL {
        return Err(Error::Unstable(format!(
            "halving dt changed the second moment by {refinement_change:.3e}; use a smaller dt"
        )));
    }
    let checks = check_indices(&g, opts);
    let t_max = (g.len - 1) as f64 * g.h;
    let half: Vec<f64> = (0..=2 * (g.len - 1)).map(|j| j as f64 * g.h / 2.0).collect();
    debug_assert!((half.last().unwrap() - t_max).abs() < 1e-9);
    let pairs = pair_transition_series(&model.kernel, geom, &half, SECOND_MOMENT_STATE_CAP)?;
    let mut gap = 0.0f64;
    for &m in &checks {
        let quad = second_moment_quadrature(&pairs, lonely, cross, gamma, g.h, m);
        gap = gap.max(normwise_gap(&coarse[m], &quad));
    }
    if gap > CONSISTENCY_TOL {
        return Err(Error::Numerical(format!(
            "second moment: integrator and quadrature differ by {gap:.3e} (relative)"
        )));
    }
    Ok(MomentField {
        times: (0..g.len).map(|k| k as f64 * g.h).collect(),
        values: coarse,
        sites: n,
        pairs: true,
        quadrature_gap: gap,
        check_times: checks.iter().map(|&k| k as f64 * g.h).collect(),
        refinement_change,
    })
}

fn second_moment_quadrature(
    pairs: &[PairField],
    lonely: &[Vec<f64>],
    cross: &[Vec<f64>],
    gamma: f64,
    h: f64,
    m: usize,
) -> Vec<f64> {
    let geom = pairs[0].geometry();
    let n = geom.num_sites();
    let w = half_grid_weights(h, m);
    let mut out = vec![0.0; n * n];
    let mut l = vec![0.0; n];
    let mut c = vec![0.0; n];
    for (i, wi) in w.iter().enumerate() {
        let field = &pairs[2 * m - i];
        for z in 1..n {
            let at = |v: &[Vec<f64>]| {
                if i % 2 == 0 { v[i / 2][z] } else { 0.5 * (v[i / 2][z] + v[i / 2 + 1][z]) }
            };
            l[z] = gamma * wi * at(lonely);
            c[z] = gamma * wi * at(cross);
        }
        for x in 0..n {
            for y in 0..n {
                let mut acc = 0.0;
                for z in 1..n {
                    let (xz, yz) = (geom.sub(x, z), geom.sub(y, z));
                    acc += l[z] * field.get(xz, yz) + c[z] * (field.get(x, yz) + field.get(xz, y));
                }
                out[x * n + y] += acc;
            }
        }
    }
    out
}
