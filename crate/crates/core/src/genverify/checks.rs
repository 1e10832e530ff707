use super::operator::{
    build_eta_generator, build_hat_generator, build_xi_generator, enriched_row, Harmonic,
};
use super::space::CappedStateSpace;
use crate::error::{Error, Result};
use crate::kernel::{transition_probs, JumpKernel, TorusKernel, TransitionTable};
use crate::sim::BranchRule;

fn harmonic_table(kernel: &JumpKernel, space: &CappedStateSpace, remaining: f64) -> Result<TransitionTable> {
    if !(remaining > 0.0) {
        return Err(Error::Domain(format!(
            "check times must lie strictly before the horizon (remaining {remaining})"
        )));
    }
    transition_probs(kernel, space.geometry(), 1.0, &[remaining])
}

/// Residuals of the first and second moment identities for the `xi`
/// generator, over interior configurations. The second uses the factorial
/// pair function `xi_x (xi_y - 1{x = y})`.
pub fn check_moment_identities(space: &CappedStateSpace, tk: &TorusKernel, gamma: f64) -> (f64, f64) {
    let l = build_xi_generator(space, tk, gamma);
    let g = space.geometry();
    let n = g.num_sites();
    let mut r1 = 0.0f64;
    let mut r2 = 0.0f64;
    for i in 0..space.len() {
        if !l.is_interior(i) {
            continue;
        }
        let c = space.config(i);
        let v = |x: usize| c[x] as f64;
        let empty0 = if c[0] == 0 { 1.0 } else { 0.0 };
        for x in 0..n {
            let lhs = l.apply_row(i, |j| space.config(j)[x] as f64);
            let mut rhs = 0.0;
            for &(e, p) in tk.entries() {
                rhs += p * (v(g.add(x, e)) - v(x)) + p * (v(g.sub(x, e)) - v(x));
            }
            if x == 0 {
                rhs += gamma * empty0;
            }
            r1 = r1.max((lhs - rhs).abs());
        }
        let pair = |x: usize, y: usize| v(x) * (v(y) - if x == y { 1.0 } else { 0.0 });
        for x in 0..n {
            for y in 0..n {
                let lhs = l.apply_row(i, |j| {
                    let d = space.config(j);
                    d[x] as f64 * (d[y] as f64 - if x == y { 1.0 } else { 0.0 })
                });
                let mut rhs = 0.0;
                for &(e, p) in tk.entries() {
                    rhs += p
                        * (pair(x, g.sub(y, e)) + pair(g.sub(x, e), y) + pair(g.add(x, e), g.add(y, e))
                            - 3.0 * pair(x, y));
                }
                if x == y && x != 0 && c[x] == 1 {
                    rhs += gamma;
                }
                if x == 0 {
                    rhs += gamma * empty0 * v(y);
                }
                if y == 0 {
                    rhs += gamma * empty0 * v(x);
                }
                r2 = r2.max((lhs - rhs).abs());
            }
        }
    }
    (r1, r2)
}

/// Largest `|L h + d/dt h|` over interior configurations at each time.
pub fn check_h_harmonic(
    space: &CappedStateSpace,
    kernel: &JumpKernel,
    rule: &BranchRule,
    x0: usize,
    horizon: f64,
    times: &[f64],
) -> Result<f64> {
    let tk = TorusKernel::new(kernel, space.geometry())?;
    let l = build_eta_generator(space, &tk, rule);
    let mut worst = 0.0f64;
    for &t in times {
        let table = harmonic_table(kernel, space, horizon - t)?;
        let hm = Harmonic { table: &table, kernel: &tk, slot: 0, x0 };
        let h: Vec<f64> = space.configs().iter().map(|c| hm.h(c)).collect();
        for i in 0..space.len() {
            if l.is_interior(i) {
                let r = l.apply_row(i, |j| h[j]) + hm.dh_dt(space.config(i));
                worst = worst.max(r.abs());
            }
        }
    }
    Ok(worst)
}

/// Largest `|sum_x eta_x s_x - 1|` over nonempty configurations.
pub fn check_s_normalization(
    space: &CappedStateSpace,
    kernel: &JumpKernel,
    x0: usize,
    horizon: f64,
    times: &[f64],
) -> Result<f64> {
    let tk = TorusKernel::new(kernel, space.geometry())?;
    let mut worst = 0.0f64;
    for &t in times {
        let table = harmonic_table(kernel, space, horizon - t)?;
        let hm = Harmonic { table: &table, kernel: &tk, slot: 0, x0 };
        for c in space.configs() {
            if CappedStateSpace::total(c) == 0 {
                continue;
            }
            let s: f64 = (0..c.len()).map(|x| c[x] as f64 * hm.s(c, x)).sum();
            worst = worst.max((s - 1.0).abs());
        }
    }
    Ok(worst)
}

/// Compares `(L + d/dt)(h f) / h` with the explicit tilted generator applied
/// to time-independent test functions `fs`.
pub fn check_hat_generator(
    space: &CappedStateSpace,
    kernel: &JumpKernel,
    rule: &BranchRule,
    x0: usize,
    horizon: f64,
    times: &[f64],
    fs: &[Vec<f64>],
) -> Result<f64> {
    let tk = TorusKernel::new(kernel, space.geometry())?;
    let l = build_eta_generator(space, &tk, rule);
    let mut worst = 0.0f64;
    for &t in times {
        let table = harmonic_table(kernel, space, horizon - t)?;
        let hm = Harmonic { table: &table, kernel: &tk, slot: 0, x0 };
        let hat = build_hat_generator(space, &tk, rule, &hm, t);
        let h: Vec<f64> = space.configs().iter().map(|c| hm.h(c)).collect();
        for f in fs {
            for i in 0..space.len() {
                if !l.is_interior(i) || h[i] == 0.0 {
                    continue;
                }
                let c = space.config(i);
                let lhs = (l.apply_row(i, |j| h[j] * f[j]) + f[i] * hm.dh_dt(c)) / h[i];
                let rhs = hat.apply_row(i, |j| f[j]);
                worst = worst.max((lhs - rhs).abs());
            }
        }
    }
    Ok(worst)
}

/// Checks `sum_z alpha_t(eta, z) (L~_t f)(eta, z) = (L^_t + d/dt) g(eta)` for
/// `f(xi, z) = f1(xi) 1{z = z0}` at every `z0`, with `alpha_t(eta, z) =
/// eta_z s_z` and `g = f1 eta_{z0} s_{z0}`.
pub fn check_intertwining(
    space: &CappedStateSpace,
    kernel: &JumpKernel,
    gamma: f64,
    x0: usize,
    horizon: f64,
    times: &[f64],
    fs: &[Vec<f64>],
) -> Result<f64> {
    intertwining_residual(space, kernel, gamma, x0, horizon, times, fs, gamma)
}

#[allow(clippy::too_many_arguments)]
pub(crate) fn intertwining_residual(
    space: &CappedStateSpace,
    kernel: &JumpKernel,
    gamma: f64,
    x0: usize,
    horizon: f64,
    times: &[f64],
    fs: &[Vec<f64>],
    selected_birth: f64,
) -> Result<f64> {
    let tk = TorusKernel::new(kernel, space.geometry())?;
    let rule = BranchRule::lonely(gamma);
    let l = build_eta_generator(space, &tk, &rule);
    let n = space.geometry().num_sites();
    let mut worst = 0.0f64;
    for &t in times {
        let table = harmonic_table(kernel, space, horizon - t)?;
        let hm = Harmonic { table: &table, kernel: &tk, slot: 0, x0 };
        let hat = build_hat_generator(space, &tk, &rule, &hm, t);
        let h: Vec<f64> = space.configs().iter().map(|c| hm.h(c)).collect();
        let dp: Vec<f64> = (0..n).map(|z| -hm.dp_ds(z)).collect();
        for i in 0..space.len() {
            let c = space.config(i);
            if !l.is_interior(i) || h[i] == 0.0 {
                continue;
            }
            let rows: Option<Vec<_>> = (0..n)
                .filter(|&z| c[z] > 0)
                .map(|z| enriched_row(space, &tk, gamma, &hm, c, z, selected_birth).map(|r| (z, r)))
                .collect();
            let Some(rows) = rows else { continue };
            let dh = hm.dh_dt(c);
            for z0 in 0..n {
                for f1 in fs {
                    let f = |j: usize, z: usize| if z == z0 { f1[j] } else { 0.0 };
                    let mut lhs = 0.0;
                    for (z, row) in &rows {
                        let alpha = c[*z] as f64 * hm.p(*z) / h[i];
                        let here = f(i, *z);
                        let lf: f64 = row.iter().map(|&((j, zz), r)| r * (f(j, zz) - here)).sum();
                        lhs += alpha * lf;
                    }
                    let g = |j: usize| {
                        let k = space.config(j)[z0] as f64;
                        if k == 0.0 { 0.0 } else { f1[j] * k * hm.p(z0) / h[j] }
                    };
                    let ds = dp[z0] / h[i] - hm.p(z0) * dh / (h[i] * h[i]);
                    let rhs = hat.apply_row(i, g) + f1[i] * c[z0] as f64 * ds;
                    worst = worst.max((lhs - rhs).abs());
                }
            }
        }
    }
    Ok(worst)
}
