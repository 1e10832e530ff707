use rustfft::num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::fft::forward_nd;
use super::{JumpKernel, Site, TorusGeometry, TorusKernel};
use crate::error::{Error, Result};
use crate::quad;

/// Negative Fourier round-off above this is clipped to zero.
pub const CLIP_TOL: f64 = 1e-12;
/// Allowed deviation of a field's total mass from one.
pub const NORM_TOL: f64 = 1e-9;
/// Default cap on `L^{2d}` for pair fields.
pub const DEFAULT_PAIR_STATE_CAP: usize = 1_000_000;

/// `p_{0,.}(t)` over the torus on a time grid; `p_{xy}(t) = p_{0,y-x}(t)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TransitionTable {
    geometry: TorusGeometry,
    kernel: JumpKernel,
    rate: f64,
    times: Vec<f64>,
    fields: Vec<Vec<f64>>,
}

impl TransitionTable {
    pub(crate) fn from_parts(
        geometry: TorusGeometry,
        kernel: JumpKernel,
        rate: f64,
        times: Vec<f64>,
        fields: Vec<Vec<f64>>,
    ) -> Self {
        Self {
            geometry,
            kernel,
            rate,
            times,
            fields,
        }
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn kernel(&self) -> &JumpKernel {
        &self.kernel
    }

    pub fn rate(&self) -> f64 {
        self.rate
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn fields(&self) -> &[Vec<f64>] {
        &self.fields
    }

    pub fn field(&self, index: usize) -> &[f64] {
        &self.fields[index]
    }

    pub fn time_index(&self, t: f64) -> Option<usize> {
        let tol = 1e-12 * t.abs().max(1.0);
        let i = self.times.partition_point(|&s| s < t - tol);
        (i < self.times.len() && (self.times[i] - t).abs() <= tol).then_some(i)
    }

    pub fn field_at(&self, t: f64) -> Result<&[f64]> {
        self.time_index(t)
            .map(|i| self.field(i))
            .ok_or_else(|| Error::Config(format!("time {t} is not on the table grid")))
    }

    /// `p_{from,to}` at grid index `i`.
    #[inline]
    pub fn prob(&self, i: usize, from: Site, to: Site) -> f64 {
        self.fields[i][self.geometry.sub(to, from)]
    }

    /// `p_{0,0}` along the grid.
    pub fn return_probs(&self) -> Vec<f64> {
        self.fields.iter().map(|f| f[0]).collect()
    }

    /// Pointwise check of `p_{0,z}(v) <= p_0(v) <= p_0(u)` for `u <= v` on the grid.
    pub fn satisfies_return_monotonicity(&self, tol: f64) -> bool {
        let diag_ok = self
            .fields
            .iter()
            .all(|f| f.iter().all(|&v| v <= f[0] + tol));
        let mono_ok = self
            .fields
            .windows(2)
            .all(|w| w[1][0] <= w[0][0] + tol);
        diag_ok && mono_ok
    }
}

fn characteristic(tk: &TorusKernel) -> Vec<Complex64> {
    let geom = tk.geometry();
    let sides = geom.sides();
    let offsets: Vec<(Vec<usize>, f64)> = tk
        .entries()
        .iter()
        .map(|&(s, p)| (geom.coords(s), p))
        .collect();
    (0..geom.num_sites())
        .map(|k| {
            let kc = geom.coords(k);
            offsets
                .iter()
                .map(|(o, p)| {
                    let phase: f64 = kc
                        .iter()
                        .zip(o)
                        .zip(sides)
                        .map(|((&ki, &oi), &l)| (ki * oi % l) as f64 / l as f64)
                        .sum();
                    Complex64::from_polar(*p, 2.0 * std::f64::consts::PI * phase)
                })
                .sum()
        })
        .collect()
}

fn finish_field(mut spectrum: Vec<Complex64>, shape: &[usize], what: &str) -> Result<Vec<f64>> {
    let n = spectrum.len() as f64;
    forward_nd(&mut spectrum, shape);
    let mut total = 0.0;
    let mut out = Vec::with_capacity(spectrum.len());
    for c in spectrum {
        let v = c.re / n;
        if v < -CLIP_TOL {
            return Err(Error::Numerical(format!(
                "{what}: negative probability {v:e} beyond round-off"
            )));
        }
        let v = v.max(0.0);
        total += v;
        out.push(v);
    }
    if (total - 1.0).abs() > NORM_TOL {
        return Err(Error::Numerical(format!("{what}: total mass {total}")));
    }
    Ok(out)
}

/// Transition fields of the rate-`rate` walk with `kernel` on `geom` by
/// Fourier inversion of `exp(-rate t (1 - phi(k)))`.
pub fn transition_probs(
    kernel: &JumpKernel,
    geom: &TorusGeometry,
    rate: f64,
    times: &[f64],
) -> Result<TransitionTable> {
    if times.is_empty() {
        return Err(Error::Config("empty time list".into()));
    }
    if !(rate > 0.0 && rate.is_finite()) {
        return Err(Error::Config(format!("rate {rate} must be positive")));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::Config("times must be finite and nonnegative".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("times must be sorted".into()));
    }
    let tk = TorusKernel::new(kernel, geom)?;
    let phi = characteristic(&tk);
    let fields = times
        .iter()
        .map(|&t| {
            if t == 0.0 {
                let mut f = vec![0.0; geom.num_sites()];
                f[0] = 1.0;
                return Ok(f);
            }
            let spectrum = phi.iter().map(|&c| ((c - 1.0) * rate * t).exp()).collect();
            finish_field(spectrum, geom.sides(), "transition field")
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TransitionTable {
        geometry: geom.clone(),
        kernel: kernel.clone(),
        rate,
        times: times.to_vec(),
        fields,
    })
}

/// Joint law of `(Y - Y0, Y' - Y0)` for three independent rate-1 walks with
/// the same kernel, started at the origin, at one time.
#[derive(Debug, Clone, PartialEq)]
pub struct PairField {
    geometry: TorusGeometry,
    time: f64,
    values: Vec<f64>,
}

impl PairField {
    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn time(&self) -> f64 {
        self.time
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// `p^(2)_{(0,0),(w,z)}`.
    #[inline]
    pub fn get(&self, w: Site, z: Site) -> f64 {
        self.values[w * self.geometry.num_sites() + z]
    }

    /// `p^(2)_{(a,b),(w,z)}` by translation invariance.
    #[inline]
    pub fn between(&self, from: (Site, Site), to: (Site, Site)) -> f64 {
        let g = &self.geometry;
        self.get(g.sub(to.0, from.0), g.sub(to.1, from.1))
    }

    pub fn first_marginal(&self) -> Vec<f64> {
        let n = self.geometry.num_sites();
        self.values.chunks(n).map(|row| row.iter().sum()).collect()
    }

    pub fn second_marginal(&self) -> Vec<f64> {
        let n = self.geometry.num_sites();
        let mut out = vec![0.0; n];
        for row in self.values.chunks(n) {
            for (o, v) in out.iter_mut().zip(row) {
                *o += v;
            }
        }
        out
    }

    pub fn diagonal_sum(&self) -> f64 {
        (0..self.geometry.num_sites()).map(|z| self.get(z, z)).sum()
    }
}

/// Pair fields at several times, sharing one spectrum computation.
pub fn pair_transition_series(
    kernel: &JumpKernel,
    geom: &TorusGeometry,
    times: &[f64],
    state_cap: usize,
) -> Result<Vec<PairField>> {
    let n = geom.num_sites();
    if n.saturating_mul(n) > state_cap {
        return Err(Error::CapExceeded(format!(
            "pair field needs {n}^2 states, cap is {state_cap}"
        )));
    }
    if times.iter().any(|t| !(*t >= 0.0 && t.is_finite())) {
        return Err(Error::Config("times must be finite and nonnegative".into()));
    }
    let tk = TorusKernel::new(kernel, geom)?;
    let phi = characteristic(&tk);
    let mut exponent = Vec::with_capacity(n * n);
    for k in 0..n {
        for l in 0..n {
            let kl = geom.neg(geom.add(k, l));
            exponent.push(phi[k] + phi[l] + phi[kl] - 3.0);
        }
    }
    let mut shape = geom.sides().to_vec();
    shape.extend_from_slice(geom.sides());
    times
        .iter()
        .map(|&t| {
            let values = if t == 0.0 {
                let mut v = vec![0.0; n * n];
                v[0] = 1.0;
                v
            } else {
                let spectrum = exponent.iter().map(|&e| (e * t).exp()).collect();
                finish_field(spectrum, &shape, "pair field")?
            };
            Ok(PairField {
                geometry: geom.clone(),
                time: t,
                values,
            })
        })
        .collect()
}

pub fn pair_transition(
    kernel: &JumpKernel,
    geom: &TorusGeometry,
    t: f64,
    state_cap: usize,
) -> Result<PairField> {
    Ok(pair_transition_series(kernel, geom, &[t], state_cap)?.remove(0))
}

/// `G(t) = int_0^t p_0(s) ds` by composite Simpson on the table grid.
pub fn green_integral(table: &TransitionTable, t: f64, dt: f64) -> Result<f64> {
    if !table.kernel().is_symmetric() {
        return Err(Error::Config(
            "green integral expects a table of the symmetrised kernel".into(),
        ));
    }
    if !(t >= 0.0) || !(dt > 0.0) {
        return Err(Error::Config("need t >= 0 and dt > 0".into()));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let times = table.times();
    if times[0] != 0.0 || *times.last().unwrap() < t * (1.0 - 1e-12) {
        return Err(Error::Config(format!(
            "table grid [{}, {}] does not cover [0, {t}]",
            times[0],
            times.last().unwrap()
        )));
    }
    let tol = 1e-12 * t.max(1.0);
    let upto = times.partition_point(|&s| s <= t + tol);
    let last_needed = (upto + 1).min(times.len());
    if let Some(w) = times[..last_needed]
        .windows(2)
        .find(|w| w[1] - w[0] > dt * (1.0 + 1e-9))
    {
        return Err(Error::Config(format!(
            "table spacing {} exceeds dt = {dt}",
            w[1] - w[0]
        )));
    }
    let p0 = table.return_probs();
    let mut acc = quad::simpson(&times[..upto], &p0[..upto]);
    let t_last = times[upto - 1];
    if t - t_last > tol {
        // Partial interval [t_last, t] from the quadratic through three nearby nodes.
        if times.len() < 3 {
            let (a, b) = (upto - 1, upto);
            let w = (t - times[a]) / (times[b] - times[a]);
            let pt = p0[a] * (1.0 - w) + p0[b] * w;
            acc += 0.5 * (t - times[a]) * (p0[a] + pt);
        } else {
            let j = (upto - 1).saturating_sub(1).min(times.len() - 3);
            acc += quad::quadratic_segment(
                [times[j], times[j + 1], times[j + 2]],
                [p0[j], p0[j + 1], p0[j + 2]],
                t_last,
                t,
            );
        }
    }
    Ok(acc)
}

/// Jump rates of the selected particle at `z` and time `t` when it is
/// conditioned to sit at `x0` at time `horizon`:
/// `p_{zy} p_{y,x0}(T-t) / p_{z,x0}(T-t)`.
pub fn bridge_rates(
    table: &TransitionTable,
    kernel: &TorusKernel,
    z: Site,
    t: f64,
    horizon: f64,
    x0: Site,
) -> Result<Vec<(Site, f64)>> {
    if !(t < horizon) {
        return Err(Error::Domain(format!(
            "bridge rates need t < T (t = {t}, T = {horizon})"
        )));
    }
    let remaining = horizon - t;
    let i = table.time_index(remaining).ok_or_else(|| {
        Error::Config(format!("remaining time {remaining} is not on the table grid"))
    })?;
    let denom = table.prob(i, z, x0);
    if !(denom > f64::MIN_POSITIVE) {
        return Err(Error::Numerical(format!(
            "p_(z,x0)({remaining}) = {denom:e} underflows; shrink the horizon or refine the table"
        )));
    }
    let geom = table.geometry();
    Ok(kernel
        .entries()
        .iter()
        .map(|&(inc, p)| {
            let y = geom.add(z, inc);
            (y, p * table.prob(i, y, x0) / denom)
        })
        .collect())
}

/// Side length rule of thumb `12 sigma sqrt(2T) + 2 max|offset|`.
pub fn recommended_side(kernel: &JumpKernel, horizon: f64) -> usize {
    let sigma = kernel.max_coordinate_std();
    let side = 12.0 * sigma * (2.0 * horizon).sqrt() + 2.0 * kernel.max_offset() as f64;
    (side.ceil() as usize).max(3)
}

fn poisson_pmf(mean: f64, n: u64) -> f64 {
    if mean == 0.0 {
        return if n == 0 { 1.0 } else { 0.0 };
    }
    let mut log_fact = 0.0;
    for i in 2..=n {
        log_fact += (i as f64).ln();
    }
    (n as f64 * mean.ln() - mean - log_fact).exp()
}

/// Upper bound (union over axes) on the probability that the unwrapped
/// displacement of the rate-`rate` walk reaches half a side by `horizon`.
///
/// Exact per axis via uniformisation when affordable; otherwise falls back to
/// Chebyshev's inequality.
pub fn displacement_tail_mass(
    kernel: &JumpKernel,
    geom: &TorusGeometry,
    rate: f64,
    horizon: f64,
) -> Result<f64> {
    if kernel.dimension() != geom.dimension() {
        return Err(Error::InvalidGeometry("dimension mismatch".into()));
    }
    let mean_jumps = rate * horizon;
    let m = kernel.max_offset().max(1);
    let n_max = (mean_jumps + 12.0 * mean_jumps.sqrt() + 30.0).ceil() as u64;
    let mut total = 0.0;
    for (axis, &side) in geom.sides().iter().enumerate() {
        let threshold = side.div_ceil(2) as i64;
        let marginal: Vec<(i64, f64)> = kernel
            .support()
            .iter()
            .map(|(o, p)| (o[axis], *p))
            .collect();
        if n_max > 3000 {
            let mu: f64 = marginal.iter().map(|(o, p)| *o as f64 * p).sum();
            let second: f64 = marginal.iter().map(|(o, p)| (*o as f64).powi(2) * p).sum();
            let mean = mean_jumps * mu;
            let var = mean_jumps * second;
            let a = threshold as f64 - mean.abs();
            total += if a > 0.0 { (var / (a * a)).min(1.0) } else { 1.0 };
            continue;
        }
        let width = (2 * n_max as i64 * m + 1) as usize;
        let centre = n_max as i64 * m;
        let mut dist = vec![0.0; width];
        dist[centre as usize] = 1.0;
        let mut lo = centre;
        let mut hi = centre;
        let mut tail = 0.0;
        let mut mass_seen = 0.0;
        for n in 0..=n_max {
            let w = poisson_pmf(mean_jumps, n);
            mass_seen += w;
            let beyond: f64 = (lo..=hi)
                .filter(|&i| (i - centre).abs() >= threshold)
                .map(|i| dist[i as usize])
                .sum();
            tail += w * beyond;
            if n == n_max {
                break;
            }
            let mut next = vec![0.0; width];
            for i in lo..=hi {
                let v = dist[i as usize];
                if v == 0.0 {
                    continue;
                }
                for &(o, p) in &marginal {
                    next[(i + o) as usize] += v * p;
                }
            }
            dist = next;
            lo = (lo - m).max(0);
            hi = (hi + m).min(width as i64 - 1);
        }
        total += tail + (1.0 - mass_seen).max(0.0);
    }
    Ok(total.min(1.0))
}
