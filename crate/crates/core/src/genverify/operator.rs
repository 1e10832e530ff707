use super::space::{minus, moved, plus, shifted, CappedStateSpace, Config};
use crate::kernel::{TorusKernel, TransitionTable};
use crate::sim::BranchRule;

/// Sparse generator restricted to a capped space. Rows whose transitions
/// leave the space are flagged as boundary rows.
#[derive(Debug, Clone)]
pub struct OperatorMatrix {
    pub name: String,
    pub time: Option<f64>,
    rows: Vec<Vec<(usize, f64)>>,
    interior: Vec<bool>,
}

impl OperatorMatrix {
    fn build<F>(space: &CappedStateSpace, name: &str, time: Option<f64>, transitions: F) -> Self
    where
        F: Fn(&Config, &mut dyn FnMut(Config, f64)),
    {
        let mut rows = Vec::with_capacity(space.len());
        let mut interior = Vec::with_capacity(space.len());
        for (i, c) in space.configs().iter().enumerate() {
            let mut row: Vec<(usize, f64)> = Vec::new();
            let mut inside = true;
            let mut diag = 0.0;
            transitions(c, &mut |to, rate| {
                if rate == 0.0 || &to == c {
                    return;
                }
                match space.index_of(&to) {
                    Some(j) => {
                        match row.iter_mut().find(|e| e.0 == j) {
                            Some(e) => e.1 += rate,
                            None => row.push((j, rate)),
                        }
                        diag -= rate;
                    }
                    None => inside = false,
                }
            });
            row.push((i, diag));
            rows.push(row);
            interior.push(inside);
        }
        Self {
            name: name.into(),
            time,
            rows,
            interior,
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn is_interior(&self, i: usize) -> bool {
        self.interior[i]
    }

    pub fn row(&self, i: usize) -> &[(usize, f64)] {
        &self.rows[i]
    }

    pub fn entry(&self, i: usize, j: usize) -> f64 {
        self.rows[i].iter().find(|e| e.0 == j).map_or(0.0, |e| e.1)
    }

    /// `(A f)(i)`; meaningful on interior rows.
    pub fn apply_row(&self, i: usize, f: impl Fn(usize) -> f64) -> f64 {
        self.rows[i].iter().map(|&(j, a)| a * f(j)).sum()
    }

    /// Largest `|row sum|` over interior rows and smallest off-diagonal entry.
    pub fn generator_defects(&self) -> (f64, f64) {
        let mut worst_sum = 0.0f64;
        let mut min_off = f64::INFINITY;
        for (i, row) in self.rows.iter().enumerate() {
            if self.interior[i] {
                worst_sum = worst_sum.max(row.iter().map(|e| e.1).sum::<f64>().abs());
            }
            for &(j, a) in row {
                if j != i {
                    min_off = min_off.min(a);
                }
            }
        }
        (worst_sum, min_off)
    }
}

/// Generator of the particle system `eta` with branching rule `rule`.
pub fn build_eta_generator(space: &CappedStateSpace, kernel: &TorusKernel, rule: &BranchRule) -> OperatorMatrix {
    let geom = space.geometry().clone();
    let n = geom.num_sites();
    OperatorMatrix::build(space, "eta", None, |c, emit| {
        for x in 0..n {
            let k = c[x];
            if k == 0 {
                continue;
            }
            for &(inc, p) in kernel.entries() {
                emit(moved(c, x, geom.add(x, inc)), k as f64 * p);
            }
            let b = rule.rate(k as u32);
            if b > 0.0 {
                emit(plus(c, x), 0.5 * b);
                emit(minus(c, x), 0.5 * b);
            }
        }
    })
}

/// Generator of the source-frame process `xi`: walks, lonely branching off
/// the origin, immigration at an empty origin, and shifts.
pub fn build_xi_generator(space: &CappedStateSpace, kernel: &TorusKernel, gamma: f64) -> OperatorMatrix {
    let geom = space.geometry().clone();
    let n = geom.num_sites();
    OperatorMatrix::build(space, "xi", None, |c, emit| {
        for x in 0..n {
            if c[x] == 0 {
                continue;
            }
            for &(inc, p) in kernel.entries() {
                emit(moved(c, x, geom.add(x, inc)), c[x] as f64 * p);
            }
            if x != 0 && c[x] == 1 {
                emit(plus(c, x), 0.5 * gamma);
                emit(minus(c, x), 0.5 * gamma);
            }
        }
        if c[0] == 0 {
            emit(plus(c, 0), gamma);
        }
        for &(inc, p) in kernel.entries() {
            emit(shifted(&geom, c, inc), p);
        }
    })
}

/// `p_{x,x0}(s)` and its derivative in `s` from the backward equation.
pub(crate) struct Harmonic<'a> {
    pub table: &'a TransitionTable,
    pub kernel: &'a TorusKernel,
    pub slot: usize,
    pub x0: usize,
}

impl Harmonic<'_> {
    #[inline]
    pub fn p(&self, x: usize) -> f64 {
        self.table.prob(self.slot, x, self.x0)
    }

    /// `d/ds p_{x,x0}(s) = sum_u p_{xu} (p_{u,x0}(s) - p_{x,x0}(s))`.
    pub fn dp_ds(&self, x: usize) -> f64 {
        let g = self.table.geometry();
        let px = self.p(x);
        self.kernel
            .entries()
            .iter()
            .map(|&(inc, q)| q * (self.p(g.add(x, inc)) - px))
            .sum()
    }

    pub fn h(&self, c: &Config) -> f64 {
        c.iter().enumerate().map(|(x, &k)| k as f64 * self.p(x)).sum()
    }

    /// `d/dt h(eta, t)` with `s = T - t`.
    pub fn dh_dt(&self, c: &Config) -> f64 {
        -c.iter()
            .enumerate()
            .map(|(x, &k)| k as f64 * self.dp_ds(x))
            .sum::<f64>()
    }

    pub fn s(&self, c: &Config, x: usize) -> f64 {
        self.p(x) / self.h(c)
    }
}

/// The h-transformed generator in explicit form (jump tilting by `s_x` and
/// branching weights `1 +/- s_x`), without the time-derivative term.
pub(crate) fn build_hat_generator(
    space: &CappedStateSpace,
    kernel: &TorusKernel,
    rule: &BranchRule,
    hm: &Harmonic<'_>,
    time: f64,
) -> OperatorMatrix {
    let geom = space.geometry().clone();
    let n = geom.num_sites();
    OperatorMatrix::build(space, "eta-hat", Some(time), |c, emit| {
        if SpaceTotal::is_zero(c) {
            return;
        }
        let h = hm.h(c);
        for x in 0..n {
            let k = c[x];
            if k == 0 {
                continue;
            }
            let sx = hm.p(x) / h;
            for &(inc, p) in kernel.entries() {
                let y = geom.add(x, inc);
                let tilt = 1.0 - sx + sx * hm.p(y) / hm.p(x);
                emit(moved(c, x, y), k as f64 * p * tilt);
            }
            let b = rule.rate(k as u32);
            if b > 0.0 {
                emit(plus(c, x), 0.5 * b * (1.0 + sx));
                emit(minus(c, x), 0.5 * b * (1.0 - sx));
            }
        }
    })
}

struct SpaceTotal;

impl SpaceTotal {
    fn is_zero(c: &Config) -> bool {
        c.iter().all(|&v| v == 0)
    }
}

/// Rows of the enriched generator acting on `f(xi, z)`: each entry is
/// `((config index, selected site), rate)`; `None` when a transition leaves
/// the space.
pub(crate) fn enriched_row(
    space: &CappedStateSpace,
    kernel: &TorusKernel,
    gamma: f64,
    hm: &Harmonic<'_>,
    c: &Config,
    z: usize,
    selected_birth: f64,
) -> Option<Vec<((usize, usize), f64)>> {
    let geom = space.geometry();
    let n = geom.num_sites();
    let mut out = Vec::new();
    let mut ok = true;
    let mut push = |cfg: Config, sel: usize, rate: f64| {
        if rate == 0.0 {
            return;
        }
        match space.index_of(&cfg) {
            Some(j) => out.push(((j, sel), rate)),
            None => ok = false,
        }
    };
    for x in 0..n {
        let others = c[x] as f64 - if x == z { 1.0 } else { 0.0 };
        if others > 0.0 {
            for &(inc, p) in kernel.entries() {
                let y = geom.add(x, inc);
                if y != x {
                    push(moved(c, x, y), z, others * p);
                }
            }
        }
    }
    let pz = hm.p(z);
    for &(inc, p) in kernel.entries() {
        let y = geom.add(z, inc);
        if y != z {
            push(moved(c, z, y), y, p * hm.p(y) / pz);
        }
    }
    for x in 0..n {
        if x != z && c[x] == 1 {
            push(plus(c, x), z, 0.5 * gamma);
            push(minus(c, x), z, 0.5 * gamma);
        }
    }
    if c[z] == 1 {
        push(plus(c, z), z, selected_birth);
    }
    ok.then_some(out)
}
