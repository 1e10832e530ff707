use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{bridge_rates, transition_probs, JumpKernel, Site, TorusGeometry, TorusKernel, TransitionTable};

pub const DEFAULT_REJECTION_BUDGET: u64 = 1_000_000;

/// Path of the selected particle on `[0, T]`.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BridgePath {
    pub start: Site,
    pub end: Site,
    pub horizon: f64,
    /// `(time, position after the jump)`, times increasing in `(0, T)`.
    pub jumps: Vec<(f64, Site)>,
}

impl BridgePath {
    pub fn position_at(&self, t: f64) -> Site {
        let i = self.jumps.partition_point(|&(s, _)| s <= t);
        if i == 0 {
            self.start
        } else {
            self.jumps[i - 1].1
        }
    }

    /// Torus increments of the successive jumps.
    pub fn increments(&self, geometry: &TorusGeometry) -> Vec<Site> {
        let mut prev = self.start;
        self.jumps
            .iter()
            .map(|&(_, s)| {
                let d = geometry.sub(s, prev);
                prev = s;
                d
            })
            .collect()
    }
}

/// Exact bridge from `y` to `x` over `[0, T]` by rejection: run free rate-one
/// walks from `y` until one ends at `x`.
pub fn sample_bridge<R: Rng + ?Sized>(
    kernel: &TorusKernel,
    y: Site,
    x: Site,
    horizon: f64,
    rng: &mut R,
    budget: u64,
) -> Result<BridgePath> {
    if !(horizon > 0.0 && horizon.is_finite()) {
        return Err(Error::Domain(format!("bridge horizon must be > 0, got {horizon}")));
    }
    let mut jumps = Vec::new();
    for _ in 0..budget {
        jumps.clear();
        let mut t = 0.0;
        let mut pos = y;
        loop {
            let e: f64 = Exp1.sample(rng);
            t += e;
            if t >= horizon {
                break;
            }
            pos = kernel.step(pos, kernel.pick(rng.random()));
            jumps.push((t, pos));
        }
        if pos == x {
            return Ok(BridgePath {
                start: y,
                end: x,
                horizon,
                jumps,
            });
        }
    }
    Err(Error::RejectionBudget {
        budget,
        hint: "endpoint too unlikely; use a smaller torus, a shorter horizon, or a larger budget".into(),
    })
}

/// Approximate bridge sampler driven by the conditioned jump rates, held
/// constant on each cell of a uniform grid and evaluated at cell midpoints.
/// Only used to cross-check [`sample_bridge`] away from the horizon.
#[derive(Debug, Clone)]
pub struct RateBridge {
    kernel: TorusKernel,
    table: TransitionTable,
    horizon: f64,
    target: Site,
    cell: f64,
    cells: usize,
}

impl RateBridge {
    pub fn new(
        kernel: &JumpKernel,
        geometry: &TorusGeometry,
        target: Site,
        horizon: f64,
        stop: f64,
        cell: f64,
    ) -> Result<Self> {
        if !(0.0 < stop && stop < horizon && cell > 0.0) {
            return Err(Error::Domain("need 0 < stop < horizon and cell > 0".into()));
        }
        let cells = (stop / cell).round() as usize;
        if cells == 0 || ((cells as f64) * cell - stop).abs() > 1e-9 {
            return Err(Error::Config("stop must be a multiple of the cell width".into()));
        }
        let mut remaining: Vec<f64> = (0..cells)
            .map(|i| horizon - (i as f64 + 0.5) * cell)
            .collect();
        remaining.reverse();
        let table = transition_probs(kernel, geometry, 1.0, &remaining)?;
        Ok(Self {
            kernel: TorusKernel::new(kernel, geometry)?,
            table,
            horizon,
            target,
            cell,
            cells,
        })
    }

    /// Path on `[0, stop]` started from `y`.
    pub fn sample<R: Rng + ?Sized>(&self, y: Site, rng: &mut R) -> Result<BridgePath> {
        let mut jumps = Vec::new();
        let mut pos = y;
        for i in 0..self.cells {
            let a = i as f64 * self.cell;
            let b = a + self.cell;
            let mid = a + 0.5 * self.cell;
            let mut rates = bridge_rates(&self.table, &self.kernel, pos, mid, self.horizon, self.target)?;
            let mut t = a;
            loop {
                let total: f64 = rates.iter().map(|r| r.1).sum();
                let e: f64 = Exp1.sample(rng);
                t += e / total;
                if t >= b {
                    break;
                }
                let mut u = rng.random::<f64>() * total;
                let mut next = rates[rates.len() - 1].0;
                for &(s, r) in &rates {
                    if u < r {
                        next = s;
                        break;
                    }
                    u -= r;
                }
                pos = next;
                jumps.push((t, pos));
                rates = bridge_rates(&self.table, &self.kernel, pos, mid, self.horizon, self.target)?;
            }
        }
        Ok(BridgePath {
            start: y,
            end: pos,
            horizon: self.cells as f64 * self.cell,
            jumps,
        })
    }
}
