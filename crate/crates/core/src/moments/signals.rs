use serde::Serialize;

use crate::error::{Error, Result};
use crate::kernel::{symmetrize, transition_probs, JumpKernel, TorusGeometry, TransitionTable};
use crate::quad::quadratic_segment;
use crate::seeding::try_fold_replicas;
use crate::sizebias::{run_xi, XiModel};

/// Where a set of source signals came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    MonteCarlo,
    /// Majorants: vacancy 1 and `E xi_z(s)` bounded by `gamma int_0^s p^_{0z}`.
    Bound,
    /// Exact values from a small closed system.
    Exact,
}

impl Provenance {
    pub fn tag(&self) -> &'static str {
        match self {
            Self::MonteCarlo => "monte-carlo",
            Self::Bound => "bound-1",
            Self::Exact => "exact-small-system",
        }
    }
}

/// Source terms of the moment equations on a uniform grid `s_k = k h`,
/// linearly interpolated in between.
#[derive(Debug, Clone, Serialize)]
pub struct InputSignals {
    pub step: f64,
    /// `P(xi_0(s_k) = 0)`.
    pub vacancy: Vec<f64>,
    /// `P(xi_z(s_k) = 1)` per site.
    pub lonely: Option<Vec<Vec<f64>>>,
    /// `E[1{xi_0(s_k) = 0} xi_z(s_k)]` per site.
    pub cross: Option<Vec<Vec<f64>>>,
    /// `E[xi_z(s_k)]` per site, when known.
    pub mean: Option<Vec<Vec<f64>>>,
    pub provenance: Provenance,
}

impl InputSignals {
    pub fn times(&self) -> Vec<f64> {
        (0..self.vacancy.len()).map(|k| k as f64 * self.step).collect()
    }

    pub fn t_max(&self) -> f64 {
        (self.vacancy.len() - 1) as f64 * self.step
    }

    pub fn has_pair_sources(&self) -> bool {
        self.lonely.is_some() && self.cross.is_some()
    }

    /// Constant vacancy signal `b`; no pair sources.
    pub fn constant_vacancy(step: f64, t_max: f64, b: f64) -> Result<Self> {
        let n = grid_len(step, t_max)?;
        let s = Self {
            step,
            vacancy: vec![b; n],
            lonely: None,
            cross: None,
            mean: None,
            provenance: Provenance::Bound,
        };
        s.validate(None)?;
        Ok(s)
    }

    /// Trivial-bound signals: vacancy 1 and both pair sources replaced by the
    /// first-moment majorant `gamma int_0^s p^_{0z}(u) du` (zero at the origin
    /// for the cross term).
    pub fn bound(kernel: &JumpKernel, geometry: &TorusGeometry, gamma: f64, step: f64, t_max: f64) -> Result<Self> {
        let n = grid_len(step, t_max)?;
        let table = hat_table(kernel, geometry, step / 2.0, t_max)?;
        let sites = geometry.num_sites();
        let mut m = vec![vec![0.0; sites]; n];
        for k in 1..n {
            for z in 0..sites {
                let f = |j: usize| table.field(j)[z];
                let (a, b) = (2 * (k - 1), 2 * k);
                let t = [a as f64 * step / 2.0, (a + 1) as f64 * step / 2.0, b as f64 * step / 2.0];
                m[k][z] = m[k - 1][z] + gamma * quadratic_segment(t, [f(a), f(a + 1), f(b)], t[0], t[2]);
            }
        }
        let mut cross = m.clone();
        for row in &mut cross {
            row[0] = 0.0;
        }
        let s = Self {
            step,
            vacancy: vec![1.0; n],
            lonely: Some(m.clone()),
            cross: Some(cross),
            mean: Some(m),
            provenance: Provenance::Bound,
        };
        s.validate(Some(sites))?;
        Ok(s)
    }

    /// Signals estimated from `replicas` runs of `xi` started from the model's
    /// initial law. Per-site sources are collected when `per_site` is set.
    pub fn monte_carlo(model: &XiModel, step: f64, t_max: f64, replicas: usize, seed: u64, per_site: bool) -> Result<Self> {
        let n = grid_len(step, t_max)?;
        let times: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
        let sites = model.geometry.num_sites();
        let width = if per_site { sites } else { 0 };
        #[derive(Clone)]
        struct Acc {
            vac: Vec<f64>,
            lonely: Vec<f64>,
            cross: Vec<f64>,
            mean: Vec<f64>,
        }
        let init = || Acc {
            vac: vec![0.0; n],
            lonely: vec![0.0; n * width],
            cross: vec![0.0; n * width],
            mean: vec![0.0; n * width],
        };
        let acc = try_fold_replicas(
            seed,
            "moments/signals",
            replicas,
            init,
            |acc: &mut Acc, _, rng| {
                let mut st = model.initial_state(rng)?;
                run_xi(model, &mut st, &times, rng, None, |k, s| {
                    let vacant = s.count(0) == 0;
                    acc.vac[k] += vacant as u8 as f64;
                    if per_site {
                        for z in 0..sites {
                            let c = s.count(z) as f64;
                            acc.lonely[k * sites + z] += (c == 1.0) as u8 as f64;
                            acc.mean[k * sites + z] += c;
                            if vacant {
                                acc.cross[k * sites + z] += c;
                            }
                        }
                    }
                })
            },
            |a, b| {
                for (x, y) in a
                    .vac
                    .iter_mut()
                    .chain(a.lonely.iter_mut())
                    .chain(a.cross.iter_mut())
                    .chain(a.mean.iter_mut())
                    .zip(b.vac.iter().chain(&b.lonely).chain(&b.cross).chain(&b.mean))
                {
                    *x += y;
                }
            },
        )?;
        let r = replicas as f64;
        let rows = |v: &[f64]| -> Vec<Vec<f64>> { v.chunks(sites).map(|c| c.iter().map(|x| x / r).collect()).collect() };
        let s = Self {
            step,
            vacancy: acc.vac.iter().map(|v| v / r).collect(),
            lonely: per_site.then(|| rows(&acc.lonely)),
            cross: per_site.then(|| rows(&acc.cross)),
            mean: per_site.then(|| rows(&acc.mean)),
            provenance: Provenance::MonteCarlo,
        };
        s.validate(per_site.then_some(sites))?;
        Ok(s)
    }

    pub fn validate(&self, sites: Option<usize>) -> Result<()> {
        if !(self.step > 0.0 && self.step.is_finite()) || self.vacancy.len() < 2 {
            return Err(Error::Config("signals need a positive step and at least two grid points".into()));
        }
        let prob = |v: f64| (0.0..=1.0 + 1e-12).contains(&v);
        if !self.vacancy.iter().all(|&v| prob(v)) {
            return Err(Error::Config("vacancy signal must lie in [0, 1]".into()));
        }
        let n = self.vacancy.len();
        let check_rows = |rows: &Option<Vec<Vec<f64>>>, what: &str, is_prob: bool| -> Result<()> {
            if let Some(rows) = rows {
                if rows.len() != n || sites.is_some_and(|s| rows.iter().any(|r| r.len() != s)) {
                    return Err(Error::Config(format!("{what} signal has the wrong shape")));
                }
                let ok = rows.iter().flatten().all(|&v| v >= 0.0 && v.is_finite() && (!is_prob || prob(v)));
                if !ok {
                    return Err(Error::Config(format!("{what} signal out of range")));
                }
            }
            Ok(())
        };
        // Majorants replace probabilities in bound mode.
        let strict = self.provenance != Provenance::Bound;
        check_rows(&self.lonely, "lonely", strict)?;
        check_rows(&self.cross, "cross", false)?;
        check_rows(&self.mean, "mean", false)?;
        if let (Some(c), Some(m)) = (&self.cross, &self.mean) {
            if c.iter().flatten().zip(m.iter().flatten()).any(|(a, b)| *a > b + 1e-12) {
                return Err(Error::Config("cross moment exceeds the first moment".into()));
            }
        }
        Ok(())
    }
}

fn grid_len(step: f64, t_max: f64) -> Result<usize> {
    if !(step > 0.0 && t_max > 0.0) {
        return Err(Error::Config("need step > 0 and t_max > 0".into()));
    }
    let k = (t_max / step).round();
    if (k * step - t_max).abs() > 1e-9 * t_max.max(1.0) {
        return Err(Error::Config(format!("t_max {t_max} is not a multiple of the step {step}")));
    }
    Ok(k as usize + 1)
}

/// Table of the symmetrised rate-two walk at `j h`, `j = 0, ..., t_max / h`.
pub fn hat_table(kernel: &JumpKernel, geometry: &TorusGeometry, h: f64, t_max: f64) -> Result<TransitionTable> {
    let n = grid_len(h, t_max)?;
    let times: Vec<f64> = (0..n).map(|j| j as f64 * h).collect();
    transition_probs(&symmetrize(kernel), geometry, 2.0, &times)
}
