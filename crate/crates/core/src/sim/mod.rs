//! Direct-method (Gillespie) simulation of the branching particle system
//! `eta` on a torus.
//!
//! Each particle jumps at rate one with law `p`; a site holding `k`
//! particles branches at rate `b(k)`, producing a birth or a death with
//! probability one half each.

mod log;
mod occupancy;
mod rule;

use rand::Rng;
use rand_distr::{Distribution, Exp1, Poisson};
use serde::{Deserialize, Serialize};

pub use log::{Event, EventKind, EventLog, Snapshot};
pub use occupancy::Occupancy;
pub use rule::BranchRule;

use crate::error::{Error, Result};
use crate::kernel::{JumpKernel, Site, TorusGeometry, TorusKernel};
use crate::seeding::{try_run_replicas, SimRng};
use crate::stats::{wilson, MeanEstimate};

pub const DEFAULT_EXPLOSION_CAP: u64 = 10_000_000;

/// Product initial laws.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "law", rename_all = "kebab-case")]
pub enum InitialLaw {
    Empty,
    /// Exactly `k` particles on every site.
    Deterministic { k: u32 },
    /// I.i.d. Poisson(`lambda`) occupations.
    Poisson { lambda: f64 },
}

impl InitialLaw {
    pub fn validate(&self) -> Result<()> {
        if let Self::Poisson { lambda } = *self {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(Error::Config(format!("Poisson intensity must be >= 0, got {lambda}")));
            }
        }
        Ok(())
    }

    /// Mean occupation per site.
    pub fn intensity(&self) -> f64 {
        match *self {
            Self::Empty => 0.0,
            Self::Deterministic { k } => k as f64,
            Self::Poisson { lambda } => lambda,
        }
    }

    pub fn sample_counts<R: Rng + ?Sized>(&self, sites: usize, rng: &mut R) -> Result<Vec<u32>> {
        Ok(match *self {
            Self::Empty => vec![0; sites],
            Self::Deterministic { k } => vec![k; sites],
            Self::Poisson { lambda } if lambda == 0.0 => vec![0; sites],
            Self::Poisson { lambda } => {
                let d = Poisson::new(lambda).map_err(|e| Error::Config(e.to_string()))?;
                (0..sites).map(|_| d.sample(rng) as u32).collect()
            }
        })
    }
}

/// Everything needed to simulate `eta`.
#[derive(Debug, Clone)]
pub struct EtaModel {
    pub kernel: JumpKernel,
    pub geometry: TorusGeometry,
    pub rule: BranchRule,
    pub init: InitialLaw,
    pub explosion_cap: u64,
    torus_kernel: TorusKernel,
}

impl EtaModel {
    pub fn new(
        kernel: JumpKernel,
        geometry: TorusGeometry,
        rule: BranchRule,
        init: InitialLaw,
    ) -> Result<Self> {
        rule.validate()?;
        init.validate()?;
        let torus_kernel = TorusKernel::new(&kernel, &geometry)?;
        Ok(Self {
            kernel,
            geometry,
            rule,
            init,
            explosion_cap: DEFAULT_EXPLOSION_CAP,
            torus_kernel,
        })
    }

    pub fn torus_kernel(&self) -> &TorusKernel {
        &self.torus_kernel
    }

    pub fn sample_initial(&self, rng: &mut SimRng) -> Result<Occupancy> {
        let counts = self.init.sample_counts(self.geometry.num_sites(), rng)?;
        Occupancy::from_counts(&self.geometry, self.rule, &counts)
    }
}

/// `sum_x (eta_x + b(eta_x))`.
pub fn total_event_rate(occ: &Occupancy) -> f64 {
    occ.total_event_rate()
}

/// Apply one event at time `now + Exp(R)`, `R` the total event rate.
pub fn step<R: Rng + ?Sized>(
    occ: &mut Occupancy,
    kernel: &TorusKernel,
    rng: &mut R,
    now: f64,
) -> Result<Event> {
    let rate = occ.total_event_rate();
    if rate <= 0.0 {
        return Err(Error::Domain("no event can occur from the empty configuration".into()));
    }
    let e: f64 = Exp1.sample(rng);
    let time = now + e / rate;
    Ok(apply_event(occ, kernel, rng, time, rate))
}

fn apply_event<R: Rng + ?Sized>(
    occ: &mut Occupancy,
    kernel: &TorusKernel,
    rng: &mut R,
    time: f64,
    rate: f64,
) -> Event {
    let n = occ.total();
    let u = rng.random::<f64>() * rate;
    if u < n as f64 {
        let rank = (u as u64).min(n - 1);
        let from = occ.particle_site(rank);
        let to = kernel.step(from, kernel.pick(rng.random()));
        occ.move_particle(from, to);
        Event::new(time, EventKind::Jump { from, to })
    } else {
        let site = occ.branch_site(u - n as f64);
        if rng.random::<bool>() {
            occ.add(site, 1);
            Event::new(time, EventKind::Birth { site })
        } else {
            occ.add(site, -1);
            Event::new(time, EventKind::Death { site })
        }
    }
}

pub(crate) fn check_times(times: &[f64]) -> Result<()> {
    if times.iter().any(|t| !(t.is_finite() && *t >= 0.0)) {
        return Err(Error::Config("snapshot times must be finite and >= 0".into()));
    }
    if times.windows(2).any(|w| w[1] < w[0]) {
        return Err(Error::Config("snapshot times must be nondecreasing".into()));
    }
    Ok(())
}

/// Run from `occ` at time zero through the sorted `times`, calling
/// `observe(i, occ)` at each. Events are appended to `events` when given.
pub fn run_eta<F>(
    model: &EtaModel,
    occ: &mut Occupancy,
    times: &[f64],
    rng: &mut SimRng,
    mut events: Option<&mut Vec<Event>>,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(usize, &Occupancy),
{
    check_times(times)?;
    let kernel = &model.torus_kernel;
    let mut now = 0.0;
    let mut rate = occ.total_event_rate();
    let mut next = next_time(now, rate, rng);
    for (i, &t) in times.iter().enumerate() {
        while next <= t {
            now = next;
            let ev = apply_event(occ, kernel, rng, now, rate);
            if let Some(log) = events.as_deref_mut() {
                log.push(ev);
            }
            if occ.total() > model.explosion_cap {
                return Err(Error::Explosion {
                    count: occ.total() as usize,
                    time: now,
                });
            }
            rate = occ.total_event_rate();
            next = next_time(now, rate, rng);
        }
        observe(i, occ);
    }
    Ok(())
}

#[inline]
fn next_time(now: f64, rate: f64, rng: &mut SimRng) -> f64 {
    if rate > 0.0 {
        let e: f64 = Exp1.sample(rng);
        now + e / rate
    } else {
        f64::INFINITY
    }
}

/// Simulate one trajectory and return its log with snapshots at `times`.
pub fn simulate_eta(
    model: &EtaModel,
    times: &[f64],
    rng: &mut SimRng,
    record_events: bool,
) -> Result<EventLog> {
    let mut occ = model.sample_initial(rng)?;
    let mut log = EventLog {
        initial: occ.to_sparse(),
        ..Default::default()
    };
    let mut events = Vec::new();
    let mut snaps = Vec::with_capacity(times.len());
    run_eta(
        model,
        &mut occ,
        times,
        rng,
        record_events.then_some(&mut events),
        |i, o| {
            snaps.push(Snapshot {
                time: times[i],
                counts: o.to_sparse(),
            })
        },
    )?;
    log.events = events;
    log.snapshots = snaps;
    Ok(log)
}

/// Per-time means of an observable over independent replicas.
pub fn estimate_observable<F>(
    model: &EtaModel,
    times: &[f64],
    replicas: usize,
    seed: u64,
    label: &str,
    observable: F,
) -> Result<Vec<MeanEstimate>>
where
    F: Fn(&Occupancy) -> f64 + Sync,
{
    let samples = try_run_replicas(seed, label, replicas, |_, rng| {
        let mut occ = model.sample_initial(rng)?;
        let mut out = vec![0.0; times.len()];
        run_eta(model, &mut occ, times, rng, None, |i, o| out[i] = observable(o))?;
        Ok::<_, Error>(out)
    })?;
    Ok((0..times.len())
        .map(|i| MeanEstimate::from_samples(samples.iter().map(|s| s[i])))
        .collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct VacancyEstimate {
    pub time: f64,
    pub estimate: f64,
    pub lo: f64,
    pub hi: f64,
    pub replicas: usize,
}

pub const MIN_VACANCY_REPLICAS: usize = 100;

/// `P(eta_x(t) = 0)` with 95% Wilson intervals.
pub fn estimate_vacancy(
    model: &EtaModel,
    x: Site,
    times: &[f64],
    replicas: usize,
    seed: u64,
) -> Result<Vec<VacancyEstimate>> {
    if replicas < MIN_VACANCY_REPLICAS {
        return Err(Error::Config(format!(
            "vacancy estimates need at least {MIN_VACANCY_REPLICAS} replicas, got {replicas}"
        )));
    }
    if x >= model.geometry.num_sites() {
        return Err(Error::Config(format!("site {x} is off the torus")));
    }
    let means = estimate_observable(model, times, replicas, seed, "vacancy", |o| {
        (o.count(x) == 0) as u8 as f64
    })?;
    Ok(times
        .iter()
        .zip(means)
        .map(|(&time, m)| {
            let k = (m.mean * replicas as f64).round() as u64;
            let (lo, hi) = wilson(k, replicas as u64, 1.96);
            VacancyEstimate {
                time,
                estimate: m.mean,
                lo,
                hi,
                replicas,
            }
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::replica_rng;

    fn model(rule: BranchRule, init: InitialLaw) -> EtaModel {
        EtaModel::new(
            JumpKernel::simple(1).unwrap(),
            TorusGeometry::cube(1, 8).unwrap(),
            rule,
            init,
        )
        .unwrap()
    }

    #[test]
    fn empty_never_moves() {
        let m = model(BranchRule::lonely(1.0), InitialLaw::Empty);
        let mut rng = replica_rng(1, "t", 0);
        let log = simulate_eta(&m, &[0.0, 10.0], &mut rng, true).unwrap();
        assert!(log.events.is_empty());
        assert!(log.snapshots.iter().all(|s| s.counts.is_empty()));
        let mut occ = m.sample_initial(&mut rng).unwrap();
        assert!(matches!(
            step(&mut occ, m.torus_kernel(), &mut rng, 0.0),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn zero_branching_conserves_mass() {
        let m = model(BranchRule::lonely(0.0), InitialLaw::Deterministic { k: 2 });
        let mut rng = replica_rng(2, "t", 0);
        let log = simulate_eta(&m, &[1.0, 5.0], &mut rng, true).unwrap();
        assert!(log.snapshots.iter().all(|s| s.total() == 16));
        assert!(log
            .events
            .iter()
            .all(|e| matches!(e.kind, EventKind::Jump { .. })));
    }

    #[test]
    fn replay_matches_snapshots_and_indices_stay_consistent() {
        let m = model(BranchRule::Linear { c: 0.3 }, InitialLaw::Poisson { lambda: 1.0 });
        let mut rng = replica_rng(3, "t", 0);
        let times = [0.0, 0.5, 1.0, 3.0];
        let log = simulate_eta(&m, &times, &mut rng, true).unwrap();
        assert_eq!(log.replay(&m.geometry, &times).unwrap(), log.snapshots);

        let mut occ = m.sample_initial(&mut rng).unwrap();
        let mut now = 0.0;
        for _ in 0..2000 {
            match step(&mut occ, m.torus_kernel(), &mut rng, now) {
                Ok(e) => now = e.time,
                Err(_) => break,
            }
            occ.check_invariants().unwrap();
        }
    }

    #[test]
    fn vacancy_needs_replicas() {
        let m = model(BranchRule::lonely(1.0), InitialLaw::Poisson { lambda: 1.0 });
        assert!(matches!(estimate_vacancy(&m, 0, &[1.0], 10, 0), Err(Error::Config(_))));
    }

    #[test]
    fn explosion_is_reported() {
        let mut m = model(BranchRule::Linear { c: 5.0 }, InitialLaw::Deterministic { k: 3 });
        m.explosion_cap = 30;
        let mut hit = false;
        for i in 0..20 {
            let mut rng = replica_rng(4, "boom", i);
            if let Err(Error::Explosion { count, .. }) = simulate_eta(&m, &[50.0], &mut rng, false) {
                assert!(count > 30);
                hit = true;
                break;
            }
        }
        assert!(hit);
    }

    #[test]
    fn unsorted_times_rejected() {
        let m = model(BranchRule::lonely(1.0), InitialLaw::Empty);
        let mut rng = replica_rng(5, "t", 0);
        assert!(simulate_eta(&m, &[2.0, 1.0], &mut rng, false).is_err());
    }
}
