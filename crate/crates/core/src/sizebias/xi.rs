use rand::Rng;
use rand_distr::{Distribution, Exp1};

use super::XiConfig;
use crate::error::{Error, Result};
use crate::index::{CountTree, SiteSet};
use crate::kernel::{JumpKernel, Site, TorusGeometry, TorusKernel};
use crate::seeding::SimRng;
use crate::sim::{check_times, InitialLaw, DEFAULT_EXPLOSION_CAP};

/// The size-biased process seen from the immigration source: free walks,
/// lonely branching away from the source, immigration at rate `gamma` into an
/// empty source site, and source moves by kernel increments at rate one.
#[derive(Debug, Clone)]
pub struct XiModel {
    pub kernel: JumpKernel,
    pub geometry: TorusGeometry,
    pub gamma: f64,
    /// Law of `xi(0)`; [`InitialLaw::Empty`] is the usual start.
    pub init: InitialLaw,
    pub explosion_cap: u64,
    torus_kernel: TorusKernel,
}

impl XiModel {
    pub fn new(kernel: JumpKernel, geometry: TorusGeometry, gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma >= 0.0) {
            return Err(Error::Config(format!("gamma must be finite and >= 0, got {gamma}")));
        }
        let torus_kernel = TorusKernel::new(&kernel, &geometry)?;
        Ok(Self {
            kernel,
            geometry,
            gamma,
            init: InitialLaw::Empty,
            explosion_cap: DEFAULT_EXPLOSION_CAP,
            torus_kernel,
        })
    }

    pub fn with_init(mut self, init: InitialLaw) -> Result<Self> {
        init.validate()?;
        self.init = init;
        Ok(self)
    }

    pub fn initial_state(&self, rng: &mut SimRng) -> Result<XiState> {
        let counts = self.init.sample_counts(self.geometry.num_sites(), rng)?;
        Ok(XiState::from_counts(&self.geometry, &counts))
    }
}

/// Event classes of the source-frame process.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum XiEventKind {
    Walk,
    Branch,
    Immigration,
    Shift,
}

/// Absolute particle counts plus the source position; `xi_z = counts[source + z]`.
#[derive(Debug, Clone)]
pub struct XiState {
    geometry: TorusGeometry,
    counts: Vec<u32>,
    source: Site,
    total: u64,
    occupied: SiteSet,
    lonely: SiteSet,
    tree: CountTree,
}

impl XiState {
    /// State with `xi_z = counts[z]` and the source at the origin.
    pub fn from_counts(geometry: &TorusGeometry, counts: &[u32]) -> Self {
        let n = geometry.num_sites();
        let mut s = Self {
            geometry: geometry.clone(),
            counts: vec![0; n],
            source: 0,
            total: 0,
            occupied: SiteSet::new(n),
            lonely: SiteSet::new(n),
            tree: CountTree::new(n),
        };
        for (z, &c) in counts.iter().enumerate() {
            if c > 0 {
                s.add(z, c as i64);
            }
        }
        s
    }

    pub fn source(&self) -> Site {
        self.source
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// `xi_z`.
    #[inline]
    pub fn count(&self, z: Site) -> u32 {
        self.counts[self.geometry.add(self.source, z)]
    }

    pub fn to_config(&self) -> XiConfig {
        let mut counts: Vec<(Site, u32)> = self
            .occupied
            .iter()
            .map(|s| (self.geometry.sub(s, self.source), self.counts[s]))
            .collect();
        counts.sort_unstable();
        XiConfig::from_sparse(&self.geometry, counts)
    }

    fn add(&mut self, site: Site, delta: i64) {
        let new = self.counts[site] as i64 + delta;
        debug_assert!(new >= 0);
        self.counts[site] = new as u32;
        self.total = (self.total as i64 + delta) as u64;
        self.tree.add(site, delta);
        if new == 0 {
            self.occupied.remove(site);
        } else {
            self.occupied.insert(site);
        }
        if new == 1 {
            self.lonely.insert(site);
        } else {
            self.lonely.remove(site);
        }
    }

    fn branching_sites(&self) -> usize {
        self.lonely.len() - self.lonely.contains(self.source) as usize
    }

    /// Total rate of events that can change the relative configuration, plus
    /// the unit shift rate.
    pub fn total_rate(&self, gamma: f64) -> f64 {
        let immigration = (self.counts[self.source] == 0) as u8 as f64;
        self.total as f64 + gamma * (self.branching_sites() as f64 + immigration) + 1.0
    }

    fn apply<R: Rng + ?Sized>(&mut self, kernel: &TorusKernel, gamma: f64, rate: f64, rng: &mut R) -> XiEventKind {
        let n = self.total as f64;
        let mut u = rng.random::<f64>() * rate;
        if u < n {
            let from = self.tree.find((u as u64).min(self.total - 1));
            let to = kernel.step(from, kernel.pick(rng.random()));
            if from != to {
                self.add(from, -1);
                self.add(to, 1);
            }
            return XiEventKind::Walk;
        }
        u -= n;
        let m = self.branching_sites();
        let branch = gamma * m as f64;
        if u < branch {
            let mut k = ((u / gamma) as usize).min(m - 1);
            if let Some(p) = self.lonely.position(self.source) {
                if k >= p {
                    k += 1;
                }
            }
            let site = self.lonely.get(k);
            self.add(site, if rng.random::<bool>() { 1 } else { -1 });
            return XiEventKind::Branch;
        }
        u -= branch;
        if self.counts[self.source] == 0 && u < gamma {
            self.add(self.source, 1);
            return XiEventKind::Immigration;
        }
        self.source = kernel.step(self.source, kernel.pick(rng.random()));
        XiEventKind::Shift
    }
}

/// Run from `state` at time zero, calling `observe(i, state)` at each of
/// the sorted `times`.
pub fn run_xi<F>(
    model: &XiModel,
    state: &mut XiState,
    times: &[f64],
    rng: &mut SimRng,
    mut on_event: Option<&mut dyn FnMut(f64, XiEventKind)>,
    mut observe: F,
) -> Result<()>
where
    F: FnMut(usize, &XiState),
{
    check_times(times)?;
    let kernel = &model.torus_kernel;
    let gamma = model.gamma;
    let mut now = 0.0;
    let mut rate = state.total_rate(gamma);
    let e: f64 = Exp1.sample(rng);
    let mut next = now + e / rate;
    for (i, &t) in times.iter().enumerate() {
        while next <= t {
            now = next;
            let kind = state.apply(kernel, gamma, rate, rng);
            if let Some(f) = on_event.as_deref_mut() {
                f(now, kind);
            }
            if state.total > model.explosion_cap {
                return Err(Error::Explosion {
                    count: state.total as usize,
                    time: now,
                });
            }
            rate = state.total_rate(gamma);
            let e: f64 = Exp1.sample(rng);
            next = now + e / rate;
        }
        observe(i, state);
    }
    Ok(())
}

/// Snapshots of `xi` at the sorted `times`, started from the model's initial law.
pub fn simulate_xi(model: &XiModel, times: &[f64], rng: &mut SimRng) -> Result<Vec<XiConfig>> {
    let mut state = model.initial_state(rng)?;
    let mut out = Vec::with_capacity(times.len());
    run_xi(model, &mut state, times, rng, None, |_, s| out.push(s.to_config()))?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::seeding::replica_rng;

    fn model(gamma: f64) -> XiModel {
        XiModel::new(JumpKernel::simple(1).unwrap(), TorusGeometry::cube(1, 12).unwrap(), gamma).unwrap()
    }

    #[test]
    fn first_change_from_empty_is_immigration() {
        let m = model(0.7);
        for i in 0..50 {
            let mut rng = replica_rng(1, "xi", i);
            let mut st = m.initial_state(&mut rng).unwrap();
            let mut kinds = Vec::new();
            let mut rec = |_: f64, k: XiEventKind| kinds.push(k);
            run_xi(&m, &mut st, &[5.0], &mut rng, Some(&mut rec), |_, _| {}).unwrap();
            if let Some(k) = kinds.iter().find(|&&k| k != XiEventKind::Shift) {
                assert_eq!(*k, XiEventKind::Immigration);
            }
        }
    }

    #[test]
    fn lone_particle_at_source_is_inert() {
        let g = TorusGeometry::cube(1, 12).unwrap();
        let mut counts = vec![0; 12];
        counts[0] = 1;
        let st = XiState::from_counts(&g, &counts);
        // Only its walk and the shift remain.
        assert_eq!(st.total_rate(3.0), 2.0);
    }

    #[test]
    fn shifts_relabel_positions() {
        let m = model(0.0);
        let g = m.geometry.clone();
        let mut counts = vec![0; 12];
        counts[4] = 2;
        let mut st = XiState::from_counts(&g, &counts);
        let mut rng = replica_rng(3, "xi", 0);
        let before = st.total();
        run_xi(&m, &mut st, &[3.0], &mut rng, None, |_, s| {
            let c = s.to_config();
            assert_eq!(c.total(), before);
            let direct: u32 = (0..12).map(|z| s.count(z)).sum();
            assert_eq!(direct as u64, before);
        })
        .unwrap();
    }
}
