use rand::distr::weighted::WeightedIndex;
use rand::Rng;
use rand_distr::{Distribution, Exp1};
use serde::Serialize;

use super::{sample_bridge, BridgePath, XiConfig, DEFAULT_REJECTION_BUDGET};
use crate::error::{Error, Result};
use crate::index::SiteSet;
use crate::kernel::{transition_probs, Site, TorusGeometry, TorusKernel, TransitionTable};
use crate::sim::{EtaModel, Event, EventKind, EventLog, InitialLaw};
use crate::seeding::SimRng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub struct Particle {
    pub id: u64,
    pub site: Site,
    pub relative: bool,
}

/// Particle-level configuration with one selected particle and lineage
/// marks. Per-site member lists double as the site-count index.
#[derive(Debug, Clone)]
pub struct SelectedConfig {
    geometry: TorusGeometry,
    particles: Vec<Particle>,
    members: Vec<Vec<u32>>,
    member_pos: Vec<u32>,
    selected: usize,
    lonely: SiteSet,
    next_id: u64,
}

impl SelectedConfig {
    /// `background[s]` unmarked particles at each site plus the selected one
    /// at `start`.
    pub fn new(geometry: &TorusGeometry, background: &[u32], start: Site) -> Self {
        let n = geometry.num_sites();
        let mut cfg = Self {
            geometry: geometry.clone(),
            particles: Vec::new(),
            members: vec![Vec::new(); n],
            member_pos: Vec::new(),
            selected: 0,
            lonely: SiteSet::new(n),
            next_id: 0,
        };
        cfg.selected = cfg.add(start, true);
        for (s, &c) in background.iter().enumerate() {
            for _ in 0..c {
                cfg.add(s, false);
            }
        }
        cfg
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn particles(&self) -> &[Particle] {
        &self.particles
    }

    pub fn selected(&self) -> &Particle {
        &self.particles[self.selected]
    }

    pub fn len(&self) -> usize {
        self.particles.len()
    }

    pub fn is_empty(&self) -> bool {
        self.particles.is_empty()
    }

    #[inline]
    pub fn count(&self, site: Site) -> u32 {
        self.members[site].len() as u32
    }

    pub fn counts(&self) -> Vec<u32> {
        self.members.iter().map(|m| m.len() as u32).collect()
    }

    fn refresh(&mut self, site: Site) {
        if self.members[site].len() == 1 {
            self.lonely.insert(site);
        } else {
            self.lonely.remove(site);
        }
    }

    fn add(&mut self, site: Site, relative: bool) -> usize {
        let slot = self.particles.len();
        self.particles.push(Particle {
            id: self.next_id,
            site,
            relative,
        });
        self.next_id += 1;
        self.member_pos.push(self.members[site].len() as u32);
        self.members[site].push(slot as u32);
        self.refresh(site);
        slot
    }

    fn unlink(&mut self, slot: usize) {
        let site = self.particles[slot].site;
        let pos = self.member_pos[slot] as usize;
        let list = &mut self.members[site];
        list.swap_remove(pos);
        if pos < list.len() {
            let moved = list[pos] as usize;
            self.member_pos[moved] = pos as u32;
        }
        self.refresh(site);
    }

    fn link(&mut self, slot: usize, site: Site) {
        self.particles[slot].site = site;
        self.member_pos[slot] = self.members[site].len() as u32;
        self.members[site].push(slot as u32);
        self.refresh(site);
    }

    fn move_slot(&mut self, slot: usize, to: Site) {
        if self.particles[slot].site != to {
            self.unlink(slot);
            self.link(slot, to);
        }
    }

    fn remove(&mut self, slot: usize) {
        debug_assert_ne!(slot, self.selected);
        self.unlink(slot);
        let last = self.particles.len() - 1;
        if slot != last {
            let site = self.particles[last].site;
            let pos = self.member_pos[last] as usize;
            self.members[site][pos] = slot as u32;
            self.particles[slot] = self.particles[last];
            self.member_pos[slot] = self.member_pos[last];
            if self.selected == last {
                self.selected = slot;
            }
        }
        self.particles.pop();
        self.member_pos.pop();
    }

    /// Relatives other than the selected particle, recentred at it.
    pub fn relatives(&self) -> XiConfig {
        self.recentred(|p| p.relative)
    }

    /// Every particle except the selected one, recentred at it.
    pub fn others(&self) -> XiConfig {
        self.recentred(|_| true)
    }

    fn recentred(&self, keep: impl Fn(&Particle) -> bool) -> XiConfig {
        let origin = self.selected().site;
        let mut counts = vec![0u32; self.geometry.num_sites()];
        for (i, p) in self.particles.iter().enumerate() {
            if i != self.selected && keep(p) {
                counts[self.geometry.sub(p.site, origin)] += 1;
            }
        }
        XiConfig::from_dense(&self.geometry, &counts)
    }

    pub fn check_invariants(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Numerical(format!("selected config: {m}")));
        if !self.selected().relative {
            return bad("selected particle is not a relative");
        }
        let mut hist = vec![0u32; self.geometry.num_sites()];
        let mut ids: Vec<u64> = Vec::with_capacity(self.particles.len());
        for (slot, p) in self.particles.iter().enumerate() {
            hist[p.site] += 1;
            ids.push(p.id);
            if self.members[p.site][self.member_pos[slot] as usize] as usize != slot {
                return bad("member index out of sync");
            }
        }
        ids.sort_unstable();
        if ids.windows(2).any(|w| w[0] == w[1]) {
            return bad("duplicate particle ids");
        }
        for (s, &h) in hist.iter().enumerate() {
            if self.count(s) != h {
                return bad("site counts differ from the particle histogram");
            }
            if (h == 1) != self.lonely.contains(s) {
                return bad("lonely index out of sync");
            }
        }
        Ok(())
    }
}

/// Output of one size-biased run.
#[derive(Debug, Clone)]
pub struct XiTildeRun {
    pub config: SelectedConfig,
    pub bridge: BridgePath,
    pub log: Option<EventLog>,
}

/// Prepared sampler for the size-biased system at `(x, T)`; reusable across
/// replicas.
#[derive(Debug, Clone)]
pub struct XiTildeSampler {
    kernel: TorusKernel,
    gamma: f64,
    init: InitialLaw,
    target: Site,
    horizon: f64,
    start_law: WeightedIndex<f64>,
    table: TransitionTable,
    pub rejection_budget: u64,
}

impl XiTildeSampler {
    pub fn new(model: &EtaModel, target: Site, horizon: f64) -> Result<Self> {
        let gamma = model.rule.lonely_gamma().ok_or_else(|| {
            Error::Config("the size-biased system is implemented for the lonely rule only".into())
        })?;
        match model.init {
            InitialLaw::Poisson { lambda } if lambda > 0.0 => {}
            InitialLaw::Deterministic { k } if k > 0 => {}
            _ => {
                return Err(Error::Config(
                    "size-biasing needs Poisson(lambda > 0) or deterministic k >= 1".into(),
                ))
            }
        }
        if !(horizon > 0.0 && horizon.is_finite()) {
            return Err(Error::Domain(format!("horizon must be > 0, got {horizon}")));
        }
        let geometry = &model.geometry;
        if target >= geometry.num_sites() {
            return Err(Error::Config(format!("site {target} is off the torus")));
        }
        let table = transition_probs(&model.kernel, geometry, 1.0, &[horizon])?;
        let start_law = start_weights(&table, target, None)?;
        Ok(Self {
            kernel: model.torus_kernel().clone(),
            gamma,
            init: model.init,
            target,
            horizon,
            start_law,
            table,
            rejection_budget: DEFAULT_REJECTION_BUDGET,
        })
    }

    pub fn table(&self) -> &TransitionTable {
        &self.table
    }

    pub fn sample(&self, rng: &mut SimRng, record: bool) -> Result<XiTildeRun> {
        let geom = self.kernel.geometry();
        let y = self.start_law.sample(rng);
        let bridge = sample_bridge(&self.kernel, y, self.target, self.horizon, rng, self.rejection_budget)?;
        let mut background = self.init.sample_counts(geom.num_sites(), rng)?;
        if let InitialLaw::Deterministic { .. } = self.init {
            background[y] -= 1;
        }
        let mut cfg = SelectedConfig::new(geom, &background, y);
        let mut log = record.then(|| EventLog {
            initial: sparse(&cfg.counts()),
            ..Default::default()
        });
        self.evolve(&mut cfg, &bridge, rng, log.as_mut().map(|l| &mut l.events));
        if let Some(l) = log.as_mut() {
            l.snapshots.push(crate::sim::Snapshot {
                time: self.horizon,
                counts: sparse(&cfg.counts()),
            });
        }
        Ok(XiTildeRun {
            config: cfg,
            bridge,
            log,
        })
    }

    fn evolve(
        &self,
        cfg: &mut SelectedConfig,
        bridge: &BridgePath,
        rng: &mut SimRng,
        mut events: Option<&mut Vec<Event>>,
    ) {
        let mut push = |e: Event| {
            if let Some(v) = events.as_deref_mut() {
                v.push(e);
            }
        };
        let gamma = self.gamma;
        let mut now = 0.0;
        let mut bridge_jumps = bridge.jumps.iter().peekable();
        loop {
            let walkers = (cfg.len() - 1) as f64;
            let rate = walkers + gamma * cfg.lonely.len() as f64;
            let next = if rate > 0.0 {
                let e: f64 = Exp1.sample(rng);
                now + e / rate
            } else {
                f64::INFINITY
            };
            let bridge_next = bridge_jumps.peek().map_or(f64::INFINITY, |j| j.0);
            if bridge_next.min(next) >= self.horizon {
                break;
            }
            if bridge_next <= next {
                // The competing clocks are memoryless; resample after the jump.
                let &(t, to) = bridge_jumps.next().unwrap();
                now = t;
                let sel = cfg.selected;
                let from = cfg.particles[sel].site;
                let id = cfg.particles[sel].id;
                cfg.move_slot(sel, to);
                push(Event {
                    time: t,
                    kind: EventKind::Jump { from, to },
                    particle: Some(id),
                    offspring: None,
                });
                continue;
            }
            now = next;
            let u = rng.random::<f64>() * rate;
            if u < walkers {
                let r = (u as usize).min(cfg.len() - 2);
                let slot = if r >= cfg.selected { r + 1 } else { r };
                let from = cfg.particles[slot].site;
                let to = self.kernel.step(from, self.kernel.pick(rng.random()));
                cfg.move_slot(slot, to);
                push(Event {
                    time: now,
                    kind: EventKind::Jump { from, to },
                    particle: Some(cfg.particles[slot].id),
                    offspring: None,
                });
            } else {
                let k = (((u - walkers) / gamma) as usize).min(cfg.lonely.len() - 1);
                let site = cfg.lonely.get(k);
                let slot = cfg.members[site][0] as usize;
                let parent = cfg.particles[slot];
                if slot == cfg.selected || rng.random::<bool>() {
                    let child = cfg.add(site, parent.relative);
                    push(Event {
                        time: now,
                        kind: EventKind::Birth { site },
                        particle: Some(parent.id),
                        offspring: Some(cfg.particles[child].id),
                    });
                } else {
                    cfg.remove(slot);
                    push(Event {
                        time: now,
                        kind: EventKind::Death { site },
                        particle: Some(parent.id),
                        offspring: None,
                    });
                }
            }
        }
    }
}

fn sparse(counts: &[u32]) -> Vec<(Site, u32)> {
    counts
        .iter()
        .enumerate()
        .filter(|(_, &c)| c > 0)
        .map(|(s, &c)| (s, c))
        .collect()
}

fn start_weights(table: &TransitionTable, x: Site, intensity: Option<&[f64]>) -> Result<WeightedIndex<f64>> {
    let n = table.geometry().num_sites();
    let w: Vec<f64> = (0..n)
        .map(|y| intensity.map_or(1.0, |l| l[y]) * table.prob(0, y, x))
        .collect();
    WeightedIndex::new(&w).map_err(|e| Error::Numerical(format!("source start law: {e}")))
}

/// Per-site mean occupations at time zero.
#[derive(Debug, Clone, PartialEq)]
pub enum SourceIntensity {
    Constant(f64),
    PerSite(Vec<f64>),
}

/// Draw `X(0)` with `P(X(0) = y) ∝ lambda_y p_{yx}(T)`; `table` must hold the
/// rate-one kernel at time `T`.
pub fn sample_source_start<R: Rng + ?Sized>(
    intensity: &SourceIntensity,
    x: Site,
    horizon: f64,
    table: &TransitionTable,
    rng: &mut R,
) -> Result<Site> {
    if horizon == 0.0 {
        return Ok(x);
    }
    let i = table.time_index(horizon).ok_or_else(|| {
        Error::Config(format!("horizon {horizon} is not on the table grid"))
    })?;
    let n = table.geometry().num_sites();
    let w: Vec<f64> = (0..n)
        .map(|y| {
            let l = match intensity {
                SourceIntensity::Constant(l) => *l,
                SourceIntensity::PerSite(v) => v[y],
            };
            l * table.prob(i, y, x)
        })
        .collect();
    let d = WeightedIndex::new(&w).map_err(|e| Error::Config(format!("source start law: {e}")))?;
    Ok(d.sample(rng))
}

/// One size-biased run at `(x, T)` with its event log.
pub fn simulate_xitilde(model: &EtaModel, x: Site, horizon: f64, rng: &mut SimRng) -> Result<XiTildeRun> {
    XiTildeSampler::new(model, x, horizon)?.sample(rng, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::JumpKernel;
    use crate::seeding::replica_rng;
    use crate::sim::BranchRule;

    fn model(gamma: f64, init: InitialLaw) -> EtaModel {
        EtaModel::new(
            JumpKernel::simple(1).unwrap(),
            TorusGeometry::cube(1, 10).unwrap(),
            BranchRule::lonely(gamma),
            init,
        )
        .unwrap()
    }

    #[test]
    fn selected_never_dies_and_lineage_is_hereditary() {
        let m = model(1.5, InitialLaw::Poisson { lambda: 0.5 });
        let s = XiTildeSampler::new(&m, 3, 2.0).unwrap();
        for i in 0..200 {
            let mut rng = replica_rng(9, "xt", i);
            let run = s.sample(&mut rng, true).unwrap();
            run.config.check_invariants().unwrap();
            let sel = run.config.selected().id;
            let log = run.log.unwrap();
            assert_eq!(run.config.selected().site, 3);
            let mut relative = std::collections::HashMap::new();
            relative.insert(sel, true);
            for e in &log.events {
                match e.kind {
                    EventKind::Death { .. } => assert_ne!(e.particle, Some(sel)),
                    EventKind::Birth { .. } => {
                        if let Some(&r) = relative.get(&e.particle.unwrap()) {
                            relative.insert(e.offspring.unwrap(), r);
                        }
                    }
                    _ => {}
                }
            }
            for p in run.config.particles() {
                if let Some(&r) = relative.get(&p.id) {
                    assert_eq!(r, p.relative);
                } else {
                    assert!(!p.relative);
                }
            }
            let g = m.geometry.clone();
            assert_eq!(log.replay(&g, &[2.0]).unwrap(), log.snapshots);
        }
    }

    #[test]
    fn no_branching_means_no_relatives() {
        let m = model(0.0, InitialLaw::Deterministic { k: 2 });
        let s = XiTildeSampler::new(&m, 0, 1.0).unwrap();
        let mut rng = replica_rng(1, "xt", 0);
        let run = s.sample(&mut rng, false).unwrap();
        assert_eq!(run.config.len(), 20);
        assert_eq!(run.config.relatives().total(), 0);
        assert_eq!(run.config.others().total(), 19);
    }

    #[test]
    fn relatives_are_dominated_by_others() {
        let m = model(2.0, InitialLaw::Poisson { lambda: 1.0 });
        let s = XiTildeSampler::new(&m, 5, 3.0).unwrap();
        for i in 0..100 {
            let mut rng = replica_rng(2, "xt", i);
            let c = s.sample(&mut rng, false).unwrap().config;
            let (r, o) = (c.relatives(), c.others());
            assert!((0..10).all(|z| r.count(z) <= o.count(z)));
        }
    }

    #[test]
    fn rejects_non_lonely_rules_and_empty_init() {
        let mut m = model(1.0, InitialLaw::Empty);
        assert!(XiTildeSampler::new(&m, 0, 1.0).is_err());
        m.init = InitialLaw::Poisson { lambda: 1.0 };
        m.rule = BranchRule::Linear { c: 1.0 };
        assert!(XiTildeSampler::new(&m, 0, 1.0).is_err());
    }

    #[test]
    fn zero_horizon_start_is_target() {
        let g = TorusGeometry::cube(1, 8).unwrap();
        let t = transition_probs(&JumpKernel::simple(1).unwrap(), &g, 1.0, &[0.0, 1.0]).unwrap();
        let mut rng = replica_rng(0, "s", 0);
        assert_eq!(sample_source_start(&SourceIntensity::Constant(1.0), 5, 0.0, &t, &mut rng).unwrap(), 5);
    }
}
