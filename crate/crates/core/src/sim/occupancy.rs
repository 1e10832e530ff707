use crate::error::{Error, Result};
use crate::index::{CountTree, Fenwick, SiteSet};
use crate::kernel::{Site, TorusGeometry};

use super::BranchRule;

/// Particle counts on a torus with the indices needed for direct-method
/// event selection: a count tree for uniform particle choice and a rate tree
/// holding `b(count)` per site.
#[derive(Debug, Clone)]
pub struct Occupancy {
    geometry: TorusGeometry,
    rule: BranchRule,
    counts: Vec<u32>,
    total: u64,
    occupied: SiteSet,
    count_tree: CountTree,
    branch: Fenwick,
}

impl Occupancy {
    pub fn empty(geometry: &TorusGeometry, rule: BranchRule) -> Self {
        let n = geometry.num_sites();
        Self {
            geometry: geometry.clone(),
            rule,
            counts: vec![0; n],
            total: 0,
            occupied: SiteSet::new(n),
            count_tree: CountTree::new(n),
            branch: Fenwick::new(n),
        }
    }

    pub fn from_counts(geometry: &TorusGeometry, rule: BranchRule, counts: &[u32]) -> Result<Self> {
        if counts.len() != geometry.num_sites() {
            return Err(Error::Config(format!(
                "{} counts for a torus with {} sites",
                counts.len(),
                geometry.num_sites()
            )));
        }
        let mut occ = Self::empty(geometry, rule);
        for (s, &c) in counts.iter().enumerate() {
            if c > 0 {
                occ.add(s, c as i64);
            }
        }
        Ok(occ)
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn rule(&self) -> &BranchRule {
        &self.rule
    }

    #[inline]
    pub fn count(&self, site: Site) -> u32 {
        self.counts[site]
    }

    pub fn counts(&self) -> &[u32] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Occupied sites with their counts, in no particular order.
    pub fn occupied(&self) -> impl Iterator<Item = (Site, u32)> + '_ {
        self.occupied.iter().map(|s| (s, self.counts[s]))
    }

    /// Sparse `(site, count)` list sorted by site.
    pub fn to_sparse(&self) -> Vec<(Site, u32)> {
        let mut v: Vec<_> = self.occupied().collect();
        v.sort_unstable();
        v
    }

    pub fn branch_rate_total(&self) -> f64 {
        self.branch.total()
    }

    pub fn branch_rate(&self, site: Site) -> f64 {
        self.branch.get(site)
    }

    /// `N + sum_x b(eta_x)`.
    pub fn total_event_rate(&self) -> f64 {
        self.total as f64 + self.branch_rate_total()
    }

    pub fn add(&mut self, site: Site, delta: i64) {
        let old = self.counts[site] as i64;
        let new = old + delta;
        assert!(new >= 0, "negative occupation at site {site}");
        self.counts[site] = new as u32;
        self.total = (self.total as i64 + delta) as u64;
        self.count_tree.add(site, delta);
        if new == 0 {
            self.occupied.remove(site);
        } else {
            self.occupied.insert(site);
        }
        self.branch.set(site, self.rule.rate(new as u32));
    }

    pub fn move_particle(&mut self, from: Site, to: Site) {
        if from != to {
            self.add(from, -1);
            self.add(to, 1);
        }
    }

    /// Site of the `rank`-th particle in site order.
    #[inline]
    pub(crate) fn particle_site(&self, rank: u64) -> Site {
        self.count_tree.find(rank)
    }

    #[inline]
    pub(crate) fn branch_site(&self, target: f64) -> Site {
        self.branch.find(target)
    }

    /// Recompute every index from the counts and compare.
    pub fn check_invariants(&self) -> Result<()> {
        let total: u64 = self.counts.iter().map(|&c| c as u64).sum();
        if total != self.total {
            return Err(Error::Numerical("particle total out of sync".into()));
        }
        let mut rate = 0.0;
        for (s, &c) in self.counts.iter().enumerate() {
            if (c > 0) != self.occupied.contains(s) {
                return Err(Error::Numerical(format!("occupied set wrong at {s}")));
            }
            if self.branch.get(s) != self.rule.rate(c) {
                return Err(Error::Numerical(format!("branch rate cache wrong at {s}")));
            }
            rate += self.rule.rate(c);
        }
        if (rate - self.branch.total()).abs() > 1e-9 * (1.0 + rate) {
            return Err(Error::Numerical("branch rate total drifted".into()));
        }
        Ok(())
    }
}
