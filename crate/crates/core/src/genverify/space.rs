use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::kernel::{Site, TorusGeometry};

pub type Config = Vec<u8>;

/// Every configuration on a small torus with at most `cap` particles.
#[derive(Debug, Clone)]
pub struct CappedStateSpace {
    geometry: TorusGeometry,
    cap: usize,
    configs: Vec<Config>,
    index: HashMap<Config, usize>,
}

pub const MAX_STATES: usize = 2_000_000;

impl CappedStateSpace {
    pub fn new(geometry: &TorusGeometry, cap: usize) -> Result<Self> {
        if cap > u8::MAX as usize {
            return Err(Error::Config(format!("cap {cap} is too large")));
        }
        let n = geometry.num_sites();
        let mut configs = Vec::new();
        let mut cur = vec![0u8; n];
        fn rec(site: usize, left: usize, cur: &mut Config, out: &mut Vec<Config>, limit: usize) -> bool {
            if out.len() > limit {
                return false;
            }
            if site == cur.len() {
                out.push(cur.clone());
                return true;
            }
            for c in 0..=left {
                cur[site] = c as u8;
                if !rec(site + 1, left - c, cur, out, limit) {
                    return false;
                }
            }
            cur[site] = 0;
            true
        }
        if !rec(0, cap, &mut cur, &mut configs, MAX_STATES) {
            return Err(Error::CapExceeded(format!(
                "more than {MAX_STATES} configurations with {n} sites and cap {cap}"
            )));
        }
        let index = configs.iter().enumerate().map(|(i, c)| (c.clone(), i)).collect();
        Ok(Self {
            geometry: geometry.clone(),
            cap,
            configs,
            index,
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    pub fn cap(&self) -> usize {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.configs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.configs.is_empty()
    }

    pub fn config(&self, i: usize) -> &Config {
        &self.configs[i]
    }

    pub fn configs(&self) -> &[Config] {
        &self.configs
    }

    pub fn index_of(&self, c: &Config) -> Option<usize> {
        self.index.get(c).copied()
    }

    pub fn total(c: &Config) -> usize {
        c.iter().map(|&v| v as usize).sum()
    }
}

pub(crate) fn moved(c: &Config, from: Site, to: Site) -> Config {
    let mut d = c.clone();
    d[from] -= 1;
    d[to] += 1;
    d
}

pub(crate) fn plus(c: &Config, x: Site) -> Config {
    let mut d = c.clone();
    d[x] += 1;
    d
}

pub(crate) fn minus(c: &Config, x: Site) -> Config {
    let mut d = c.clone();
    d[x] -= 1;
    d
}

/// `(theta_z c)_y = c_{z + y}`.
pub(crate) fn shifted(geometry: &TorusGeometry, c: &Config, z: Site) -> Config {
    (0..c.len()).map(|y| c[geometry.add(z, y)]).collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn enumeration_is_a_bijection() {
        let g = TorusGeometry::cube(1, 4).unwrap();
        let s = CappedStateSpace::new(&g, 3).unwrap();
        // C(4 + 3, 3)
        assert_eq!(s.len(), 35);
        for (i, c) in s.configs().iter().enumerate() {
            assert_eq!(s.index_of(c), Some(i));
            assert!(CappedStateSpace::total(c) <= 3);
        }
        let g2 = TorusGeometry::cube(2, 3).unwrap();
        assert_eq!(CappedStateSpace::new(&g2, 3).unwrap().len(), 220);
    }
}
