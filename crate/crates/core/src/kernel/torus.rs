use serde::{Deserialize, Serialize};

use super::JumpKernel;
use crate::error::{Error, Result};

/// Linear index of a torus site (row-major over the coordinates).
pub type Site = usize;

/// Finite torus `Z_{L_1} x ... x Z_{L_d}`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct TorusGeometry {
    sides: Vec<usize>,
}

impl TorusGeometry {
    pub fn new(sides: Vec<usize>) -> Result<Self> {
        if sides.is_empty() {
            return Err(Error::InvalidGeometry("dimension must be positive".into()));
        }
        if let Some(bad) = sides.iter().find(|&&l| l < 3) {
            return Err(Error::InvalidGeometry(format!(
                "side length {bad} is below the minimum of 3"
            )));
        }
        let total = sides
            .iter()
            .try_fold(1usize, |acc, &l| acc.checked_mul(l))
            .filter(|&n| n <= u32::MAX as usize);
        if total.is_none() {
            return Err(Error::InvalidGeometry("too many sites".into()));
        }
        Ok(Self { sides })
    }

    pub fn cube(dimension: usize, side: usize) -> Result<Self> {
        Self::new(vec![side; dimension])
    }

    pub fn dimension(&self) -> usize {
        self.sides.len()
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn num_sites(&self) -> usize {
        self.sides.iter().product()
    }

    pub fn origin(&self) -> Site {
        0
    }

    pub fn coords(&self, site: Site) -> Vec<usize> {
        let mut rest = site;
        let mut out = vec![0; self.sides.len()];
        for (axis, &l) in self.sides.iter().enumerate().rev() {
            out[axis] = rest % l;
            rest /= l;
        }
        out
    }

    /// Map a point of `Z^d` onto the torus.
    pub fn wrap(&self, point: &[i64]) -> Site {
        debug_assert_eq!(point.len(), self.sides.len());
        point
            .iter()
            .zip(&self.sides)
            .fold(0, |acc, (&c, &l)| acc * l + c.rem_euclid(l as i64) as usize)
    }

    pub fn add(&self, a: Site, b: Site) -> Site {
        self.combine(a, b, |x, y, l| (x + y) % l)
    }

    pub fn sub(&self, a: Site, b: Site) -> Site {
        self.combine(a, b, |x, y, l| (x + l - y) % l)
    }

    pub fn neg(&self, a: Site) -> Site {
        self.sub(0, a)
    }

    fn combine(&self, a: Site, b: Site, op: impl Fn(usize, usize, usize) -> usize) -> Site {
        if self.sides.len() == 1 {
            return op(a, b, self.sides[0]);
        }
        let (mut ra, mut rb) = (a, b);
        let mut out = 0;
        let mut stride = 1;
        for &l in self.sides.iter().rev() {
            out += op(ra % l, rb % l, l) * stride;
            ra /= l;
            rb /= l;
            stride *= l;
        }
        out
    }
}

/// A jump kernel projected onto a torus: increments as torus elements, with
/// offsets that coincide modulo the sides merged.
#[derive(Debug, Clone)]
pub struct TorusKernel {
    geometry: TorusGeometry,
    entries: Vec<(Site, f64)>,
    cumulative: Vec<f64>,
}

impl TorusKernel {
    pub fn new(kernel: &JumpKernel, geometry: &TorusGeometry) -> Result<Self> {
        if kernel.dimension() != geometry.dimension() {
            return Err(Error::InvalidGeometry(format!(
                "kernel dimension {} does not match torus dimension {}",
                kernel.dimension(),
                geometry.dimension()
            )));
        }
        let mut entries: Vec<(Site, f64)> = Vec::new();
        for (offset, p) in kernel.support() {
            let s = geometry.wrap(offset);
            match entries.iter_mut().find(|(e, _)| *e == s) {
                Some(entry) => entry.1 += p,
                None => entries.push((s, *p)),
            }
        }
        let mut acc = 0.0;
        let cumulative = entries
            .iter()
            .map(|(_, p)| {
                acc += p;
                acc
            })
            .collect();
        Ok(Self {
            geometry: geometry.clone(),
            entries,
            cumulative,
        })
    }

    pub fn geometry(&self) -> &TorusGeometry {
        &self.geometry
    }

    /// `(increment, probability)` pairs; increments are distinct torus elements.
    pub fn entries(&self) -> &[(Site, f64)] {
        &self.entries
    }

    /// `p_{from,to}` on the torus.
    pub fn prob(&self, from: Site, to: Site) -> f64 {
        let d = self.geometry.sub(to, from);
        self.entries
            .iter()
            .find(|(e, _)| *e == d)
            .map_or(0.0, |(_, p)| *p)
    }

    /// Draw an increment index from a uniform variate in `[0,1)`.
    #[inline]
    pub fn pick(&self, u: f64) -> usize {
        let target = u * self.cumulative[self.cumulative.len() - 1];
        self.cumulative
            .iter()
            .position(|&c| target < c)
            .unwrap_or(self.entries.len() - 1)
    }

    #[inline]
    pub fn step(&self, site: Site, entry: usize) -> Site {
        self.geometry.add(site, self.entries[entry].0)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_small_sides() {
        assert!(TorusGeometry::new(vec![2]).is_err());
        assert!(TorusGeometry::new(vec![]).is_err());
        assert!(TorusGeometry::new(vec![3, 5]).is_ok());
    }

    #[test]
    fn coords_roundtrip() {
        let g = TorusGeometry::new(vec![3, 4, 5]).unwrap();
        for s in 0..g.num_sites() {
            let c: Vec<i64> = g.coords(s).iter().map(|&c| c as i64).collect();
            assert_eq!(g.wrap(&c), s);
        }
    }

    #[test]
    fn merged_offsets_on_small_torus() {
        let k = JumpKernel::new(1, vec![(vec![2], 0.25), (vec![-1], 0.5), (vec![1], 0.25)]).unwrap();
        let g = TorusGeometry::new(vec![3]).unwrap();
        let tk = TorusKernel::new(&k, &g).unwrap();
        // +2 == -1 mod 3.
        assert_eq!(tk.entries().len(), 2);
        assert!((tk.prob(0, 2) - 0.75).abs() < 1e-15);
    }

    proptest! {
        #[test]
        fn wrap_is_a_homomorphism(
            a in proptest::collection::vec(-50i64..50, 2),
            b in proptest::collection::vec(-50i64..50, 2),
        ) {
            let g = TorusGeometry::new(vec![5, 7]).unwrap();
            let sum: Vec<i64> = a.iter().zip(&b).map(|(x, y)| x + y).collect();
            prop_assert_eq!(g.wrap(&sum), g.add(g.wrap(&a), g.wrap(&b)));
            prop_assert_eq!(g.sub(g.wrap(&sum), g.wrap(&b)), g.wrap(&a));
        }
    }
}
