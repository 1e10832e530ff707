//! Jump kernels, torus geometry and the transition-probability substrate.
//!
//! Every simulator and every deterministic oracle in the crate consumes the
//! objects defined here: a [`JumpKernel`] on `Z^d`, its image on a finite
//! [`TorusGeometry`], and precomputed [`TransitionTable`]s obtained by
//! Fourier inversion over the torus frequencies.

mod cache;
mod fft;
mod torus;
mod transition;

pub use cache::{load_table, save_table, table_cache_key};
pub use torus::{Site, TorusGeometry, TorusKernel};
pub use transition::{
    bridge_rates, displacement_tail_mass, green_integral, pair_transition, pair_transition_series,
    recommended_side, transition_probs, PairField, TransitionTable, DEFAULT_PAIR_STATE_CAP,
};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Tolerance on `sum(p) == 1` for a declared kernel.
pub const KERNEL_SUM_TOL: f64 = 1e-12;

/// Finite-support probability distribution of single-walk increments on `Z^d`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct JumpKernel {
    dimension: usize,
    support: Vec<(Vec<i64>, f64)>,
}

impl JumpKernel {
    pub fn new(dimension: usize, support: Vec<(Vec<i64>, f64)>) -> Result<Self> {
        if dimension == 0 {
            return Err(Error::InvalidKernel("dimension must be positive".into()));
        }
        if support.is_empty() {
            return Err(Error::InvalidKernel("empty support".into()));
        }
        let mut total = 0.0;
        for (i, (offset, prob)) in support.iter().enumerate() {
            if offset.len() != dimension {
                return Err(Error::InvalidKernel(format!(
                    "offset {offset:?} has {} components, expected {dimension}",
                    offset.len()
                )));
            }
            if !(*prob > 0.0 && *prob <= 1.0) {
                return Err(Error::InvalidKernel(format!(
                    "probability {prob} of offset {offset:?} not in (0,1]"
                )));
            }
            if support[..i].iter().any(|(o, _)| o == offset) {
                return Err(Error::InvalidKernel(format!("duplicate offset {offset:?}")));
            }
            total += prob;
        }
        if (total - 1.0).abs() > KERNEL_SUM_TOL {
            return Err(Error::InvalidKernel(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        let kernel = Self { dimension, support };
        if !kernel.generates_lattice() {
            return Err(Error::InvalidKernel(
                "support offsets do not generate Z^d (kernel is not irreducible)".into(),
            ));
        }
        Ok(kernel)
    }

    /// Nearest-neighbour symmetric walk on `Z^d`.
    pub fn simple(dimension: usize) -> Result<Self> {
        let w = 1.0 / (2 * dimension) as f64;
        let mut support = Vec::with_capacity(2 * dimension);
        for axis in 0..dimension {
            for sign in [1i64, -1] {
                let mut o = vec![0; dimension];
                o[axis] = sign;
                support.push((o, w));
            }
        }
        Self::new(dimension, support)
    }

    /// Totally asymmetric nearest-neighbour walk: every jump is `+e_axis`.
    pub fn one_way(dimension: usize) -> Result<Self> {
        let w = 1.0 / dimension as f64;
        let support = (0..dimension)
            .map(|axis| {
                let mut o = vec![0; dimension];
                o[axis] = 1;
                (o, w)
            })
            .collect();
        Self::new(dimension, support)
    }

    pub fn dimension(&self) -> usize {
        self.dimension
    }

    pub fn support(&self) -> &[(Vec<i64>, f64)] {
        &self.support
    }

    pub fn prob(&self, offset: &[i64]) -> f64 {
        self.support
            .iter()
            .find(|(o, _)| o.as_slice() == offset)
            .map_or(0.0, |(_, p)| *p)
    }

    pub fn is_symmetric(&self) -> bool {
        self.support.iter().all(|(o, p)| {
            let neg: Vec<i64> = o.iter().map(|c| -c).collect();
            (self.prob(&neg) - p).abs() <= KERNEL_SUM_TOL
        })
    }

    /// Largest sup-norm of a support offset.
    pub fn max_offset(&self) -> i64 {
        self.support
            .iter()
            .flat_map(|(o, _)| o.iter().map(|c| c.abs()))
            .max()
            .unwrap_or(0)
    }

    /// Largest per-coordinate standard deviation of one increment.
    pub fn max_coordinate_std(&self) -> f64 {
        (0..self.dimension)
            .map(|axis| {
                let mean: f64 = self.support.iter().map(|(o, p)| o[axis] as f64 * p).sum();
                let second: f64 = self
                    .support
                    .iter()
                    .map(|(o, p)| (o[axis] as f64).powi(2) * p)
                    .sum();
                (second - mean * mean).max(0.0).sqrt()
            })
            .fold(0.0, f64::max)
    }

    /// Stable content hash used to key cached tables.
    pub fn content_hash(&self) -> [u8; 32] {
        let mut entries: Vec<&(Vec<i64>, f64)> = self.support.iter().collect();
        entries.sort_by(|a, b| a.0.cmp(&b.0));
        let mut hasher = Sha256::new();
        hasher.update((self.dimension as u64).to_le_bytes());
        for (o, p) in entries {
            for c in o {
                hasher.update(c.to_le_bytes());
            }
            hasher.update(p.to_bits().to_le_bytes());
        }
        hasher.finalize().into()
    }

    /// Whether the additive group generated by the support is all of `Z^d`.
    ///
    /// Row-reduces the offsets to Hermite form over the integers; the group is
    /// the full lattice iff the reduced basis has `d` pivots all equal to one.
    pub fn generates_lattice(&self) -> bool {
        let d = self.dimension;
        let mut rows: Vec<Vec<i128>> = self
            .support
            .iter()
            .map(|(o, _)| o.iter().map(|&c| c as i128).collect())
            .filter(|r: &Vec<i128>| r.iter().any(|&c| c != 0))
            .collect();
        let mut pivot_row = 0;
        for col in 0..d {
            // Euclid on column `col` among rows >= pivot_row.
            loop {
                let nonzero: Vec<usize> = (pivot_row..rows.len())
                    .filter(|&r| rows[r][col] != 0)
                    .collect();
                if nonzero.len() <= 1 {
                    if let Some(&r) = nonzero.first() {
                        rows.swap(pivot_row, r);
                    } else {
                        return false;
                    }
                    break;
                }
                let min_r = *nonzero
                    .iter()
                    .min_by_key(|&&r| rows[r][col].abs())
                    .unwrap();
                for &r in &nonzero {
                    if r != min_r {
                        let q = rows[r][col] / rows[min_r][col];
                        let (src, dst) = (rows[min_r].clone(), &mut rows[r]);
                        for (a, b) in dst.iter_mut().zip(src) {
                            *a -= q * b;
                        }
                    }
                }
            }
            if rows[pivot_row][col].abs() != 1 {
                return false;
            }
            pivot_row += 1;
        }
        true
    }
}

/// Symmetrised kernel `(p_x + p_{-x}) / 2`.
pub fn symmetrize(kernel: &JumpKernel) -> JumpKernel {
    let mut support: Vec<(Vec<i64>, f64)> = Vec::new();
    let mut add = |o: Vec<i64>, w: f64| {
        if let Some(entry) = support.iter_mut().find(|(e, _)| *e == o) {
            entry.1 += w;
        } else {
            support.push((o, w));
        }
    };
    for (o, p) in kernel.support() {
        add(o.clone(), p / 2.0);
        add(o.iter().map(|c| -c).collect(), p / 2.0);
    }
    JumpKernel {
        dimension: kernel.dimension(),
        support,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn sorted(k: &JumpKernel) -> Vec<(Vec<i64>, f64)> {
        let mut s = k.support().to_vec();
        s.sort_by(|a, b| a.0.cmp(&b.0));
        s
    }

    #[test]
    fn symmetric_simple_walk_is_unchanged() {
        let k = JumpKernel::simple(1).unwrap();
        assert_eq!(sorted(&symmetrize(&k)), sorted(&k));
    }

    #[test]
    fn one_way_walk_symmetrizes_to_simple() {
        let k = JumpKernel::one_way(1).unwrap();
        let s = symmetrize(&k);
        assert_eq!(sorted(&s), vec![(vec![-1], 0.5), (vec![1], 0.5)]);
        assert!(s.is_symmetric());
    }

    #[test]
    fn planar_symmetrization() {
        let k = JumpKernel::new(2, vec![(vec![1, 0], 0.7), (vec![0, 1], 0.3)]).unwrap();
        let s = symmetrize(&k);
        let want = [
            (vec![1, 0], 0.35),
            (vec![-1, 0], 0.35),
            (vec![0, 1], 0.15),
            (vec![0, -1], 0.15),
        ];
        assert_eq!(s.support().len(), 4);
        for (o, p) in want {
            assert!((s.prob(&o) - p).abs() < 1e-15, "{o:?}");
        }
        let total: f64 = s.support().iter().map(|(_, p)| p).sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_kernels() {
        assert!(JumpKernel::new(1, vec![(vec![1], 0.5)]).is_err());
        assert!(JumpKernel::new(1, vec![(vec![1], 0.5), (vec![1], 0.5)]).is_err());
        assert!(JumpKernel::new(1, vec![(vec![2], 0.5), (vec![-2], 0.5)]).is_err());
        assert!(JumpKernel::new(1, vec![(vec![1], 1.0), (vec![-1], 0.0)]).is_err());
        assert!(JumpKernel::new(2, vec![(vec![1, 1], 0.5), (vec![-1, 1], 0.5)]).is_err());
        assert!(JumpKernel::new(2, vec![(vec![1], 1.0)]).is_err());
    }

    #[test]
    fn lattice_generation_by_gcd() {
        // 2 and 3 generate Z.
        assert!(JumpKernel::new(1, vec![(vec![2], 0.5), (vec![3], 0.5)]).is_ok());
        // (1,1),(1,-1),(1,0) generate Z^2.
        assert!(JumpKernel::new(
            2,
            vec![(vec![1, 1], 0.25), (vec![1, -1], 0.25), (vec![1, 0], 0.5)]
        )
        .is_ok());
        assert!(JumpKernel::one_way(3).is_ok());
    }
}
