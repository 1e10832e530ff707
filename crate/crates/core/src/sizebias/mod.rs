//! The locally size-biased system with a selected bridge particle, and the
//! process seen from the immigration source.

mod bridge;
mod selected;
mod xi;

use std::io::Write;

use serde::{Deserialize, Serialize};

pub use bridge::{sample_bridge, BridgePath, RateBridge, DEFAULT_REJECTION_BUDGET};
pub use selected::{
    sample_source_start, simulate_xitilde, Particle, SelectedConfig, SourceIntensity, XiTildeRun,
    XiTildeSampler,
};
pub use xi::{run_xi, simulate_xi, XiEventKind, XiModel, XiState};

use crate::error::{Error, Result};
use crate::kernel::{Site, TorusGeometry};
use crate::seeding::{replica_rng, try_run_replicas};
use crate::sim::{run_eta, EtaModel};
use crate::stats::{ratio_estimate, z_score, MeanEstimate};

/// Finite configuration in source coordinates (origin = source).
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct XiConfig {
    sides: Vec<usize>,
    counts: Vec<(Site, u32)>,
    total: u64,
}

impl XiConfig {
    pub fn from_sparse(geometry: &TorusGeometry, mut counts: Vec<(Site, u32)>) -> Self {
        counts.retain(|&(_, c)| c > 0);
        counts.sort_unstable();
        let total = counts.iter().map(|&(_, c)| c as u64).sum();
        Self {
            sides: geometry.sides().to_vec(),
            counts,
            total,
        }
    }

    pub fn from_dense(geometry: &TorusGeometry, counts: &[u32]) -> Self {
        Self::from_sparse(
            geometry,
            counts.iter().enumerate().map(|(s, &c)| (s, c)).collect(),
        )
    }

    pub fn sides(&self) -> &[usize] {
        &self.sides
    }

    pub fn count(&self, z: Site) -> u32 {
        self.counts
            .binary_search_by_key(&z, |&(s, _)| s)
            .map_or(0, |i| self.counts[i].1)
    }

    pub fn counts(&self) -> &[(Site, u32)] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    /// Coordinatewise `self <= other`.
    pub fn dominated_by(&self, other: &XiConfig) -> bool {
        self.counts.iter().all(|&(z, c)| c <= other.count(z))
    }
}

/// Relatives of the selected particle, recentred at its final position.
pub fn extract_relatives(cfg: &SelectedConfig, path: &BridgePath) -> XiConfig {
    debug_assert_eq!(cfg.selected().site, path.position_at(path.horizon));
    cfg.relatives()
}

/// Bounded functional of a configuration seen from the target site `x`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TestFunction {
    One,
    /// `1{eta_{x+offset} = k}`
    CountEq { offset: Vec<i64>, k: u32 },
    /// `1{eta_{x+offset} >= k}`
    CountAtLeast { offset: Vec<i64>, k: u32 },
}

impl TestFunction {
    pub fn name(&self) -> String {
        let off = |o: &[i64]| {
            o.iter()
                .map(|v| format!("{v:+}"))
                .collect::<Vec<_>>()
                .join(";")
        };
        match self {
            Self::One => "one".into(),
            Self::CountEq { offset, k } => format!("count[x{}]=={k}", off(offset)),
            Self::CountAtLeast { offset, k } => format!("count[x{}]>={k}", off(offset)),
        }
    }

    pub fn eval(&self, geometry: &TorusGeometry, x: Site, count: impl Fn(Site) -> u32) -> f64 {
        let at = |o: &[i64]| count(geometry.add(x, geometry.wrap(o)));
        let b = match self {
            Self::One => true,
            Self::CountEq { offset, k } => at(offset) == *k,
            Self::CountAtLeast { offset, k } => at(offset) >= *k,
        };
        b as u8 as f64
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeBiasRow {
    pub test: String,
    pub side_a: MeanEstimate,
    pub side_b: MeanEstimate,
    pub z: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct SizeBiasReport {
    pub rows: Vec<SizeBiasRow>,
    pub replicas: usize,
    /// Mean of `eta_x(T)` on side B.
    pub denominator: MeanEstimate,
}

impl SizeBiasReport {
    pub fn max_abs_z(&self) -> f64 {
        self.rows.iter().map(|r| r.z.abs()).fold(0.0, f64::max)
    }

    /// `testFn,sideA,sideA_CI,sideB,sideB_CI,z` with 95% half-widths.
    pub fn write_csv<W: Write>(&self, mut w: W) -> Result<()> {
        writeln!(w, "testFn,sideA,sideA_CI,sideB,sideB_CI,z")?;
        for r in &self.rows {
            writeln!(
                w,
                "{},{},{},{},{},{}",
                r.test,
                r.side_a.mean,
                1.96 * r.side_a.se,
                r.side_b.mean,
                1.96 * r.side_b.se,
                r.z
            )?;
        }
        Ok(())
    }
}

/// Compare `E f(xi~)` with `E[eta_x(T) f(eta(T))] / E[eta_x(T)]` using
/// independent replica pools for the two sides.
pub fn verify_sizebias_identity(
    model: &EtaModel,
    x: Site,
    horizon: f64,
    tests: &[TestFunction],
    replicas: usize,
    seed: u64,
) -> Result<SizeBiasReport> {
    if replicas < 2 {
        return Err(Error::Config("need at least two replicas per side".into()));
    }
    let sampler = XiTildeSampler::new(model, x, horizon)?;
    let geom = &model.geometry;
    let (a, b) = rayon::join(
        || {
            try_run_replicas(seed, "sizebias/a", replicas, |_, rng| {
                let cfg = sampler.sample(rng, false)?.config;
                Ok::<_, Error>(tests.iter().map(|f| f.eval(geom, x, |s| cfg.count(s))).collect::<Vec<_>>())
            })
        },
        || {
            try_run_replicas(seed, "sizebias/b", replicas, |_, rng| {
                let mut occ = model.sample_initial(rng)?;
                let mut out = (0.0, Vec::new());
                run_eta(model, &mut occ, &[horizon], rng, None, |_, o| {
                    out.0 = o.count(x) as f64;
                    out.1 = tests.iter().map(|f| f.eval(geom, x, |s| o.count(s))).collect();
                })?;
                Ok::<_, Error>(out)
            })
        },
    );
    let (a, b) = (a?, b?);
    let weights: Vec<f64> = b.iter().map(|r| r.0).collect();
    let denominator = MeanEstimate::from_samples(weights.iter().copied());
    if !(denominator.mean > 0.0) {
        return Err(Error::Numerical(format!(
            "side B denominator mean eta_x(T) = {} is not positive",
            denominator.mean
        )));
    }
    let rows = tests
        .iter()
        .enumerate()
        .map(|(j, f)| {
            let side_a = MeanEstimate::from_samples(a.iter().map(|r| r[j]));
            let num: Vec<f64> = b.iter().map(|r| r.0 * r.1[j]).collect();
            let side_b = ratio_estimate(&weights, &num);
            SizeBiasRow {
                test: f.name(),
                z: z_score(&side_a, &side_b),
                side_a,
                side_b,
            }
        })
        .collect();
    Ok(SizeBiasReport {
        rows,
        replicas,
        denominator,
    })
}

/// One size-biased run, seeded like the replica pools.
pub fn xitilde_replica(sampler: &XiTildeSampler, seed: u64, index: u64) -> Result<XiTildeRun> {
    let mut rng = replica_rng(seed, "xitilde", index);
    sampler.sample(&mut rng, true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kernel::JumpKernel;
    use crate::sim::{BranchRule, InitialLaw};

    #[test]
    fn constant_function_is_exact() {
        let m = EtaModel::new(
            JumpKernel::simple(1).unwrap(),
            TorusGeometry::cube(1, 8).unwrap(),
            BranchRule::lonely(1.0),
            InitialLaw::Poisson { lambda: 0.5 },
        )
        .unwrap();
        let r = verify_sizebias_identity(&m, 0, 1.0, &[TestFunction::One], 200, 1).unwrap();
        assert_eq!(r.rows[0].side_a.mean, 1.0);
        assert!((r.rows[0].side_b.mean - 1.0).abs() < 1e-12);
        assert_eq!(r.rows[0].z, 0.0);
    }

    #[test]
    fn test_function_names_and_values() {
        let g = TorusGeometry::cube(1, 8).unwrap();
        let f = TestFunction::CountEq { offset: vec![-1], k: 2 };
        assert_eq!(f.name(), "count[x-1]==2");
        let counts = [0, 2, 0, 0, 0, 0, 0, 0];
        assert_eq!(f.eval(&g, 2, |s| counts[s]), 1.0);
        assert_eq!(f.eval(&g, 3, |s| counts[s]), 0.0);
        let g2 = TestFunction::CountAtLeast { offset: vec![0], k: 1 };
        assert_eq!(g2.eval(&g, 1, |s| counts[s]), 1.0);
    }

    #[test]
    fn domination_order() {
        let g = TorusGeometry::cube(1, 5).unwrap();
        let a = XiConfig::from_dense(&g, &[1, 0, 2, 0, 0]);
        let b = XiConfig::from_dense(&g, &[1, 1, 2, 0, 0]);
        assert!(a.dominated_by(&b));
        assert!(!b.dominated_by(&a));
        assert_eq!(b.total(), 4);
    }
}
