//! Exact generator checks on capped state spaces of tiny tori.
//!
//! Every identity is evaluated on configurations whose one-event neighbours
//! all stay within the cap, so truncation never enters a residual.

mod checks;
mod operator;
mod space;

use std::io::Write;

use rand::Rng;

pub use checks::{
    check_h_harmonic, check_hat_generator, check_intertwining, check_moment_identities,
    check_s_normalization,
};
pub use operator::{build_eta_generator, build_xi_generator, OperatorMatrix};
pub use space::{CappedStateSpace, Config, MAX_STATES};

use crate::error::Result;
use crate::kernel::{JumpKernel, TorusGeometry, TorusKernel};
use crate::seeding::replica_rng;
use crate::sim::BranchRule;

pub const IDENTITY_TOL: f64 = 1e-9;

#[derive(Debug, Clone)]
pub struct VerifyCase {
    pub kernel_name: String,
    pub kernel: JumpKernel,
    pub side: usize,
    pub cap: usize,
    pub gamma: f64,
    pub horizon: f64,
    pub times: Vec<f64>,
    pub target: usize,
    pub random_functions: usize,
    pub seed: u64,
}

impl VerifyCase {
    pub fn new(kernel_name: &str, kernel: JumpKernel, side: usize, cap: usize, gamma: f64) -> Self {
        Self {
            kernel_name: kernel_name.into(),
            kernel,
            side,
            cap,
            gamma,
            horizon: 1.0,
            times: vec![0.1, 0.3, 0.5, 0.7, 0.9],
            target: 0,
            random_functions: 4,
            seed: 7,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationRow {
    pub identity: String,
    pub kernel: String,
    pub dimension: usize,
    pub side: usize,
    pub cap: usize,
    pub gamma: f64,
    pub max_residual: f64,
    pub pass: bool,
}

fn random_functions(n: usize, count: usize, seed: u64, label: &str) -> Vec<Vec<f64>> {
    let mut fs = vec![vec![1.0; n]];
    for k in 0..count {
        let mut rng = replica_rng(seed, label, k as u64);
        fs.push((0..n).map(|_| rng.random_range(-1.0..=1.0)).collect());
    }
    fs
}

/// Runs every identity for one case.
pub fn run_case(case: &VerifyCase) -> Result<Vec<VerificationRow>> {
    let d = case.kernel.dimension();
    let geom = TorusGeometry::cube(d, case.side)?;
    let tk = TorusKernel::new(&case.kernel, &geom)?;
    let space = CappedStateSpace::new(&geom, case.cap)?;
    let rule = BranchRule::lonely(case.gamma);
    let fs = random_functions(space.len(), case.random_functions, case.seed, "genverify/f");
    let row = |identity: &str, r: f64| VerificationRow {
        identity: identity.into(),
        kernel: case.kernel_name.clone(),
        dimension: d,
        side: case.side,
        cap: case.cap,
        gamma: case.gamma,
        max_residual: r,
        pass: r <= IDENTITY_TOL,
    };
    let defect = |m: &OperatorMatrix| {
        let (sum, min_off) = m.generator_defects();
        if min_off < 0.0 { f64::INFINITY } else { sum }
    };
    let mut rows = vec![
        row("eta-generator-rows", defect(&build_eta_generator(&space, &tk, &rule))),
        row("xi-generator-rows", defect(&build_xi_generator(&space, &tk, case.gamma))),
    ];
    let (m1, m2) = check_moment_identities(&space, &tk, case.gamma);
    rows.push(row("first-moment", m1));
    rows.push(row("second-moment", m2));
    let (x0, t, times) = (case.target, case.horizon, &case.times);
    rows.push(row("s-normalization", check_s_normalization(&space, &case.kernel, x0, t, times)?));
    rows.push(row("h-harmonic", check_h_harmonic(&space, &case.kernel, &rule, x0, t, times)?));
    rows.push(row(
        "hat-generator",
        check_hat_generator(&space, &case.kernel, &rule, x0, t, times, &fs)?,
    ));
    rows.push(row(
        "intertwining",
        check_intertwining(&space, &case.kernel, case.gamma, x0, t, times, &fs)?,
    ));
    Ok(rows)
}

/// The default grid: symmetric and asymmetric kernels, `d = 1` with sides 3
/// and 4, `d = 2` with side 3, cap 3 and three branching rates.
pub fn default_suite() -> Result<Vec<VerifyCase>> {
    let kernels = [
        ("simple-1d", JumpKernel::simple(1)?, vec![3, 4]),
        ("drift-1d", JumpKernel::new(1, vec![(vec![1], 0.7), (vec![-1], 0.3)])?, vec![3, 4]),
        ("simple-2d", JumpKernel::simple(2)?, vec![3]),
        (
            "drift-2d",
            JumpKernel::new(
                2,
                vec![
                    (vec![1, 0], 0.4),
                    (vec![-1, 0], 0.1),
                    (vec![0, 1], 0.3),
                    (vec![0, -1], 0.2),
                ],
            )?,
            vec![3],
        ),
    ];
    let mut out = Vec::new();
    for (name, k, sides) in kernels {
        for side in sides {
            for gamma in [0.5, 1.0, 2.0] {
                out.push(VerifyCase::new(name, k.clone(), side, 3, gamma));
            }
        }
    }
    Ok(out)
}

pub fn write_report_csv<W: Write>(rows: &[VerificationRow], mut w: W) -> std::io::Result<()> {
    writeln!(w, "identity,kernel,d,L,cap,gamma,max_residual,pass")?;
    for r in rows {
        writeln!(
            w,
            "{},{},{},{},{},{},{:e},{}",
            r.identity, r.kernel, r.dimension, r.side, r.cap, r.gamma, r.max_residual, r.pass
        )?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn one_dimensional_cases_pass() {
        for case in default_suite().unwrap().iter().filter(|c| c.kernel.dimension() == 1) {
            for r in run_case(case).unwrap() {
                assert!(r.pass, "{r:?}");
            }
        }
    }

    #[test]
    fn hat_generator_holds_for_other_rules() {
        let geom = TorusGeometry::cube(1, 3).unwrap();
        let k = JumpKernel::new(1, vec![(vec![1], 0.7), (vec![-1], 0.3)]).unwrap();
        let space = CappedStateSpace::new(&geom, 4).unwrap();
        let fs = random_functions(space.len(), 3, 11, "t");
        let times = [0.2, 0.6];
        for rule in [BranchRule::Linear { c: 0.8 }, BranchRule::JStar { gamma: 1.5, j: 2 }] {
            let r = check_hat_generator(&space, &k, &rule, 1, 1.0, &times, &fs).unwrap();
            assert!(r < IDENTITY_TOL, "{rule:?} {r}");
            let h = check_h_harmonic(&space, &k, &rule, 1, 1.0, &times).unwrap();
            assert!(h < IDENTITY_TOL, "{rule:?} {h}");
        }
    }

    #[test]
    fn perturbed_identity_is_detected() {
        // Dropping the immigration term must break the first moment identity.
        let geom = TorusGeometry::cube(1, 3).unwrap();
        let tk = TorusKernel::new(&JumpKernel::simple(1).unwrap(), &geom).unwrap();
        let space = CappedStateSpace::new(&geom, 3).unwrap();
        let (good, _) = check_moment_identities(&space, &tk, 1.0);
        assert!(good < IDENTITY_TOL);
        let l = build_xi_generator(&space, &tk, 1.0);
        let empty = space.index_of(&vec![0, 0, 0]).unwrap();
        assert!((l.apply_row(empty, |j| space.config(j)[0] as f64) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn intertwining_fails_with_wrong_selected_birth_rate() {
        let geom = TorusGeometry::cube(1, 3).unwrap();
        let k = JumpKernel::one_way(1).unwrap();
        let space = CappedStateSpace::new(&geom, 3).unwrap();
        let fs = random_functions(space.len(), 2, 3, "t");
        let r = check_intertwining(&space, &k, 1.0, 0, 1.0, &[0.5], &fs).unwrap();
        assert!(r < IDENTITY_TOL, "{r}");
        let bad = checks::intertwining_residual(&space, &k, 1.0, 0, 1.0, &[0.5], &fs, 0.5).unwrap();
        assert!(bad > 1e-3, "{bad}");
        let hat = check_hat_generator(&space, &k, &BranchRule::lonely(2.0), 0, 1.0, &[0.5], &fs).unwrap();
        assert!(hat < IDENTITY_TOL);
    }

    #[test]
    fn two_dimensional_drift_case_passes() {
        let case = default_suite().unwrap().into_iter().find(|c| c.kernel_name == "drift-2d").unwrap();
        for r in run_case(&case).unwrap() {
            assert!(r.pass, "{r:?}");
        }
    }

    #[test]
    fn report_header() {
        let mut buf = Vec::new();
        write_report_csv(&[], &mut buf).unwrap();
        assert_eq!(String::from_utf8(buf).unwrap().trim(), "identity,kernel,d,L,cap,gamma,max_residual,pass");
    }
}
