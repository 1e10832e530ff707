//! First and second moments of the source-frame process `xi` started from
//! the empty configuration, via the moment ODEs, their Duhamel quadratures,
//! and the trivial-bound majorants.

mod signals;
mod solve;

use std::io::Write;

pub use signals::{hat_table, InputSignals, Provenance};
pub use solve::{
    first_moment_quadrature, solve_first_moment, solve_second_moment, MomentField, MomentModel,
    SolveOptions, CONSISTENCY_TOL, REFINEMENT_TOL, SECOND_MOMENT_STATE_CAP,
};

use crate::error::{Error, Result};
use crate::kernel::{green_integral, JumpKernel, TorusGeometry};

const GREEN_STEPS: usize = 4000;

/// `G(t) = int_0^t p^_0(s) ds` for the symmetrised rate-two walk.
pub fn green(kernel: &JumpKernel, geometry: &TorusGeometry, t: f64) -> Result<f64> {
    if !(t >= 0.0 && t.is_finite()) {
        return Err(Error::Config(format!("time must be >= 0, got {t}")));
    }
    if t == 0.0 {
        return Ok(0.0);
    }
    let h = t / GREEN_STEPS as f64;
    let table = hat_table(kernel, geometry, h, t)?;
    green_integral(&table, t, h * (1.0 + 1e-9))
}

/// `(gamma G(t), 3 gamma^2 G(t)^2 + gamma G(t))`.
pub fn moment_bounds(kernel: &JumpKernel, geometry: &TorusGeometry, gamma: f64, t: f64) -> Result<(f64, f64)> {
    let g = green(kernel, geometry, t)?;
    Ok((gamma * g, 3.0 * gamma * gamma * g * g + gamma * g))
}

/// Paley-Zygmund lower bound `P(Z >= m1 / 2) >= m1^2 / (4 m2)`.
pub fn paley_zygmund(m1: f64, m2: f64) -> Result<f64> {
    if !(m1 > 0.0 && m2 > 0.0) {
        return Err(Error::Domain(format!("moments must be positive (m1 = {m1}, m2 = {m2})")));
    }
    if m2 < m1 * m1 * (1.0 - 1e-12) {
        return Err(Error::Domain(format!(
            "inconsistent moments: m2 = {m2} < m1^2 = {}",
            m1 * m1
        )));
    }
    Ok((0.25 * m1 * m1 / m2).min(0.25))
}

/// `t,x[,y],value,source` rows.
pub fn write_moment_csv<W: Write>(field: &MomentField, source: Provenance, mut w: W) -> Result<()> {
    let n = field.sites;
    if field.pairs {
        writeln!(w, "t,x,y,value,source")?;
    } else {
        writeln!(w, "t,x,value,source")?;
    }
    for (t, row) in field.times.iter().zip(&field.values) {
        if field.pairs {
            for (i, v) in row.iter().enumerate() {
                writeln!(w, "{t},{},{},{v},{}", i / n, i % n, source.tag())?;
            }
        } else {
            for (x, v) in row.iter().enumerate() {
                writeln!(w, "{t},{x},{v},{}", source.tag())?;
            }
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn model(side: usize, gamma: f64) -> MomentModel {
        MomentModel {
            kernel: JumpKernel::simple(1).unwrap(),
            geometry: TorusGeometry::cube(1, side).unwrap(),
            gamma,
        }
    }

    #[test]
    fn paley_zygmund_cases() {
        assert_eq!(paley_zygmund(2.0, 4.0).unwrap(), 0.25);
        assert!((paley_zygmund(1.0, 4.0).unwrap() - 1.0 / 16.0).abs() < 1e-15);
        assert!(paley_zygmund(0.0, 1.0).is_err());
        assert!(paley_zygmund(2.0, 1.0).is_err());
    }

    #[test]
    fn bounds_start_at_zero_and_grow() {
        let k = JumpKernel::simple(1).unwrap();
        let g = TorusGeometry::cube(1, 32).unwrap();
        assert_eq!(moment_bounds(&k, &g, 1.0, 0.0).unwrap(), (0.0, 0.0));
        let a = moment_bounds(&k, &g, 1.0, 1.0).unwrap();
        let b = moment_bounds(&k, &g, 1.0, 2.0).unwrap();
        assert!(a.0 < b.0 && a.1 < b.1);
    }

    #[test]
    fn no_source_means_no_moment() {
        let m = model(16, 1.0);
        let s = InputSignals::constant_vacancy(0.05, 1.0, 0.0).unwrap();
        let f = solve_first_moment(&m, &s, 1.0, &SolveOptions::new(0.01)).unwrap();
        assert!(f.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn unit_vacancy_gives_gamma_green() {
        let m = model(64, 1.5);
        let s = InputSignals::constant_vacancy(0.05, 3.0, 1.0).unwrap();
        let f = solve_first_moment(&m, &s, 3.0, &SolveOptions::new(0.01)).unwrap();
        let g = green(&m.kernel, &m.geometry, 3.0).unwrap();
        let f0 = f.at_site(3.0, 0).unwrap();
        assert!((f0 - 1.5 * g).abs() < 1e-6, "{f0} vs {}", 1.5 * g);
    }

    #[test]
    fn dt_must_divide_step() {
        let m = model(16, 1.0);
        let s = InputSignals::constant_vacancy(0.05, 1.0, 1.0).unwrap();
        assert!(solve_first_moment(&m, &s, 1.0, &SolveOptions::new(0.03)).is_err());
        assert!(solve_first_moment(&m, &s, 2.0, &SolveOptions::new(0.01)).is_err());
    }

    #[test]
    fn second_moment_is_symmetric_and_zero_without_sources() {
        let m = model(8, 1.0);
        let s = InputSignals::bound(&m.kernel, &m.geometry, 1.0, 0.05, 1.0).unwrap();
        let f = solve_second_moment(&m, &s, 1.0, &SolveOptions::new(0.0125)).unwrap();
        let v = f.at(1.0).unwrap();
        for x in 0..8 {
            for y in 0..8 {
                assert!((v[x * 8 + y] - v[y * 8 + x]).abs() < 1e-12);
            }
        }
        let mut zero = s.clone();
        zero.lonely.as_mut().unwrap().iter_mut().flatten().for_each(|v| *v = 0.0);
        zero.cross.as_mut().unwrap().iter_mut().flatten().for_each(|v| *v = 0.0);
        let f = solve_second_moment(&m, &zero, 1.0, &SolveOptions::new(0.0125)).unwrap();
        assert!(f.values.iter().flatten().all(|&v| v == 0.0));
    }

    #[test]
    fn pair_sources_need_per_site_signals() {
        let m = model(8, 1.0);
        let s = InputSignals::constant_vacancy(0.05, 1.0, 1.0).unwrap();
        assert!(matches!(
            solve_second_moment(&m, &s, 1.0, &SolveOptions::new(0.01)),
            Err(Error::Config(_))
        ));
    }
}
