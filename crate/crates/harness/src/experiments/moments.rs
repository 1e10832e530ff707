use lonelywalks_core::kernel::TorusGeometry;
use lonelywalks_core::moments::{
    first_moment_quadrature, hat_table, solve_first_moment, solve_second_moment, write_moment_csv, InputSignals,
    MomentField, MomentModel, SolveOptions, CONSISTENCY_TOL,
};
use lonelywalks_core::seeding::try_run_replicas;
use lonelywalks_core::sizebias::{run_xi, XiModel};
use lonelywalks_core::stats::MeanEstimate;
use lonelywalks_core::Error;

use super::{column, params_echo, xi_origin_paths};
use crate::config::ExperimentConfig;
use crate::output::{Artifact, Gate, Outcome, ResultRow};

pub const NAME: &str = "moment-consistency";

pub const DEFAULTS: &str = r#"
experiment = "moment-consistency"
seed = 3
replicas = 10000
horizon = 20.0
times = [1.0, 5.0, 20.0]
dt = 0.03125
step = 0.125
target = [0]
pair_side = 24

[kernel]
preset = "simple"
dimension = 1

[geometry]
sides = [256]

[rule]
rule = "lonely"
gamma = 1.0

[init]
law = "empty"

[output]
dir = "out/moment-consistency"
"#;

/// Must match the label used by `InputSignals::monte_carlo`, so the paired
/// comparison sees the very replicas behind the signals.
const SIGNAL_LABEL: &str = "moments/signals";
pub const MC_Z_GATE: f64 = 3.0;

fn solved(
    name: &str,
    r: lonelywalks_core::Result<MomentField>,
    out: &mut Outcome,
) -> anyhow::Result<Option<MomentField>> {
    match r {
        Ok(f) => {
            out.gates.push(Gate::exact(
                name,
                f.quadrature_gap <= CONSISTENCY_TOL,
                format!("gap {:.3e}, halving change {:.3e}", f.quadrature_gap, f.refinement_change),
            ));
            Ok(Some(f))
        }
        Err(e @ (Error::Numerical(_) | Error::Unstable(_))) => {
            out.gates.push(Gate::exact(name, false, e.to_string()));
            Ok(None)
        }
        Err(e) => Err(e.into()),
    }
}

/// Per replica: the quadrature of its own vacancy path minus its `xi_0(t)`.
fn paired_differences(
    model: &XiModel,
    step: f64,
    horizon: f64,
    replicas: usize,
    seed: u64,
    checks: &[f64],
) -> anyhow::Result<Vec<MeanEstimate>> {
    let n = (horizon / step).round() as usize + 1;
    let grid: Vec<f64> = (0..n).map(|k| k as f64 * step).collect();
    let table = hat_table(&model.kernel, &model.geometry, step / 2.0, horizon)?;
    let idx: Vec<usize> = checks.iter().map(|t| (t / step).round() as usize).collect();
    let diffs = try_run_replicas(seed, SIGNAL_LABEL, replicas, |_, rng| {
        let mut st = model.initial_state(rng)?;
        let mut vac = vec![0.0; n];
        let mut origin = vec![0.0; n];
        run_xi(model, &mut st, &grid, rng, None, |k, s| {
            vac[k] = (s.count(0) == 0) as u8 as f64;
            origin[k] = s.count(0) as f64;
        })?;
        checks
            .iter()
            .zip(&idx)
            .map(|(&t, &k)| Ok(first_moment_quadrature(&table, &vac, model.gamma, step, t, 0)? - origin[k]))
            .collect::<lonelywalks_core::Result<Vec<f64>>>()
    })?;
    Ok((0..checks.len())
        .map(|j| MeanEstimate::from_samples(diffs.iter().map(|d| d[j])))
        .collect())
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let params = params_echo(cfg);
    let gamma = cfg.gamma()?;
    let kernel = cfg.jump_kernel()?;
    let geometry = cfg.geometry()?;
    let mut opts = SolveOptions::new(cfg.dt);
    opts.extra_checks = cfg.times.clone();
    let mut out = Outcome::default();

    let xi = XiModel::new(kernel.clone(), geometry.clone(), gamma)?;
    let signals = InputSignals::monte_carlo(&xi, cfg.step, cfg.horizon, cfg.replicas, cfg.seed, false)?;
    let mm = MomentModel {
        kernel: kernel.clone(),
        geometry: geometry.clone(),
        gamma,
    };
    if let Some(f) = solved("first-moment-quadrature", solve_first_moment(&mm, &signals, cfg.horizon, &opts), &mut out)? {
        out.rows.push(ResultRow::exact(NAME, &params, "first_moment_gap", f.quadrature_gap));
        let mut csv = Vec::new();
        write_moment_csv(&f, signals.provenance, &mut csv)?;
        out.artifacts.push(Artifact {
            file: "first_moment.csv".into(),
            body: csv,
        });
        let direct = xi_origin_paths(&xi, &cfg.times, cfg.replicas, cfg.seed, SIGNAL_LABEL)?;
        let diffs = paired_differences(&xi, cfg.step, cfg.horizon, cfg.replicas, cfg.seed, &cfg.times)?;
        for (j, &t) in cfg.times.iter().enumerate() {
            let f0 = f.at_site(t, 0).ok_or_else(|| anyhow::anyhow!("time {t} is off the signal grid"))?;
            let mc = column(&direct, j, |v| v as f64);
            let d = &diffs[j];
            let z = if d.se > 0.0 { d.mean / d.se } else { 0.0 };
            out.rows.push(ResultRow::exact(NAME, &params, format!("f0@t={t}"), f0));
            out.rows.push(ResultRow::statistical(NAME, &params, format!("mc_xi0@t={t}"), mc.mean, mc.interval(1.96), mc.n));
            out.rows.push(ResultRow::exact(NAME, &params, format!("paired_z@t={t}"), z));
            out.gates.push(Gate::statistical(
                format!("f0-vs-mc@t={t}"),
                z.abs() <= MC_Z_GATE,
                z,
                format!("f0 {f0:.5} mc {:.5} +- {:.5}", mc.mean, mc.se),
            ));
        }
    }

    if let Some(side) = cfg.pair_side {
        let pair_geom = TorusGeometry::cube(geometry.dimension(), side)?;
        let xi2 = XiModel::new(kernel.clone(), pair_geom.clone(), gamma)?;
        let signals2 = InputSignals::monte_carlo(&xi2, cfg.step, cfg.horizon, cfg.replicas, cfg.seed, true)?;
        let mm2 = MomentModel {
            kernel,
            geometry: pair_geom,
            gamma,
        };
        let r = solve_second_moment(&mm2, &signals2, cfg.horizon, &opts);
        if let Some(f) = solved("second-moment-quadrature", r, &mut out)? {
            out.rows.push(ResultRow::exact(NAME, &params, format!("second_moment_gap(L={side})"), f.quadrature_gap));
            let direct = xi_origin_paths(&xi2, &cfg.times, cfg.replicas, cfg.seed, SIGNAL_LABEL)?;
            for (j, &t) in cfg.times.iter().enumerate() {
                if let Some(f00) = f.at_pair(t, 0, 0) {
                    let mc = column(&direct, j, |v| v as f64 * (v as f64 - 1.0));
                    out.rows.push(ResultRow::exact(NAME, &params, format!("f00(L={side})@t={t}"), f00));
                    out.rows.push(ResultRow::statistical(
                        NAME,
                        &params,
                        format!("mc_factorial_xi0(L={side})@t={t}"),
                        mc.mean,
                        mc.interval(1.96),
                        mc.n,
                    ));
                }
            }
            let mut csv = Vec::new();
            write_moment_csv(&f, signals2.provenance, &mut csv)?;
            out.artifacts.push(Artifact {
                file: "second_moment.csv".into(),
                body: csv,
            });
        }
    }
    Ok(out)
}
