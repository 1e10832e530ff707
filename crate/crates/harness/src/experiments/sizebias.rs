use lonelywalks_core::sizebias::{verify_sizebias_identity, SizeBiasReport};

use super::{eta_model, params_echo};
use crate::config::ExperimentConfig;
use crate::output::{Artifact, Gate, Outcome, ResultRow};

pub const NAME: &str = "sizebias-check";

pub const DEFAULTS: &str = r#"
experiment = "sizebias-check"
seed = 2
replicas = 100000
horizon = 2.0
times = []
dt = 0.05
step = 0.25
target = [0]
tests = [
  { kind = "count-eq", offset = [0], k = 1 },
  { kind = "count-eq", offset = [0], k = 2 },
  { kind = "count-eq", offset = [0], k = 3 },
  { kind = "count-at-least", offset = [0], k = 4 },
  { kind = "count-eq", offset = [1], k = 0 },
  { kind = "count-at-least", offset = [-1], k = 1 },
  { kind = "count-eq", offset = [2], k = 1 },
]

[kernel]
preset = "simple"
dimension = 1

[geometry]
sides = [16]

[rule]
rule = "lonely"
gamma = 1.0

[init]
law = "poisson"
lambda = 0.5

[output]
dir = "out/sizebias-check"
"#;

pub const Z_GATE: f64 = 3.0;
/// Failing runs with `max |z|` at most this are rerun once.
pub const BORDERLINE_Z: f64 = 4.0;

/// Seed of the single borderline rerun.
pub fn rerun_seed(seed: u64) -> u64 {
    seed ^ 0x5bd1_e995_9e37_79b9
}

fn rows_for(report: &SizeBiasReport, params: &str, tag: &str, out: &mut Outcome) {
    for r in &report.rows {
        out.rows.push(ResultRow::statistical(
            NAME,
            params,
            format!("{tag}side_a:{}", r.test),
            r.side_a.mean,
            r.side_a.interval(1.96),
            report.replicas,
        ));
        out.rows.push(ResultRow::statistical(
            NAME,
            params,
            format!("{tag}side_b:{}", r.test),
            r.side_b.mean,
            r.side_b.interval(1.96),
            report.replicas,
        ));
        out.rows.push(ResultRow::exact(NAME, params, format!("{tag}z:{}", r.test), r.z));
    }
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    if cfg.tests.is_empty() {
        anyhow::bail!(crate::config::ConfigError {
            path: "tests".into(),
            message: "needs at least one test function".into()
        });
    }
    let model = eta_model(cfg)?;
    let x = cfg.target_site()?;
    let params = params_echo(cfg);
    let mut out = Outcome::default();
    let mut report = verify_sizebias_identity(&model, x, cfg.horizon, &cfg.tests, cfg.replicas, cfg.seed)?;
    rows_for(&report, &params, "", &mut out);
    let mut csv = Vec::new();
    report.write_csv(&mut csv)?;
    let mut reran = false;
    let max_z = report.max_abs_z();
    if max_z > Z_GATE && max_z <= BORDERLINE_Z {
        reran = true;
        report = verify_sizebias_identity(&model, x, cfg.horizon, &cfg.tests, cfg.replicas, rerun_seed(cfg.seed))?;
        rows_for(&report, &params, "rerun:", &mut out);
        let mut again = Vec::new();
        report.write_csv(&mut again)?;
        out.artifacts.push(Artifact {
            file: "sizebias_rerun.csv".into(),
            body: again,
        });
    }
    out.artifacts.insert(
        0,
        Artifact {
            file: "sizebias.csv".into(),
            body: csv,
        },
    );
    for r in &report.rows {
        out.gates.push(Gate::statistical(
            format!("z:{}", r.test),
            r.z.abs() <= Z_GATE,
            r.z,
            format!("A {:.5} B {:.5}{}", r.side_a.mean, r.side_b.mean, if reran { " (rerun)" } else { "" }),
        ));
    }
    out.rows.push(ResultRow::exact(NAME, &params, "borderline_reruns", reran as u8 as f64));
    Ok(out)
}
