use lonelywalks_core::genverify::{default_suite, run_case, write_report_csv};

use super::params_echo;
use crate::config::ExperimentConfig;
use crate::output::{Artifact, Gate, Outcome, ResultRow};

pub const NAME: &str = "verify-generators";

/// Kernel, torus and rule fields are unused: the suite fixes its own grid.
pub const DEFAULTS: &str = r#"
experiment = "verify-generators"
seed = 7
replicas = 1
horizon = 1.0
times = [0.1, 0.3, 0.5, 0.7, 0.9]
dt = 0.05
step = 0.25
target = [0]
cap = 3

[kernel]
preset = "simple"
dimension = 1

[geometry]
sides = [3]

[rule]
rule = "lonely"
gamma = 1.0

[init]
law = "empty"

[output]
dir = "out/verify-generators"
"#;

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let params = params_echo(cfg);
    let mut cases = default_suite()?;
    for c in &mut cases {
        if let Some(cap) = cfg.cap {
            c.cap = cap;
        }
        c.horizon = cfg.horizon;
        c.times = cfg.times.clone();
        c.seed = cfg.seed;
    }
    let mut rows = Vec::new();
    for c in &cases {
        rows.extend(run_case(c)?);
    }
    let mut out = Outcome::default();
    let mut identities: Vec<String> = Vec::new();
    for r in &rows {
        if !identities.contains(&r.identity) {
            identities.push(r.identity.clone());
        }
        out.rows.push(ResultRow::exact(
            NAME,
            &params,
            format!("{}:{}:d={}:L={}:cap={}:gamma={}", r.identity, r.kernel, r.dimension, r.side, r.cap, r.gamma),
            r.max_residual,
        ));
    }
    for id in identities {
        let worst = rows
            .iter()
            .filter(|r| r.identity == id)
            .map(|r| r.max_residual)
            .fold(0.0, f64::max);
        let pass = rows.iter().filter(|r| r.identity == id).all(|r| r.pass);
        out.gates.push(Gate::exact(id, pass, format!("max residual {worst:.3e}")));
    }
    let mut csv = Vec::new();
    write_report_csv(&rows, &mut csv)?;
    out.artifacts.push(Artifact {
        file: "generators.csv".into(),
        body: csv,
    });
    Ok(out)
}
