use lonelywalks_core::moments::green;
use lonelywalks_core::sim::estimate_vacancy;

use super::{eta_model, params_echo};
use crate::config::ExperimentConfig;
use crate::output::{Outcome, ResultRow};

pub const NAME: &str = "transient-control";

/// Exploratory: a three-dimensional torus, whose symmetrised walk is
/// transient on the infinite lattice. No gates.
pub const DEFAULTS: &str = r#"
experiment = "transient-control"
seed = 9
replicas = 400
horizon = 20.0
times = [0.0, 2.0, 5.0, 10.0, 20.0]
dt = 0.05
step = 0.25
target = [0, 0, 0]

[kernel]
preset = "simple"
dimension = 3

[geometry]
sides = [10, 10, 10]

[rule]
rule = "lonely"
gamma = 1.0

[init]
law = "poisson"
lambda = 1.0

[output]
dir = "out/transient-control"
"#;

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let params = params_echo(cfg);
    let model = eta_model(cfg)?;
    let x = cfg.target_site()?;
    let est = estimate_vacancy(&model, x, &cfg.times, cfg.replicas, cfg.seed)?;
    let mut out = Outcome::default();
    for e in &est {
        out.rows.push(ResultRow::statistical(
            NAME,
            &params,
            format!("vacancy@t={}", e.time),
            e.estimate,
            (e.lo, e.hi),
            e.replicas,
        ));
        if e.time > 0.0 {
            out.rows.push(ResultRow::exact(
                NAME,
                &params,
                format!("green@t={}", e.time),
                green(&model.kernel, &model.geometry, e.time)?,
            ));
        }
    }
    Ok(out)
}
