use lonelywalks_core::stats::MeanEstimate;

use super::{params_echo, xi_model, xi_origin_paths};
use crate::config::ExperimentConfig;
use crate::output::{Gate, Outcome, ResultRow};

pub const NAME: &str = "monotonicity-probe";

pub const DEFAULTS: &str = r#"
experiment = "monotonicity-probe"
seed = 8
replicas = 10000
horizon = 20.0
times = [1.0, 2.0, 5.0, 10.0, 20.0]
dt = 0.05
step = 0.25
target = [0]
truncations = [1, 5]

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
dir = "out/monotonicity-probe"
"#;

pub const SIGMA: f64 = 3.0;

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let params = params_echo(cfg);
    let model = xi_model(cfg)?;
    let paths = xi_origin_paths(&model, &cfg.times, cfg.replicas, cfg.seed, "monotonicity")?;
    let mut out = Outcome::default();
    for &k in &cfg.truncations {
        let cut = |v: u32| v.min(k) as f64;
        for (j, &t) in cfg.times.iter().enumerate() {
            let m = MeanEstimate::from_samples(paths.iter().map(|p| cut(p[j])));
            out.rows.push(ResultRow::statistical(NAME, &params, format!("mean_min_xi0_{k}@t={t}"), m.mean, m.interval(1.96), m.n));
        }
        for j in 1..cfg.times.len() {
            let d = MeanEstimate::from_samples(paths.iter().map(|p| cut(p[j]) - cut(p[j - 1])));
            let z = if d.se > 0.0 { -d.mean / d.se } else if d.mean >= 0.0 { f64::NEG_INFINITY } else { f64::INFINITY };
            out.gates.push(Gate::statistical(
                format!("nondecreasing[K={k}]:{}->{}", cfg.times[j - 1], cfg.times[j]),
                z <= SIGMA,
                z,
                format!("increment {:.5} +- {:.5}", d.mean, d.se),
            ));
        }
    }
    Ok(out)
}
