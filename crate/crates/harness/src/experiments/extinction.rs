use lonelywalks_core::sim::{estimate_vacancy, InitialLaw};

use super::{eta_model, params_echo};
use crate::config::ExperimentConfig;
use crate::output::{Gate, Outcome, ResultRow};

pub const NAME: &str = "extinction-curve";

pub const DEFAULTS: &str = r#"
experiment = "extinction-curve"
seed = 1
replicas = 2000
horizon = 100.0
times = [0.0, 10.0, 30.0, 100.0]
dt = 0.05
step = 0.25
target = [0]

[kernel]
preset = "simple"
dimension = 1

[geometry]
sides = [512]

[rule]
rule = "lonely"
gamma = 1.0

[init]
law = "poisson"
lambda = 1.0

[output]
dir = "out/extinction-curve"
"#;

/// `P(eta_x(0) = 0)` under a product initial law.
pub fn initial_vacancy(init: &InitialLaw) -> f64 {
    match *init {
        InitialLaw::Empty => 1.0,
        InitialLaw::Deterministic { k } => if k == 0 { 1.0 } else { 0.0 },
        InitialLaw::Poisson { lambda } => (-lambda).exp(),
    }
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let model = eta_model(cfg)?;
    let x = cfg.target_site()?;
    let est = estimate_vacancy(&model, x, &cfg.times, cfg.replicas, cfg.seed)?;
    let params = params_echo(cfg);
    let baseline = initial_vacancy(&cfg.init);
    let mut out = Outcome::default();
    out.rows.push(ResultRow::exact(NAME, &params, "vacancy_baseline", baseline));
    for e in &est {
        out.rows.push(ResultRow::statistical(
            NAME,
            &params,
            format!("vacancy@t={}", e.time),
            e.estimate,
            (e.lo, e.hi),
            e.replicas,
        ));
    }
    let later: Vec<_> = est.iter().filter(|e| e.time > 0.0).collect();
    let increasing = later.windows(2).all(|w| w[1].estimate > w[0].estimate);
    let curve: Vec<String> = later.iter().map(|e| format!("{}:{:.4}", e.time, e.estimate)).collect();
    out.gates.push(Gate::exact("strictly-increasing", increasing, curve.join(" ")));
    if let (Some(first), Some(last)) = (later.first(), later.last()) {
        let se = |e: &lonelywalks_core::sim::VacancyEstimate| (e.estimate * (1.0 - e.estimate) / e.replicas as f64).sqrt();
        let z = (last.estimate - first.estimate) / (se(first).powi(2) + se(last).powi(2)).sqrt();
        out.gates.push(Gate::statistical(
            "separated-intervals",
            first.hi < last.lo,
            z,
            format!("t={} [{:.4},{:.4}] vs t={} [{:.4},{:.4}]", first.time, first.lo, first.hi, last.time, last.lo, last.hi),
        ));
    }
    let above = later.iter().all(|e| e.estimate > baseline);
    out.gates.push(Gate::exact("above-baseline", above, format!("baseline {baseline:.4}")));
    Ok(out)
}
