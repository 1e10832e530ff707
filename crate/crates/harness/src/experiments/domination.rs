use lonelywalks_core::sizebias::{extract_relatives, simulate_xi, XiModel, XiTildeSampler};
use lonelywalks_core::seeding::try_run_replicas;
use lonelywalks_core::stats::MeanEstimate;

use super::{eta_model, params_echo, two_sample_z};
use crate::config::ExperimentConfig;
use crate::output::{Gate, Outcome, ResultRow};

pub const NAME: &str = "domination-check";

pub const DEFAULTS: &str = r#"
experiment = "domination-check"
seed = 6
replicas = 10000
horizon = 2.0
times = []
dt = 0.05
step = 0.25
target = [0]

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
dir = "out/domination-check"
"#;

pub const Z_GATE: f64 = 3.0;

/// Source-frame counts at the origin: relatives, and every non-selected
/// particle.
struct Frame {
    relatives: u32,
    others: u32,
    dominated: bool,
}

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let params = params_echo(cfg);
    let model = eta_model(cfg)?;
    let gamma = cfg.gamma()?;
    let x = cfg.target_site()?;
    let t = cfg.horizon;
    let sampler = XiTildeSampler::new(&model, x, t)?;
    let frames = try_run_replicas(cfg.seed, "domination/xitilde", cfg.replicas, |_, rng| {
        let run = sampler.sample(rng, false)?;
        let rel = extract_relatives(&run.config, &run.bridge);
        let others = run.config.others();
        Ok::<_, lonelywalks_core::Error>(Frame {
            relatives: rel.count(0),
            others: others.count(0),
            dominated: rel.dominated_by(&others),
        })
    })?;
    let violations = frames.iter().filter(|f| !f.dominated).count();
    let mut out = Outcome::default();
    out.rows.push(ResultRow::exact(NAME, &params, "domination_violations", violations as f64));
    out.gates.push(Gate::exact(
        "pointwise-domination",
        violations == 0,
        format!("{violations} of {} replicas violate", frames.len()),
    ));

    let xi_origin = |m: &XiModel, label: &str| -> anyhow::Result<Vec<u32>> {
        Ok(try_run_replicas(cfg.seed, label, cfg.replicas, |_, rng| {
            Ok::<_, lonelywalks_core::Error>(simulate_xi(m, &[t], rng)?[0].count(0))
        })?)
    };
    let empty = XiModel::new(model.kernel.clone(), model.geometry.clone(), gamma)?;
    let background = empty.clone().with_init(model.init)?;
    let from_empty = xi_origin(&empty, "domination/xi")?;
    let from_background = xi_origin(&background, "domination/xi-background")?;

    let mean = |v: &mut dyn Iterator<Item = u32>| MeanEstimate::from_samples(v.map(|c| c as f64));
    let vacant = |v: &mut dyn Iterator<Item = u32>| MeanEstimate::from_samples(v.map(|c| (c == 0) as u8 as f64));
    let comparisons: [(&str, &str, MeanEstimate, MeanEstimate); 4] = [
        (
            "relatives-mean",
            "labelled relatives vs xi from empty",
            mean(&mut frames.iter().map(|f| f.relatives)),
            mean(&mut from_empty.iter().copied()),
        ),
        (
            "relatives-vacancy",
            "labelled relatives vs xi from empty",
            vacant(&mut frames.iter().map(|f| f.relatives)),
            vacant(&mut from_empty.iter().copied()),
        ),
        (
            "others-mean",
            "all non-selected particles vs xi from the initial law",
            mean(&mut frames.iter().map(|f| f.others)),
            mean(&mut from_background.iter().copied()),
        ),
        (
            "others-vacancy",
            "all non-selected particles vs xi from the initial law",
            vacant(&mut frames.iter().map(|f| f.others)),
            vacant(&mut from_background.iter().copied()),
        ),
    ];
    for (name, what, a, b) in comparisons {
        let z = two_sample_z(&a, &b);
        out.rows.push(ResultRow::statistical(NAME, &params, format!("{name}:xitilde"), a.mean, a.interval(1.96), a.n));
        out.rows.push(ResultRow::statistical(NAME, &params, format!("{name}:xi"), b.mean, b.interval(1.96), b.n));
        out.gates.push(Gate::statistical(
            name,
            z.abs() <= Z_GATE,
            z,
            format!("{what}: {:.5} vs {:.5}", a.mean, b.mean),
        ));
    }
    Ok(out)
}
