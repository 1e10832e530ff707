use lonelywalks_core::moments::{green, moment_bounds, paley_zygmund};

use super::{column, params_echo, xi_model, xi_origin_paths};
use crate::config::ExperimentConfig;
use crate::output::{Gate, Outcome, ResultRow};

pub const NAME: &str = "xi-growth";

pub const DEFAULTS: &str = r#"
experiment = "xi-growth"
seed = 4
replicas = 10000
horizon = 20.0
times = [1.0, 5.0, 20.0]
dt = 0.05
step = 0.25
target = [0]

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
dir = "out/xi-growth"
"#;

pub const SIGMA: f64 = 3.0;
/// The Paley-Zygmund gate is applied from this time on.
pub const PZ_FROM: f64 = 5.0;

pub fn run(cfg: &ExperimentConfig) -> anyhow::Result<Outcome> {
    let params = params_echo(cfg);
    let model = xi_model(cfg)?;
    let gamma = model.gamma;
    let paths = xi_origin_paths(&model, &cfg.times, cfg.replicas, cfg.seed, "xi-growth")?;
    let mut out = Outcome::default();
    for (j, &t) in cfg.times.iter().enumerate() {
        let g = green(&model.kernel, &model.geometry, t)?;
        let (b1, b2) = moment_bounds(&model.kernel, &model.geometry, gamma, t)?;
        let m1 = column(&paths, j, |v| v as f64);
        let m2 = column(&paths, j, |v| (v as f64).powi(2));
        out.rows.push(ResultRow::exact(NAME, &params, format!("green@t={t}"), g));
        out.rows.push(ResultRow::statistical(NAME, &params, format!("mean_xi0@t={t}"), m1.mean, m1.interval(1.96), m1.n));
        out.rows.push(ResultRow::exact(NAME, &params, format!("bound_mean@t={t}"), b1));
        out.rows.push(ResultRow::statistical(NAME, &params, format!("mean_xi0_sq@t={t}"), m2.mean, m2.interval(1.96), m2.n));
        out.rows.push(ResultRow::exact(NAME, &params, format!("bound_sq@t={t}"), b2));
        let z1 = if m1.se > 0.0 { (m1.mean - b1) / m1.se } else if m1.mean <= b1 { f64::NEG_INFINITY } else { f64::INFINITY };
        let z2 = if m2.se > 0.0 { (m2.mean - b2) / m2.se } else if m2.mean <= b2 { f64::NEG_INFINITY } else { f64::INFINITY };
        out.gates.push(Gate::statistical(format!("first-bound@t={t}"), z1 <= SIGMA, z1, format!("{:.5} vs {b1:.5}", m1.mean)));
        out.gates.push(Gate::statistical(format!("second-bound@t={t}"), z2 <= SIGMA, z2, format!("{:.5} vs {b2:.5}", m2.mean)));
        if t >= PZ_FROM && m1.mean > 0.0 {
            let lb = paley_zygmund(m1.mean, m2.mean)?;
            let hit = column(&paths, j, |v| (v as f64 >= 0.5 * m1.mean) as u8 as f64);
            let se = (hit.mean * (1.0 - hit.mean) / hit.n as f64).sqrt();
            let z = if se > 0.0 { (lb - hit.mean) / se } else if hit.mean >= lb { f64::NEG_INFINITY } else { f64::INFINITY };
            out.rows.push(ResultRow::statistical(NAME, &params, format!("p_half_mean@t={t}"), hit.mean, hit.interval(1.96), hit.n));
            out.rows.push(ResultRow::exact(NAME, &params, format!("paley_zygmund@t={t}"), lb));
            out.gates.push(Gate::statistical(
                format!("paley-zygmund@t={t}"),
                z <= SIGMA,
                z,
                format!("P {:.4} vs bound {lb:.4}", hit.mean),
            ));
        }
    }
    Ok(out)
}
