//! Registered experiments. Each turns a validated config into rows and gates.

pub mod domination;
pub mod extinction;
pub mod moments;
pub mod monotonicity;
pub mod sizebias;
pub mod transient;
pub mod verify;
pub mod xi_growth;

use lonelywalks_core::seeding::try_run_replicas;
use lonelywalks_core::sim::{BranchRule, EtaModel, InitialLaw};
use lonelywalks_core::sizebias::{run_xi, XiModel};
use lonelywalks_core::stats::MeanEstimate;

use crate::config::ExperimentConfig;

/// Parameter echo shared by all rows of a run.
pub fn params_echo(cfg: &ExperimentConfig) -> String {
    let rule = match cfg.rule {
        BranchRule::Lonely { gamma } => format!("lonely(gamma={gamma})"),
        BranchRule::Linear { c } => format!("linear(c={c})"),
        BranchRule::JStar { gamma, j } => format!("j-star(gamma={gamma},j={j})"),
    };
    let init = match cfg.init {
        InitialLaw::Empty => "empty".to_string(),
        InitialLaw::Deterministic { k } => format!("deterministic(k={k})"),
        InitialLaw::Poisson { lambda } => format!("poisson(lambda={lambda})"),
    };
    let sides: Vec<String> = cfg.geometry.sides.iter().map(|s| s.to_string()).collect();
    format!(
        "kernel={};d={};sides={};rule={rule};init={init};T={};seed={}",
        cfg.kernel.preset,
        cfg.kernel.dimension,
        sides.join("x"),
        cfg.horizon,
        cfg.seed
    )
}

pub fn eta_model(cfg: &ExperimentConfig) -> anyhow::Result<EtaModel> {
    Ok(EtaModel::new(cfg.jump_kernel()?, cfg.geometry()?, cfg.rule, cfg.init)?)
}

/// `xi` from the empty configuration with the config's kernel, torus and
/// lonely rate.
pub fn xi_model(cfg: &ExperimentConfig) -> anyhow::Result<XiModel> {
    Ok(XiModel::new(cfg.jump_kernel()?, cfg.geometry()?, cfg.gamma()?)?)
}

/// `xi_0(t)` at each time, one row per replica.
pub fn xi_origin_paths(
    model: &XiModel,
    times: &[f64],
    replicas: usize,
    seed: u64,
    label: &str,
) -> anyhow::Result<Vec<Vec<u32>>> {
    Ok(try_run_replicas(seed, label, replicas, |_, rng| {
        let mut st = model.initial_state(rng)?;
        let mut out = vec![0u32; times.len()];
        run_xi(model, &mut st, times, rng, None, |k, s| out[k] = s.count(0))?;
        Ok::<_, lonelywalks_core::Error>(out)
    })?)
}

pub fn column(paths: &[Vec<u32>], k: usize, f: impl Fn(u32) -> f64) -> MeanEstimate {
    MeanEstimate::from_samples(paths.iter().map(|p| f(p[k])))
}

/// `(a - b) / sqrt(se_a^2 + se_b^2)`, zero when both are exact and equal.
pub fn two_sample_z(a: &MeanEstimate, b: &MeanEstimate) -> f64 {
    lonelywalks_core::stats::z_score(a, b)
}
