//! Experiment configuration: a TOML tree layered over per-experiment defaults.

use lonelywalks_core::kernel::{JumpKernel, TorusGeometry};
use lonelywalks_core::sim::{BranchRule, InitialLaw};
use lonelywalks_core::sizebias::TestFunction;
use serde::{Deserialize, Serialize};

/// Offset and probability of one increment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Increment {
    pub offset: Vec<i64>,
    pub p: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct KernelSpec {
    /// `simple`, `one-way`, or `explicit` (uses `support`).
    pub preset: String,
    pub dimension: usize,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub support: Vec<Increment>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GeometrySpec {
    pub sides: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSpec {
    pub dir: String,
    /// Also write `summary.json` mirroring the result rows.
    #[serde(default)]
    pub json_summary: bool,
}

/// Fields with no meaning for an experiment are ignored by it.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: String,
    pub seed: u64,
    pub replicas: usize,
    /// Model time units.
    pub horizon: f64,
    /// Snapshot or check times, model time units.
    pub times: Vec<f64>,
    /// Integrator step for moment equations.
    pub dt: f64,
    /// Signal grid step for moment equations.
    pub step: f64,
    /// Target site coordinates.
    pub target: Vec<i64>,
    pub kernel: KernelSpec,
    pub geometry: GeometrySpec,
    pub rule: BranchRule,
    pub init: InitialLaw,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tests: Vec<TestFunction>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub truncations: Vec<u32>,
    /// Torus side for second moments.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pair_side: Option<usize>,
    /// State cap for generator checks.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cap: Option<usize>,
    pub output: OutputSpec,
}

/// A validation failure with the offending field path.
#[derive(Debug, Clone, PartialEq)]
pub struct ConfigError {
    pub path: String,
    pub message: String,
}

impl std::fmt::Display for ConfigError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "{}: {}", self.path, self.message)
    }
}

impl std::error::Error for ConfigError {}

fn err(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError {
        path: path.into(),
        message: message.into(),
    }
}

/// Recursive table merge; arrays and scalars in `over` replace `base`.
pub fn merge(base: &mut toml::Value, over: toml::Value) {
    match (base, over) {
        (toml::Value::Table(b), toml::Value::Table(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) => merge(slot, v),
                    None => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

impl ExperimentConfig {
    /// Parse `text` over the defaults of `defaults`.
    pub fn parse_over(defaults: &str, text: &str) -> Result<Self, ConfigError> {
        let mut base: toml::Value = toml::from_str(defaults).map_err(|e| err("<defaults>", e.to_string()))?;
        let over: toml::Value = toml::from_str(text).map_err(|e| err("<config>", e.message().to_string()))?;
        merge(&mut base, over);
        let cfg: Self = base
            .try_into()
            .map_err(|e: toml::de::Error| err("<config>", e.message().to_string()))?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    /// Checks every field against the preconditions of the modules it feeds.
    pub fn validate(&self) -> Result<(), ConfigError> {
        if self.replicas == 0 {
            return Err(err("replicas", "must be at least 1"));
        }
        if !(self.horizon.is_finite() && self.horizon >= 0.0) {
            return Err(err("horizon", format!("must be finite and >= 0, got {}", self.horizon)));
        }
        for (i, t) in self.times.iter().enumerate() {
            if !(t.is_finite() && *t >= 0.0) {
                return Err(err(&format!("times[{i}]"), format!("must be finite and >= 0, got {t}")));
            }
        }
        if self.times.windows(2).any(|w| w[1] < w[0]) {
            return Err(err("times", "must be sorted"));
        }
        if !(self.dt.is_finite() && self.dt > 0.0) {
            return Err(err("dt", format!("must be positive, got {}", self.dt)));
        }
        if !(self.step.is_finite() && self.step > 0.0) {
            return Err(err("step", format!("must be positive, got {}", self.step)));
        }
        let (gamma_path, v) = match self.rule {
            BranchRule::Lonely { gamma } => ("rule.gamma", gamma),
            BranchRule::Linear { c } => ("rule.c", c),
            BranchRule::JStar { gamma, j } => {
                if j == 0 {
                    return Err(err("rule.j", "must be >= 1"));
                }
                ("rule.gamma", gamma)
            }
        };
        if !(v.is_finite() && v >= 0.0) {
            return Err(err(gamma_path, format!("must be finite and >= 0, got {v}")));
        }
        if let InitialLaw::Poisson { lambda } = self.init {
            if !(lambda.is_finite() && lambda >= 0.0) {
                return Err(err("init.lambda", format!("must be finite and >= 0, got {lambda}")));
            }
        }
        let kernel = self.jump_kernel()?;
        let geometry = self.geometry()?;
        if kernel.dimension() != geometry.dimension() {
            return Err(err(
                "geometry.sides",
                format!("{} sides for a {}-dimensional kernel", geometry.dimension(), kernel.dimension()),
            ));
        }
        if self.target.len() != geometry.dimension() {
            return Err(err("target", format!("needs {} coordinates", geometry.dimension())));
        }
        if let Some(side) = self.pair_side {
            if side < 3 {
                return Err(err("pair_side", "must be >= 3"));
            }
        }
        if self.output.dir.is_empty() {
            return Err(err("output.dir", "must not be empty"));
        }
        Ok(())
    }

    pub fn jump_kernel(&self) -> Result<JumpKernel, ConfigError> {
        let d = self.kernel.dimension;
        let r = match self.kernel.preset.as_str() {
            "simple" => JumpKernel::simple(d),
            "one-way" => JumpKernel::one_way(d),
            "explicit" => {
                for (i, inc) in self.kernel.support.iter().enumerate() {
                    if inc.offset.len() != d {
                        return Err(err(&format!("kernel.support[{i}].offset"), format!("needs {d} coordinates")));
                    }
                    if !(inc.p.is_finite() && inc.p > 0.0) {
                        return Err(err(&format!("kernel.support[{i}].p"), "must be positive"));
                    }
                }
                JumpKernel::new(d, self.kernel.support.iter().map(|i| (i.offset.clone(), i.p)).collect())
            }
            other => return Err(err("kernel.preset", format!("unknown preset `{other}`"))),
        };
        r.map_err(|e| err("kernel", e.to_string()))
    }

    pub fn geometry(&self) -> Result<TorusGeometry, ConfigError> {
        TorusGeometry::new(self.geometry.sides.clone()).map_err(|e| err("geometry.sides", e.to_string()))
    }

    pub fn target_site(&self) -> Result<usize, ConfigError> {
        Ok(self.geometry()?.wrap(&self.target))
    }

    pub fn gamma(&self) -> Result<f64, ConfigError> {
        self.rule
            .lonely_gamma()
            .ok_or_else(|| err("rule.rule", "this experiment needs the lonely rule"))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    #[test]
    fn defaults_parse_and_validate() {
        for e in registry::registry() {
            let cfg = ExperimentConfig::parse_over(e.defaults, "").unwrap();
            cfg.validate().unwrap();
            assert_eq!(cfg.experiment, e.name);
        }
    }

    #[test]
    fn round_trip_is_stable() {
        for e in registry::registry() {
            let cfg = ExperimentConfig::parse_over(e.defaults, "").unwrap();
            let again = ExperimentConfig::parse_over(e.defaults, &cfg.to_toml()).unwrap();
            assert_eq!(cfg, again);
            assert_eq!(cfg.to_toml(), again.to_toml());
        }
    }

    #[test]
    fn negative_gamma_names_the_field() {
        let d = registry::find("extinction-curve").unwrap().defaults;
        let cfg = ExperimentConfig::parse_over(d, "[rule]\ngamma = -1.0\n").unwrap();
        let e = cfg.validate().unwrap_err();
        assert_eq!(e.path, "rule.gamma");
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let d = registry::find("extinction-curve").unwrap().defaults;
        assert!(ExperimentConfig::parse_over(d, "replicaz = 3\n").is_err());
    }

    #[test]
    fn explicit_kernel_checks_offsets() {
        let d = registry::find("extinction-curve").unwrap().defaults;
        let text = "[kernel]\npreset = \"explicit\"\nsupport = [{ offset = [1, 0], p = 1.0 }]\n";
        let cfg = ExperimentConfig::parse_over(d, text).unwrap();
        assert_eq!(cfg.validate().unwrap_err().path, "kernel.support[0].offset");
    }
}
