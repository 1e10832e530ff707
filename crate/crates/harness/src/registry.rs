//! The fixed list of experiments with their default configs.

use crate::config::ExperimentConfig;
use crate::experiments::*;
use crate::output::Outcome;

pub struct Experiment {
    pub name: &'static str,
    pub summary: &'static str,
    pub defaults: &'static str,
    pub run: fn(&ExperimentConfig) -> anyhow::Result<Outcome>,
}

pub fn registry() -> Vec<Experiment> {
    vec![
        Experiment {
            name: extinction::NAME,
            summary: "vacancy probability of a site over time; local extinction probe",
            defaults: extinction::DEFAULTS,
            run: extinction::run,
        },
        Experiment {
            name: sizebias::NAME,
            summary: "size-biased representation against reweighted plain runs",
            defaults: sizebias::DEFAULTS,
            run: sizebias::run,
        },
        Experiment {
            name: xi_growth::NAME,
            summary: "first and second moment bounds and the Paley-Zygmund gate for xi",
            defaults: xi_growth::DEFAULTS,
            run: xi_growth::run,
        },
        Experiment {
            name: moments::NAME,
            summary: "moment equations: integrator vs Duhamel quadrature and vs direct Monte Carlo",
            defaults: moments::DEFAULTS,
            run: moments::run,
        },
        Experiment {
            name: domination::NAME,
            summary: "relatives of the selected particle against xi from the source frame",
            defaults: domination::DEFAULTS,
            run: domination::run,
        },
        Experiment {
            name: monotonicity::NAME,
            summary: "truncated means of xi at the origin are nondecreasing in time",
            defaults: monotonicity::DEFAULTS,
            run: monotonicity::run,
        },
        Experiment {
            name: verify::NAME,
            summary: "exact generator identities on capped state spaces",
            defaults: verify::DEFAULTS,
            run: verify::run,
        },
        Experiment {
            name: transient::NAME,
            summary: "vacancy curve on a torus with a transient walk (exploratory)",
            defaults: transient::DEFAULTS,
            run: transient::run,
        },
    ]
}

pub fn find(name: &str) -> Option<Experiment> {
    registry().into_iter().find(|e| e.name == name)
}

pub fn names() -> Vec<&'static str> {
    registry().iter().map(|e| e.name).collect()
}

/// Text for `--describe`: the summary and the full default config, every
/// field of which is required once defaults are stripped.
pub fn describe(name: &str) -> Option<String> {
    let e = find(name)?;
    Some(format!(
        "{}: {}\n\nrequired fields (shown with defaults):\n{}",
        e.name,
        e.summary,
        e.defaults.trim_start()
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn exactly_eight_names() {
        assert_eq!(
            names(),
            [
                "extinction-curve",
                "sizebias-check",
                "xi-growth",
                "moment-consistency",
                "domination-check",
                "monotonicity-probe",
                "verify-generators",
                "transient-control",
            ]
        );
    }

    #[test]
    fn describe_lists_fields() {
        let d = describe("extinction-curve").unwrap();
        for key in ["replicas", "horizon", "times", "[kernel]", "[geometry]", "[rule]", "[init]", "[output]"] {
            assert!(d.contains(key), "{key}");
        }
        assert!(describe("nope").is_none());
    }
}
