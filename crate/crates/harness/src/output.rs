//! Result rows, statistical gates and run artifacts.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

/// One output line. `ci_low`/`ci_high` are present iff the metric is
/// statistical.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResultRow {
    pub experiment: String,
    pub params: String,
    pub metric: String,
    pub value: f64,
    pub ci_low: Option<f64>,
    pub ci_high: Option<f64>,
    pub replicas: usize,
}

impl ResultRow {
    pub fn exact(experiment: &str, params: &str, metric: impl Into<String>, value: f64) -> Self {
        Self {
            experiment: experiment.into(),
            params: params.into(),
            metric: metric.into(),
            value,
            ci_low: None,
            ci_high: None,
            replicas: 0,
        }
    }

    pub fn statistical(
        experiment: &str,
        params: &str,
        metric: impl Into<String>,
        value: f64,
        ci: (f64, f64),
        replicas: usize,
    ) -> Self {
        Self {
            experiment: experiment.into(),
            params: params.into(),
            metric: metric.into(),
            value,
            ci_low: Some(ci.0),
            ci_high: Some(ci.1),
            replicas,
        }
    }
}

/// A pass/fail check. Statistical gates carry their z-score.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Gate {
    pub name: String,
    pub passed: bool,
    pub z: Option<f64>,
    pub detail: String,
}

impl Gate {
    pub fn exact(name: impl Into<String>, passed: bool, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            z: None,
            detail: detail.into(),
        }
    }

    pub fn statistical(name: impl Into<String>, passed: bool, z: f64, detail: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            passed,
            z: Some(z),
            detail: detail.into(),
        }
    }
}

/// A named auxiliary CSV written next to `results.csv`.
#[derive(Debug, Clone, PartialEq)]
pub struct Artifact {
    pub file: String,
    pub body: Vec<u8>,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Outcome {
    pub rows: Vec<ResultRow>,
    pub gates: Vec<Gate>,
    pub artifacts: Vec<Artifact>,
}

impl Outcome {
    pub fn passed(&self) -> bool {
        self.gates.iter().all(|g| g.passed)
    }

    pub fn gate(&self, name: &str) -> Option<&Gate> {
        self.gates.iter().find(|g| g.name == name)
    }
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(|x| format!("{x}")).unwrap_or_default()
}

pub fn results_csv(rows: &[ResultRow]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["experiment", "params", "metric", "value", "ci_low", "ci_high", "replicas"])?;
    for r in rows {
        w.write_record([
            r.experiment.clone(),
            r.params.clone(),
            r.metric.clone(),
            format!("{}", r.value),
            fmt_opt(r.ci_low),
            fmt_opt(r.ci_high),
            r.replicas.to_string(),
        ])?;
    }
    Ok(w.into_inner()?)
}

pub fn gates_csv(gates: &[Gate]) -> anyhow::Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(["gate", "passed", "z", "detail"])?;
    for g in gates {
        w.write_record([g.name.clone(), g.passed.to_string(), fmt_opt(g.z), g.detail.clone()])?;
    }
    Ok(w.into_inner()?)
}

#[derive(Debug, Serialize)]
pub struct Manifest<'a> {
    pub experiment: &'a str,
    pub seed: u64,
    pub config: &'a str,
    pub core_version: &'a str,
    pub harness_version: &'a str,
    pub threads: usize,
    pub wall_time_seconds: f64,
    pub gates_passed: bool,
}

/// Writes `results.csv`, `gates.csv`, artifacts, `manifest.json` and the
/// optional `summary.json`.
pub fn write_run(dir: &Path, outcome: &Outcome, manifest: &Manifest<'_>, json_summary: bool) -> anyhow::Result<Vec<PathBuf>> {
    fs::create_dir_all(dir).with_context(|| format!("cannot create output directory {}", dir.display()))?;
    let mut written = Vec::new();
    let mut put = |name: &str, body: &[u8]| -> anyhow::Result<()> {
        let p = dir.join(name);
        fs::write(&p, body).with_context(|| format!("cannot write {}", p.display()))?;
        written.push(p);
        Ok(())
    };
    put("results.csv", &results_csv(&outcome.rows)?)?;
    put("gates.csv", &gates_csv(&outcome.gates)?)?;
    for a in &outcome.artifacts {
        put(&a.file, &a.body)?;
    }
    put("manifest.json", serde_json::to_string_pretty(manifest)?.as_bytes())?;
    if json_summary {
        let summary = serde_json::json!({ "rows": outcome.rows, "gates": outcome.gates });
        put("summary.json", serde_json::to_string_pretty(&summary)?.as_bytes())?;
    }
    Ok(written)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ci_columns_are_empty_for_exact_rows() {
        let rows = [
            ResultRow::exact("e", "a=1", "m", 0.5),
            ResultRow::statistical("e", "a=1;b=x,y", "s", 0.25, (0.2, 0.3), 10),
        ];
        let text = String::from_utf8(results_csv(&rows).unwrap()).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "experiment,params,metric,value,ci_low,ci_high,replicas");
        assert_eq!(lines[1], "e,a=1,m,0.5,,,0");
        assert_eq!(lines[2], "e,\"a=1;b=x,y\",s,0.25,0.2,0.3,10");
    }
}
