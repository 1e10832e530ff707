//! Argument handling and exit codes.

use std::ffi::OsString;
use std::path::PathBuf;
use std::time::Instant;

use clap::Parser;

use crate::config::{ConfigError, ExperimentConfig};
use crate::output::{write_run, Manifest};
use crate::registry;

pub const EXIT_OK: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_VALIDATION: i32 = 2;
pub const EXIT_GATE: i32 = 3;

pub const SEED_ENV: &str = "LONELYWALKS_SEED";

#[derive(Debug, Parser)]
#[command(name = "lonelywalks", version, about = "Lonely branching random walk experiments")]
pub struct Args {
    /// Experiment name; see --list.
    pub experiment: Option<String>,
    /// TOML config layered over the experiment defaults.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Exit with code 3 when a statistical gate fails.
    #[arg(long)]
    pub check: bool,
    /// Base seed; overrides the config and the environment.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory; overrides `output.dir`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Print an experiment's fields and defaults.
    #[arg(long, value_name = "NAME")]
    pub describe: Option<String>,
    /// List registered experiments.
    #[arg(long)]
    pub list: bool,
}

fn config_for(args: &Args, env_seed: Option<String>) -> Result<ExperimentConfig, ConfigError> {
    let name = args.experiment.as_deref().ok_or_else(|| ConfigError {
        path: "<experiment>".into(),
        message: format!("missing experiment name; one of {}", registry::names().join(", ")),
    })?;
    let exp = registry::find(name).ok_or_else(|| ConfigError {
        path: "<experiment>".into(),
        message: format!("unknown experiment `{name}`; one of {}", registry::names().join(", ")),
    })?;
    let text = match &args.config {
        Some(p) => std::fs::read_to_string(p).map_err(|e| ConfigError {
            path: p.display().to_string(),
            message: e.to_string(),
        })?,
        None => String::new(),
    };
    let mut cfg = ExperimentConfig::parse_over(exp.defaults, &text)?;
    if cfg.experiment != name {
        return Err(ConfigError {
            path: "experiment".into(),
            message: format!("config is for `{}` but `{name}` was requested", cfg.experiment),
        });
    }
    if let Some(s) = env_seed {
        cfg.seed = s.trim().parse().map_err(|_| ConfigError {
            path: SEED_ENV.into(),
            message: format!("`{s}` is not an unsigned integer"),
        })?;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(o) = &args.out {
        cfg.output.dir = o.display().to_string();
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Runs the CLI and returns the process exit code.
pub fn run<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let args = match Args::try_parse_from(argv) {
        Ok(a) => a,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_VALIDATION } else { EXIT_OK };
            let _ = e.print();
            return code;
        }
    };
    if args.list {
        for e in registry::registry() {
            println!("{:<20} {}", e.name, e.summary);
        }
        return EXIT_OK;
    }
    if let Some(name) = &args.describe {
        return match registry::describe(name) {
            Some(text) => {
                println!("{text}");
                EXIT_OK
            }
            None => {
                eprintln!("error: unknown experiment `{name}`");
                EXIT_VALIDATION
            }
        };
    }
    let cfg = match config_for(&args, std::env::var(SEED_ENV).ok()) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return EXIT_VALIDATION;
        }
    };
    let exp = registry::find(&cfg.experiment).expect("validated above");
    let start = Instant::now();
    let outcome = match (exp.run)(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e:#}");
            return if e.downcast_ref::<ConfigError>().is_some() {
                EXIT_VALIDATION
            } else {
                EXIT_RUNTIME
            };
        }
    };
    let wall = start.elapsed().as_secs_f64();
    let config_echo = cfg.to_toml();
    let manifest = Manifest {
        experiment: &cfg.experiment,
        seed: cfg.seed,
        config: &config_echo,
        core_version: lonelywalks_core::VERSION,
        harness_version: env!("CARGO_PKG_VERSION"),
        threads: worker_threads(),
        wall_time_seconds: wall,
        gates_passed: outcome.passed(),
    };
    let dir = PathBuf::from(&cfg.output.dir);
    if let Err(e) = write_run(&dir, &outcome, &manifest, cfg.output.json_summary) {
        eprintln!("error: {e:#}");
        return EXIT_RUNTIME;
    }
    for g in &outcome.gates {
        let z = g.z.map(|z| format!(" z={z:.3}")).unwrap_or_default();
        println!("{} {}{z} {}", if g.passed { "PASS" } else { "FAIL" }, g.name, g.detail);
    }
    println!("wrote {} ({wall:.1}s)", dir.display());
    if args.check && !outcome.passed() {
        return EXIT_GATE;
    }
    EXIT_OK
}

fn worker_threads() -> usize {
    std::thread::available_parallelism().map_or(1, |n| n.get())
}
