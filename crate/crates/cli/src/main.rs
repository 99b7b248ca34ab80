//! Batch front end: runs experiments, writes `report.json` and CSV tables.
//!
//! Exit codes: 0 all checks pass, 1 some check fails, 2 configuration
//! error, 3 numerical failure (non-convergence and friends), 4 I/O error.

mod config;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::Context;
use clap::{Parser, Subcommand};
use pseudoharmonic::experiments::{default_suite, Experiment, ExperimentSpec};
use pseudoharmonic::report::Check;
use pseudoharmonic::Error;

use config::{parse_h, Config};

const DEFAULT_SEED: u64 = 42;

#[derive(Parser)]
#[command(
    name = "pseudoharmonic",
    version,
    about = "Experiments on weakly harmonic maps into pseudo-Riemannian targets"
)]
struct Cli {
    /// Output directory for report.json and CSV tables
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    /// Seed for the random corpora (overrides the config file)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Anchor grid spacing, e.g. `1/256` or `0.004` (overrides the config file)
    #[arg(long, global = true, value_parser = parse_h)]
    h: Option<f64>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Exact-solution recovery on S^1_1
    Solve,
    /// Conservation law, Θ identity and Noether algebra
    Verify,
    /// Lorentz and Morrey norms
    Norms,
    /// Hodge decomposition of random fields
    Hodge,
    /// Coupled solve into a stationary Lorentzian target
    Lorentz,
    /// The unbounded so(1,1) weak solution
    Counterexample,
    /// Amplitude sweep on the S^2_1 cap family
    Probe,
    /// All seven experiments with default parameters
    Suite,
    /// Experiments listed in a TOML configuration file
    Run {
        #[arg(long)]
        config: PathBuf,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Exit {
    Pass = 0,
    ChecksFailed = 1,
    Config = 2,
    Numerical = 3,
    Io = 4,
}

fn classify(e: &Error) -> Exit {
    match e {
        Error::InvalidInput(_) | Error::DimensionMismatch { .. } | Error::InvalidIndex { .. } => Exit::Config,
        Error::Io(_) | Error::Json(_) => Exit::Io,
        _ => Exit::Numerical,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let code = match run(&cli) {
        Ok(code) => code,
        Err((code, e)) => {
            eprintln!("error: {e:#}");
            code
        }
    };
    ExitCode::from(code as u8)
}

fn run(cli: &Cli) -> Result<Exit, (Exit, anyhow::Error)> {
    let cfg = match &cli.command {
        Command::Run { config } => Config::load(config).map_err(|e| (Exit::Config, e))?,
        Command::Suite => Config {
            experiments: default_suite(),
            ..Config::default()
        },
        single => {
            let kind = match single {
                Command::Solve => "solve",
                Command::Verify => "verify",
                Command::Norms => "norms",
                Command::Hodge => "hodge",
                Command::Lorentz => "lorentz",
                Command::Counterexample => "counterexample",
                Command::Probe => "probe",
                Command::Suite | Command::Run { .. } => unreachable!("handled above"),
            };
            Config {
                experiments: vec![ExperimentSpec::default_for(kind).expect("known kind")],
                ..Config::default()
            }
        }
    };
    let seed = cli.seed.or(cfg.seed).unwrap_or(DEFAULT_SEED);
    let h = cli.h.or(cfg.h);

    let mut reports = Vec::new();
    let mut failure = None;
    for mut spec in cfg.experiments {
        if let Some(h) = h {
            spec.set_h(h);
        }
        eprintln!("running {}", spec.name());
        match spec.run(seed) {
            Ok(x) => reports.push(x),
            Err(e) => {
                let mut x = Experiment::new(spec.name());
                x.checks.push(Check::at_least("completed", 0.0, 1.0));
                x.notes.push(format!("error: {e}"));
                reports.push(x);
                failure = Some((
                    classify(&e),
                    anyhow::Error::new(e).context(format!("experiment {}", spec.name())),
                ));
                break;
            }
        }
    }

    write_outputs(&cli.out, &reports).map_err(|e| (Exit::Io, e))?;
    for x in &reports {
        for c in &x.checks {
            println!(
                "{:<16} {:<36} {:>14.6e}  tol {:<10e} {}",
                x.experiment,
                c.name,
                c.value,
                c.tol,
                if c.pass { "pass" } else { "FAIL" }
            );
        }
    }
    if let Some(f) = failure {
        return Err(f);
    }
    Ok(if reports.iter().all(Experiment::passed) {
        Exit::Pass
    } else {
        Exit::ChecksFailed
    })
}

/// `report.json` holds the array of experiment reports; every table goes to
/// `<experiment>_<table>.csv` (a repeated experiment gets `_2`, `_3`, …).
fn write_outputs(out: &Path, reports: &[Experiment]) -> anyhow::Result<()> {
    std::fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let json = serde_json::to_string_pretty(reports)?;
    let path = out.join("report.json");
    std::fs::write(&path, json + "\n").with_context(|| format!("writing {}", path.display()))?;
    let mut seen: HashMap<&str, usize> = HashMap::new();
    for x in reports {
        let n = seen.entry(&x.experiment).or_default();
        *n += 1;
        let stem = if *n == 1 {
            x.experiment.clone()
        } else {
            format!("{}_{n}", x.experiment)
        };
        for t in &x.tables {
            let path = out.join(format!("{stem}_{}.csv", t.name));
            std::fs::write(&path, &t.csv).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    Ok(())
}
