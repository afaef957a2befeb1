use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, ValueEnum};

use fcm::harness::config::{parse_list, Experiment, ExperimentConfig};
use fcm::harness::output::write_file;
use fcm::harness::run_experiment;

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Command {
    Solve,
    Convergence,
    ConditionSweep,
    SpecialCase,
}

/// Finite cell experiments with least-squares stabilized Nitsche boundary conditions.
#[derive(Debug, Parser)]
#[command(version, about)]
struct Cli {
    #[arg(value_enum)]
    experiment: Command,
    /// Flat `key = value` configuration file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated mesh sizes.
    #[arg(long)]
    h: Option<String>,
    #[arg(long)]
    shifts: Option<usize>,
    #[arg(long)]
    tau: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long = "c-alpha")]
    c_alpha: Option<f64>,
    /// Drop the least-squares terms (standard Nitsche with the same penalty).
    #[arg(long = "no-ls")]
    no_ls: bool,
    /// Comma-separated displacements for special-case.
    #[arg(long)]
    delta: Option<String>,
    /// disc, rotated45, aligned, unit-square or polygon:<csv>
    #[arg(long)]
    geometry: Option<String>,
    /// trig, quadratic or paraboloid
    #[arg(long)]
    solution: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
    /// Exit with status 2 when an acceptance threshold fails.
    #[arg(long)]
    assert: bool,
    /// Full-scale sweep sizes (100 shifts for convergence, 500 for condition-sweep).
    #[arg(long)]
    full: bool,
}

fn build_config(cli: &Cli) -> fcm::Result<ExperimentConfig> {
    let experiment = match cli.experiment {
        Command::Solve => Experiment::Solve,
        Command::Convergence => Experiment::Convergence,
        Command::ConditionSweep => Experiment::ConditionSweep,
        Command::SpecialCase => Experiment::SpecialCase,
    };
    let mut cfg = match &cli.config {
        Some(path) => ExperimentConfig::from_file(experiment, path)?,
        None => ExperimentConfig::defaults(experiment),
    };
    if cli.full {
        match experiment {
            Experiment::Convergence => {
                cfg.shifts = 100;
                cfg.h_list = vec![0.2, 0.1, 0.05, 0.025, 0.0125];
            }
            Experiment::ConditionSweep => cfg.shifts = 500,
            _ => {}
        }
    }
    if let Some(g) = &cli.geometry {
        cfg.set("geometry", g)?;
    }
    if let Some(h) = &cli.h {
        cfg.h_list = parse_list(h)?;
    }
    if let Some(s) = cli.shifts {
        cfg.shifts = s;
    }
    if let Some(t) = cli.tau {
        cfg.params.tau = t;
    }
    if let Some(b) = cli.beta {
        cfg.params.beta = b;
    }
    if let Some(c) = cli.c_alpha {
        cfg.params.c_alpha = c;
        cfg.c_alpha_list = vec![c];
    }
    if cli.no_ls {
        cfg.params.ls_terms = false;
    }
    if let Some(d) = &cli.delta {
        cfg.deltas = parse_list(d)?;
    }
    if let Some(s) = &cli.solution {
        cfg.set("solution", s)?;
    }
    if let Some(o) = &cli.out {
        cfg.output = Some(o.clone());
    }
    cfg.validate()?;
    Ok(cfg)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let cfg = match build_config(&cli) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let output = match run_experiment(&cfg) {
        Ok(o) => o,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    match &cfg.output {
        Some(path) => {
            if let Err(e) = write_file(path, &output.csv) {
                eprintln!("error: {e}");
                return ExitCode::from(1);
            }
        }
        None => print!("{}", output.csv),
    }
    for line in &output.summary {
        eprintln!("{line}");
    }
    let mut failed = false;
    for c in &output.checks {
        eprintln!("{} {} {}", if c.passed { "PASS" } else { "FAIL" }, c.name, c.detail);
        failed |= !c.passed;
    }
    if cli.assert && failed {
        return ExitCode::from(2);
    }
    ExitCode::SUCCESS
}
