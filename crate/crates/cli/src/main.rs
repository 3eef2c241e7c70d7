//! `dynkin-lab`: run, validate and list Dynkin game scenarios.
//!
//! Exit codes: 0 all checks pass, 1 a check failed, 2 config error,
//! 3 numerical error.

mod examples;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use dynkin_core::scenario::{emit_report, parse_config, parse_scenario, run_scenario, Scenario, ScenarioError};

use examples::{Example, EXAMPLES};

#[derive(Parser)]
#[command(name = "dynkin-lab", version, about = "Dynkin stopping games under g-expectations")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write `<name>.values.csv` and `<name>.summary.json`.
    Run {
        /// Scenario file, or the name of a shipped example.
        config: String,
        /// Output directory.
        #[arg(long, default_value = "reports")]
        out: PathBuf,
        /// Override the scenario seed.
        #[arg(long)]
        seed: Option<u64>,
        /// Override a config key, e.g. `lattice.steps=4` (repeatable).
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// Parse and cross-validate a scenario without running it.
    Validate {
        config: String,
        #[arg(long = "override", value_name = "KEY=VALUE")]
        overrides: Vec<String>,
    },
    /// List the shipped example scenarios.
    ListExamples,
}

fn load(config: &str, overrides: &[String]) -> Result<Scenario, ScenarioError> {
    let path = Path::new(config);
    match Example::find(config) {
        Some(ex) if !path.exists() => {
            let s = parse_scenario(ex.text, overrides)?;
            s.prepare()?;
            Ok(s)
        }
        _ => parse_config(path, overrides),
    }
}

fn fail(err: &ScenarioError) -> ExitCode {
    let kind = match err {
        ScenarioError::Numerical(_) => "numerical error",
        _ => "config error",
    };
    eprintln!("{kind}: {err}");
    ExitCode::from(err.exit_code() as u8)
}

fn run(config: &str, out: &Path, seed: Option<u64>, mut overrides: Vec<String>) -> ExitCode {
    if let Some(seed) = seed {
        overrides.push(format!("seed={seed}"));
    }
    let scenario = match load(config, &overrides) {
        Ok(s) => s,
        Err(e) => return fail(&e),
    };
    let report = match run_scenario(&scenario) {
        Ok(r) => r,
        Err(e) => return fail(&e),
    };
    let width = report.checks.iter().map(|c| c.name.len()).max().unwrap_or(0);
    for c in &report.checks {
        println!(
            "{:<4} {:<width$}  {:.3e} (tol {:.0e})",
            if c.passed { "PASS" } else { "FAIL" },
            c.name,
            c.value,
            c.tolerance,
        );
    }
    let (values, summary) = match emit_report(&report, out) {
        Ok(paths) => paths,
        Err(e) => {
            eprintln!("cannot write reports to {}: {e}", out.display());
            return ExitCode::from(2);
        }
    };
    println!("wrote {} and {}", values.display(), summary.display());
    println!(
        "{}: {} in {:.3}s",
        report.scenario.name,
        if report.passed() { "pass" } else { "fail" },
        report.wall_time.as_secs_f64()
    );
    if report.passed() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(1)
    }
}

fn main() -> ExitCode {
    match Cli::parse().command {
        Command::Run {
            config,
            out,
            seed,
            overrides,
        } => run(&config, &out, seed, overrides),
        Command::Validate { config, overrides } => match load(&config, &overrides) {
            Ok(s) => {
                println!("{}: valid {:?} scenario", s.name, s.pipeline);
                ExitCode::SUCCESS
            }
            Err(e) => fail(&e),
        },
        Command::ListExamples => {
            for ex in EXAMPLES {
                println!("{:<20} {:<34} {}", ex.name, ex.path, ex.summary());
            }
            ExitCode::SUCCESS
        }
    }
}
