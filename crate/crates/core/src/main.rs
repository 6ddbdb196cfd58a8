use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use optrf::experiment::{compare_m_requirements, run_experiment, ExperimentConfig, Overrides};
use optrf::learn::SamplerKind;
use optrf::Error;

#[derive(Parser)]
#[command(
    name = "optrf",
    version,
    about = "Optimized random features: sampling, simulation and learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Sample features, fit them and write the run reports.
    Run {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
        #[arg(long)]
        seed_override: Option<u64>,
        /// exact, oracle-sim, circuit-sim or baseline
        #[arg(long)]
        tier_override: Option<SamplerKind>,
    },
    /// Sweep the feature count for the configured tier against the baseline.
    Compare {
        config: PathBuf,
        #[arg(long)]
        output_dir: Option<PathBuf>,
    },
    /// Run the built-in invariant checks.
    Selftest,
}

fn load(config: &Path, overrides: &Overrides) -> Result<ExperimentConfig, Error> {
    let mut parsed = ExperimentConfig::from_path(config)?;
    parsed.apply(overrides);
    Ok(parsed)
}

fn execute(command: Command) -> Result<(), Error> {
    // a closed pipe downstream is not an error worth reporting
    let mut out = std::io::stdout().lock();
    match command {
        Command::Run {
            config,
            output_dir,
            seed_override,
            tier_override,
        } => {
            let overrides = Overrides {
                output_dir,
                seed: seed_override,
                tier: tier_override,
            };
            let report = run_experiment(&load(&config, &overrides)?)?;
            let _ = writeln!(
                out,
                "final_error {} with M = {} ({} tier)",
                report.metrics.final_error, report.metrics.m, report.metrics.sampler
            );
            for f in &report.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
        }
        Command::Compare { config, output_dir } => {
            let overrides = Overrides {
                output_dir,
                ..Overrides::default()
            };
            let report = compare_m_requirements(&load(&config, &overrides)?)?;
            for s in &report.summaries {
                let median = s
                    .median_m
                    .map_or_else(|| "unreached".to_string(), |m| m.to_string());
                let _ = writeln!(
                    out,
                    "{}: median M {} ({}/{} seeds reached)",
                    s.sampler, median, s.seeds_reached, s.seeds
                );
            }
            for f in &report.files {
                let _ = writeln!(out, "wrote {}", f.display());
            }
        }
        Command::Selftest => {
            let checks = optrf::selftest::run_all();
            for c in &checks {
                let _ = writeln!(
                    out,
                    "{} {}: {}",
                    if c.passed { "PASS" } else { "FAIL" },
                    c.name,
                    c.detail
                );
            }
            if checks.iter().any(|c| !c.passed) {
                return Err(Error::Numeric("self test failed".into()));
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match execute(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            match e {
                Error::Config { .. } => ExitCode::from(2),
                _ => ExitCode::FAILURE,
            }
        }
    }
}
