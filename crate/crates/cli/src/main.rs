use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::Result;
use clap::{Parser, Subcommand};
use dunkl_cli::commands::{density_csv, expand_text, parse_nus, parse_times, simulate_cmd};
use dunkl_cli::config::{ExperimentConfig, Suite};
use dunkl_cli::fixtures::dump_fixtures;
use dunkl_cli::run_suite;

#[derive(Parser)]
#[command(name = "dunkl", version, about = "Dunkl processes: symbolic operators, densities, path simulation and chaos expansions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run verification suites and write the report.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the suites listed in the config.
        #[arg(long)]
        suite: Option<Suite>,
    },
    /// Write m, Q and integrand golden files.
    Fixtures {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write path, jump and decomposition CSVs.
    Simulate {
        #[arg(long)]
        config: PathBuf,
    },
    /// Write the transition density on a grid around x.
    Density {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        system: String,
        /// Comma-separated start point.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        x: Vec<f64>,
        #[arg(long, default_value_t = 1.0)]
        t: f64,
        #[arg(long, default_value_t = 4.0)]
        half_width: f64,
        #[arg(long, default_value_t = 201)]
        points: usize,
    },
    /// Print the chaos expansion of a product of m_ν(X_t).
    Expand {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        system: String,
        /// One multi-index per time, e.g. `1,0;0,2`.
        #[arg(long)]
        nus: String,
        /// Increasing observation times, e.g. `1/2,1`.
        #[arg(long)]
        times: String,
    },
    /// Print an example configuration.
    Example,
}

fn print_paths(paths: &[PathBuf]) {
    for p in paths {
        println!("{}", p.display());
    }
}

fn run(cli: Cli) -> Result<bool> {
    match cli.command {
        Command::Run { config, suite } => {
            let cfg = ExperimentConfig::load(&config)?;
            let suites = match suite {
                Some(s) => vec![s],
                None => cfg.suites.clone(),
            };
            let mut ok = true;
            for s in suites {
                let report = run_suite(&cfg, s)?;
                let failures: Vec<_> = report.failures().collect();
                println!("{s}: {} checks, {} failed", report.checks.len(), failures.len());
                for f in failures {
                    let target = f.target.map(|t| t.to_string()).unwrap_or_else(|| "-".into());
                    println!("  FAIL {} value={} target={target}", f.name, f.value);
                }
                ok &= report.passed;
            }
            Ok(ok)
        }
        Command::Fixtures { config } => {
            print_paths(&dump_fixtures(&ExperimentConfig::load(&config)?)?);
            Ok(true)
        }
        Command::Simulate { config } => {
            print_paths(&simulate_cmd(&ExperimentConfig::load(&config)?)?);
            Ok(true)
        }
        Command::Density { config, system, x, t, half_width, points } => {
            let cfg = ExperimentConfig::load(&config)?;
            let s = cfg.system(&system)?;
            let x = if x.is_empty() { s.x0.clone() } else { x };
            print!("{}", density_csv(s, cfg.density.series_degree, &x, t, half_width, points)?);
            Ok(true)
        }
        Command::Expand { config, system, nus, times } => {
            let cfg = ExperimentConfig::load(&config)?;
            let s = cfg.system(&system)?;
            print!("{}", expand_text(s, parse_nus(&nus)?, parse_times(&times)?)?);
            Ok(true)
        }
        Command::Example => {
            print!("{}", ExperimentConfig::example().canonical());
            Ok(true)
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
