//! Command-line front end: CSV ingestion, configuration and the
//! fit → frontier → bootstrap → test pipeline with its artifacts.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;
pub mod ingest;
pub mod svg;

use std::ffi::OsString;

use clap::{Parser, Subcommand};

pub use config::{ConfigArgs, RunConfig};
pub use error::{CliError, Result};
pub use ingest::ingest_csv;

#[derive(Debug, Parser)]
#[command(name = "sfbreak", version, about = "Stochastic frontier estimation with breakdown-frontier sensitivity analysis")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    #[command(flatten)]
    pub args: ConfigArgs,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Fit the model and write fit.json
    Fit,
    /// Breakdown frontier from fit.json, without bands
    Frontier,
    /// Frontier with bootstrap bands; re-reads the data behind fit.json
    Bootstrap,
    /// Bonferroni-corrected tests of b(c, e0) ≤ 0; writes tests.csv
    Test,
    /// Check closed-form deltas against quadrature and simulation
    CheckDeltas {
        /// Number of parameter points
        #[arg(long, default_value_t = 100)]
        grid: usize,
        /// Simulation draws per point
        #[arg(long, default_value_t = 100_000)]
        draws: usize,
        /// Relative tolerance against quadrature
        #[arg(long, default_value_t = 1e-8)]
        tol: f64,
        /// Largest acceptable |z| of a simulated delta
        #[arg(long, default_value_t = 5.0)]
        z_max: f64,
    },
    /// fit, frontier (with bands when bootstrap_B > 0) and, if requested, test
    Run,
}

/// Parses `argv` and runs the selected stage, printing a short report.
pub fn run<I, T>(argv: I) -> Result<()>
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = Cli::try_parse_from(argv).map_err(|e| match e.kind() {
        clap::error::ErrorKind::DisplayHelp | clap::error::ErrorKind::DisplayVersion => {
            print!("{e}");
            CliError::Help
        }
        _ => CliError::Config(e.to_string()),
    })?;
    execute(&cli)
}

pub fn execute(cli: &Cli) -> Result<()> {
    if let Command::CheckDeltas { grid, draws, tol, z_max } = &cli.command {
        let seed = cli.args.seed.unwrap_or(0);
        let rows = commands::check_deltas(*grid, *draws, *tol, *z_max, seed)?;
        print!("{}", commands::format_delta_table(&rows, *tol, *z_max));
        let failed = rows.iter().filter(|r| !r.quadrature_pass).count();
        if failed > 0 {
            return Err(CliError::CheckFailed(format!("quadrature disagrees at {failed} of {} points", rows.len())));
        }
        return Ok(());
    }
    let cfg = cli.args.resolve()?;
    match cli.command {
        Command::Fit => {
            let stage = commands::fit(&cfg)?;
            print!("{}", commands::describe_fit(&stage.artifact));
        }
        Command::Frontier => {
            let (_, fit) = commands::load_fit(&cfg)?;
            let f = commands::frontier(&cfg, &fit, None)?;
            print!("{}", commands::describe_frontier(&f, &cfg.out_dir));
        }
        Command::Bootstrap => {
            let (artifact, fit) = commands::load_fit(&cfg)?;
            if cfg.bootstrap_b == 0 {
                return Err(CliError::Config("bootstrap_B = 0 disables the bootstrap".into()));
            }
            let data = commands::reload_data(&cfg, &artifact)?;
            let f = commands::frontier(&cfg, &fit, Some(&data))?;
            print!("{}", commands::describe_frontier(&f, &cfg.out_dir));
        }
        Command::Test => {
            let (_, fit) = commands::load_fit(&cfg)?;
            let report = commands::test(&cfg, &fit)?;
            print_tests(&report);
        }
        Command::Run => {
            let stage = commands::fit(&cfg)?;
            print!("{}", commands::describe_fit(&stage.artifact));
            let f = commands::frontier(&cfg, &stage.fit, Some(&stage.data))?;
            print!("{}", commands::describe_frontier(&f, &cfg.out_dir));
            if cfg.run_tests {
                print_tests(&commands::test(&cfg, &stage.fit)?);
            }
        }
        Command::CheckDeltas { .. } => unreachable!(),
    }
    Ok(())
}

fn print_tests(report: &sfbreak::TestReport) {
    println!(
        "Bonferroni critical value z(1 - {}/{}) = {:.4}",
        report.alpha, report.p, report.critical_value
    );
    for ((c, t), r) in report.c_points.iter().zip(&report.t_statistics).zip(&report.rejections) {
        println!("  c = {c:.4}  t = {t:>9.4}  {}", if *r { "reject" } else { "keep" });
    }
}
