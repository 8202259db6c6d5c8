//! `dominative`: command-line driver for the dominative p-Laplace laboratory.
//!
//! Every subcommand reads a JSON config, writes its tables and summaries into
//! `--out`, and finishes with a `manifest.json`. Exit status is 0 on success,
//! 1 when a run completes but its checks fail, and 2 for configuration or
//! usage errors.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use dominative::harness::{self, config::parse_list, json_text, output, Config, RunManifest, StrategyConfig};
use dominative::Error;

#[derive(Debug, Parser)]
#[command(name = "dominative", version, about = "Tug-of-war games and the dominative p-Laplace heat equation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long, value_name = "FILE")]
    config: PathBuf,
    /// Output directory, created if missing.
    #[arg(long, value_name = "DIR", default_value = "out")]
    out: PathBuf,
    /// Overrides the seed from the config.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Solve the dynamic programming principle on a grid.
    Solve(Common),
    /// Play the game by Monte Carlo from one starting point.
    Simulate {
        #[command(flatten)]
        common: Common,
        #[arg(long)]
        samples: Option<usize>,
        /// greedy, random or fixed:x1,x2,..
        #[arg(long)]
        strategy: Option<String>,
        /// Starting point followed by the starting time, e.g. 0.1,0.2,0.5
        #[arg(long, allow_hyphen_values = true)]
        start: Option<String>,
        /// Record single rounds with direction e1 instead of whole games.
        #[arg(long)]
        one_step: bool,
    },
    /// Check the asymptotic mean value formula on a smooth function.
    AmvfCheck(Common),
    /// Convergence of the grid value to a reference solution as eps shrinks.
    Converge(Common),
    /// Compare Monte Carlo game values with the grid value.
    Compare(Common),
    /// Check the barrier function identities and its one-step drift.
    BarrierCheck(Common),
}

/// A finished run: its files, a summary, and whether its checks held.
struct Run {
    files: Vec<(&'static str, String)>,
    passed: bool,
    message: String,
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    if let Err(e) = configure_threads() {
        eprintln!("error: {e}");
        return ExitCode::from(2);
    }
    match execute(cli.command) {
        Ok(run) => {
            println!("{}", run.message);
            if run.passed {
                ExitCode::SUCCESS
            } else {
                eprintln!("checks failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() || matches!(e, Error::OutOfCoverage(_)) { 2 } else { 1 })
        }
    }
}

/// Applies `DOMINATIVE_THREADS` (an integer >= 1) to the worker pool.
fn configure_threads() -> Result<(), Error> {
    let Ok(text) = std::env::var("DOMINATIVE_THREADS") else {
        return Ok(());
    };
    let threads: usize = text
        .trim()
        .parse()
        .ok()
        .filter(|&n| n >= 1)
        .ok_or_else(|| Error::Config(format!("DOMINATIVE_THREADS must be an integer >= 1, got '{text}'")))?;
    #[cfg(feature = "parallel")]
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Error::Config(format!("cannot size the worker pool: {e}")))?;
    #[cfg(not(feature = "parallel"))]
    let _ = threads;
    Ok(())
}

fn load(common: &Common) -> Result<Config, Error> {
    let text = std::fs::read_to_string(&common.config)
        .map_err(|e| Error::Config(format!("cannot read {}: {e}", common.config.display())))?;
    let mut config = Config::from_json(&text)?;
    if let Some(seed) = common.seed {
        config.seed = seed;
    }
    Ok(config)
}

fn execute(command: Command) -> Result<Run, Error> {
    let (name, common) = match &command {
        Command::Solve(c) => ("solve", c),
        Command::Simulate { common, .. } => ("simulate", common),
        Command::AmvfCheck(c) => ("amvf-check", c),
        Command::Converge(c) => ("converge", c),
        Command::Compare(c) => ("compare", c),
        Command::BarrierCheck(c) => ("barrier-check", c),
    };
    let out = common.out.clone();
    let mut config = load(common)?;
    if let Command::Simulate { samples, strategy, start, .. } = &command {
        let section = config.simulate.get_or_insert_with(Default::default);
        if let Some(samples) = samples {
            section.samples = *samples;
        }
        if let Some(strategy) = strategy {
            section.strategy = StrategyConfig::parse(strategy)?;
        }
        if let Some(start) = start {
            section.start = Some(parse_list(start)?);
        }
    }
    let mut manifest = RunManifest::new(name, config.hash(), config.seed);
    let run = match command {
        Command::Solve(_) => solve(&config, &mut manifest)?,
        Command::Simulate { one_step: true, .. } => one_step(&config, &mut manifest)?,
        Command::Simulate { .. } => simulate(&config, &mut manifest)?,
        Command::AmvfCheck(_) => amvf(&config, &mut manifest)?,
        Command::Converge(_) => converge(&config, &mut manifest)?,
        Command::Compare(_) => compare(&config, &mut manifest)?,
        Command::BarrierCheck(_) => barrier(&config, &mut manifest)?,
    };
    manifest.versions.insert("dominative-cli".into(), env!("CARGO_PKG_VERSION").into());
    manifest.write(&out, &run.files)?;
    Ok(run)
}

fn solve(config: &Config, manifest: &mut RunManifest) -> Result<Run, Error> {
    let (grid, summary) = manifest.time("solve", || harness::run_solve(config))?;
    let csv = manifest.time("emit", || output::grid_csv(&grid));
    Ok(Run {
        message: format!(
            "{} nodes x {} levels, max residual {:.3e}",
            summary.nodes, summary.levels, summary.residual.max_abs_residual
        ),
        passed: summary.passed(),
        files: vec![("grid.csv", csv), ("solve.json", json_text(&summary)?)],
    })
}

fn simulate(config: &Config, manifest: &mut RunManifest) -> Result<Run, Error> {
    let (summary, csv) = manifest.time("simulate", || harness::run_simulate(config))?;
    Ok(Run {
        message: format!(
            "{}: mean {:.6e} +- {:.2e} over {} games, max tau {}",
            summary.strategy,
            summary.estimate.mean,
            summary.estimate.confidence_radius,
            summary.estimate.num_samples,
            summary.max_tau
        ),
        passed: summary.passed(),
        files: vec![("samples.csv", csv), ("summary.json", json_text(&summary)?)],
    })
}

fn one_step(config: &Config, manifest: &mut RunManifest) -> Result<Run, Error> {
    let (report, samples) = manifest.time("simulate", || harness::run_step_moments(config))?;
    Ok(Run {
        message: format!(
            "random fraction {:.4} (expected {:.4}), mean square {:.6e} (expected {:.6e})",
            report.moments.random_fraction,
            report.expected_random_fraction,
            report.moments.mean_square,
            report.expected_square
        ),
        passed: report.passed(),
        files: vec![("steps.csv", output::steps_csv(&samples)), ("summary.json", json_text(&report)?)],
    })
}

fn amvf(config: &Config, manifest: &mut RunManifest) -> Result<Run, Error> {
    let report = manifest.time("amvf", || harness::run_amvf(config))?;
    Ok(Run {
        message: format!("{} rows for {}", report.rows.len(), report.function),
        passed: report.passed(),
        files: vec![("amvf.csv", report.csv()), ("summary.json", json_text(&report)?)],
    })
}

fn converge(config: &Config, manifest: &mut RunManifest) -> Result<Run, Error> {
    let study = manifest.time("converge", || harness::run_convergence(config))?;
    let rate = if study.exact { "exact".to_string() } else { format!("{:.3}", study.rate.unwrap_or(f64::NAN)) };
    let errors: Vec<String> = study.errors().iter().map(|e| format!("{e:.3e}")).collect();
    Ok(Run {
        message: format!("{}: errors [{}], rate {rate}", study.reference, errors.join(", ")),
        passed: study.passed(),
        files: vec![("convergence.csv", study.csv()), ("summary.json", json_text(&study)?)],
    })
}

fn compare(config: &Config, manifest: &mut RunManifest) -> Result<Run, Error> {
    let report = manifest.time("compare", || harness::run_game_vs_dpp(config))?;
    Ok(Run {
        message: format!(
            "{} probes, max standardized discrepancy {:.3}, max tau {}",
            report.probes.len(),
            report.max_standardized,
            report.max_tau
        ),
        passed: report.passed(),
        files: vec![("compare.csv", report.csv()), ("summary.json", json_text(&report)?)],
    })
}

fn barrier(config: &Config, manifest: &mut RunManifest) -> Result<Run, Error> {
    let report = manifest.time("barrier", || harness::run_barrier(config))?;
    Ok(Run {
        message: format!(
            "D_p w relative error {:.2e}, drift probes {}",
            report.max_relative_dominative_error,
            report.drift.probes.len()
        ),
        passed: report.passed(),
        files: vec![("barrier.csv", report.csv()), ("summary.json", json_text(&report)?)],
    })
}
