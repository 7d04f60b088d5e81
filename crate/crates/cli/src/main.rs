//! `swarmsync` command-line front end.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context};
use clap::{Parser, Subcommand};
use swarmsync::harness::{self, RunConfig};
use swarmsync::io;

/// Exit status for a completed command whose audits recorded a FAIL.
const EXIT_AUDIT_FAIL: u8 = 1;
/// Exit status for bad configs, bad arguments and I/O failures.
const EXIT_ERROR: u8 = 2;

#[derive(Debug, Parser)]
#[command(name = "swarmsync", version, about = "Simulate and audit sampled-data unicycle swarms")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Run one seeded simulation and write trajectory, metrics, audits and summary.
    Run {
        /// JSON run configuration.
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Overrides the seed in the configuration.
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; falls back to `outputs.dir` in the config, then `out`.
        #[arg(long, value_name = "DIR", env = "SWARMSYNC_OUT")]
        out: Option<PathBuf>,
    },
    /// Run the configuration once per seed and print the aggregate as JSON.
    Campaign {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
        /// Seed range `A..B` (half-open) or `A..=B`, or a comma-separated list.
        #[arg(long, value_name = "RANGE", value_parser = parse_seeds)]
        seeds: SeedList,
        /// Also write the summary to this file.
        #[arg(long, value_name = "FILE")]
        out: Option<PathBuf>,
    },
    /// Print every theorem condition report for a configuration as a JSON array.
    Check {
        #[arg(long, value_name = "FILE")]
        config: PathBuf,
    },
    /// Write a named scenario configuration to `DIR/config.json`.
    Scenario {
        #[command(subcommand)]
        scenario: Scenario,
    },
    /// Re-run the audits on a stored run directory and compare with the stored verdicts.
    Audit {
        /// Directory written by `run`.
        #[arg(long, value_name = "DIR")]
        traj: PathBuf,
    },
}

#[derive(Debug, Subcommand)]
enum Scenario {
    /// Three leaders steer twenty followers right, up, right, down, right past an obstacle.
    Fig3 {
        #[arg(long, value_name = "DIR", env = "SWARMSYNC_OUT")]
        out: PathBuf,
        /// Leader blending weight.
        #[arg(long, default_value_t = 0.5)]
        vartheta: f64,
        /// Tracking error that triggers the next reference segment.
        #[arg(long, default_value_t = 0.05)]
        epsilon: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, default_value_t = harness::FIG3_STEPS)]
        steps: usize,
    },
}

#[derive(Debug, Clone)]
struct SeedList(Vec<u64>);

fn parse_seeds(s: &str) -> Result<SeedList, String> {
    let num = |t: &str| t.trim().parse::<u64>().map_err(|e| format!("bad seed {t:?}: {e}"));
    let seeds: Vec<u64> = if let Some((a, b)) = s.split_once("..=") {
        (num(a)?..=num(b)?).collect()
    } else if let Some((a, b)) = s.split_once("..") {
        (num(a)?..num(b)?).collect()
    } else {
        s.split(',').map(num).collect::<Result<_, _>>()?
    };
    if seeds.is_empty() {
        return Err(format!("seed range {s:?} is empty"));
    }
    Ok(SeedList(seeds))
}

fn load_config(path: &Path) -> anyhow::Result<RunConfig> {
    let config: RunConfig = io::read_json(path).with_context(|| format!("reading {}", path.display()))?;
    config.validate().with_context(|| format!("validating {}", path.display()))?;
    Ok(config)
}

fn print_json<S: serde::Serialize>(value: &S) -> anyhow::Result<()> {
    println!("{}", serde_json::to_string_pretty(value)?);
    Ok(())
}

fn status(failed: bool) -> ExitCode {
    if failed {
        ExitCode::from(EXIT_AUDIT_FAIL)
    } else {
        ExitCode::SUCCESS
    }
}

fn execute(cli: Cli) -> anyhow::Result<ExitCode> {
    match cli.command {
        Command::Run { config, seed, out } => {
            let mut cfg = load_config(&config)?;
            if let Some(seed) = seed {
                cfg.seed = seed;
            }
            let dir = out.or_else(|| cfg.outputs.dir.clone()).unwrap_or_else(|| PathBuf::from("out"));
            let outcome = harness::run_to_dir(&cfg, &dir)?;
            print_json(&outcome.summary)?;
            eprintln!("wrote {}", dir.display());
            Ok(status(outcome.has_failures()))
        }
        Command::Campaign { config, seeds, out } => {
            let cfg = load_config(&config)?;
            let summary = harness::campaign(&cfg, &seeds.0)?;
            if let Some(path) = out {
                io::write_json(&path, &summary)?;
            }
            print_json(&summary)?;
            if summary.error_count > 0 {
                eprintln!("{} of {} runs failed to complete", summary.error_count, summary.run_count);
            }
            Ok(status(summary.verdict_totals.values().any(|c| c.fail > 0)))
        }
        Command::Check { config } => {
            let cfg = load_config(&config)?;
            print_json(&harness::check_config(&cfg)?)?;
            Ok(ExitCode::SUCCESS)
        }
        Command::Scenario { scenario: Scenario::Fig3 { out, vartheta, epsilon, seed, steps } } => {
            let mut cfg = harness::scenario_fig3(vartheta, epsilon);
            cfg.seed = seed;
            cfg.steps = steps;
            cfg.outputs.dir = Some(out.clone());
            cfg.validate()?;
            std::fs::create_dir_all(&out).with_context(|| format!("creating {}", out.display()))?;
            let path = out.join("config.json");
            io::write_json(&path, &cfg)?;
            println!("{}", path.display());
            Ok(ExitCode::SUCCESS)
        }
        Command::Audit { traj } => {
            let audit = harness::audit_dir(&traj).with_context(|| format!("auditing {}", traj.display()))?;
            print_json(&audit.report)?;
            let mismatch = audit.stored.is_some() && !audit.matches_stored();
            if mismatch {
                eprintln!("recomputed verdicts differ from {}", harness::AUDITS_FILE);
            }
            if audit.report.is_none() {
                bail!("no audits recomputed");
            }
            Ok(status(audit.has_failures() || mismatch))
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_ERROR } else { 0 };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match execute(cli) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(EXIT_ERROR)
        }
    }
}
