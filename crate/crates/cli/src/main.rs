use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use slider_cli::commands::{dispatch, Command, EXIT_USAGE};
use slider_cli::config::parse_config;

/// Rigid slider on a cavitating lubricant film.
#[derive(Debug, Parser)]
#[command(name = "slider", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,

    /// JSON run configuration.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Directory for the artifacts (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Overrides the configured seed of randomized checks.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Debug, Clone, Copy, Subcommand)]
enum Cmd {
    /// Integrate the slider motion: trajectory.csv and simulate.json.
    Simulate,
    /// Locate a stationary clearance: steady.json.
    Steady,
    /// Tabulate the load-capacity curve: gcurve.csv.
    Gcurve,
    /// Report the a priori bounds: bounds.json.
    Bounds,
    /// Run the reference checks: verify.json.
    Verify,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = match cli.command {
        Cmd::Simulate => Command::Simulate,
        Cmd::Steady => Command::Steady,
        Cmd::Gcurve => Command::Gcurve,
        Cmd::Bounds => Command::Bounds,
        Cmd::Verify => Command::Verify,
    };
    let Some(path) = cli.config else {
        eprintln!("error: --config <path> is required");
        return ExitCode::from(EXIT_USAGE as u8);
    };
    let text = match std::fs::read_to_string(&path) {
        Ok(t) => t,
        Err(e) => {
            eprintln!("error: cannot read {}: {e}", path.display());
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    let mut cfg = match parse_config(&text) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(EXIT_USAGE as u8);
        }
    };
    if let Some(seed) = cli.seed {
        cfg.seed = seed;
    }
    let base = path.parent().unwrap_or(Path::new("."));
    let outcome = dispatch(&cfg, command, base, &cli.out);
    println!(
        "{}",
        serde_json::to_string_pretty(&outcome.report).expect("report serializes")
    );
    if outcome.exit != 0 {
        if let Some(reason) = outcome.report.get("reason").and_then(|r| r.as_str()) {
            eprintln!("error: {reason}");
        }
    }
    ExitCode::from(outcome.exit as u8)
}
