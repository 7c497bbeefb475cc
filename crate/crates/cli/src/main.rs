mod commands;
mod report;
mod scenario;

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use sha2::{Digest, Sha256};

use commands::{execute, CliError};
use report::{render_text, write_csv, Command, Mode, Report, RunOptions};

/// Verify, search and bound equilibria of the trust game under
/// partition-based beliefs.
#[derive(Parser)]
#[command(name = "mleq", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Check a candidate (sigma, partition) against every equilibrium concept.
    Verify(Common),
    /// Find equilibria on a grid or in closed form.
    Search {
        #[command(flatten)]
        common: Common,
        #[arg(long, value_enum, default_value = "grid")]
        mode: Mode,
    },
    /// Evaluate the sufficient conditions, the max-min table and genericity.
    Bounds(Common),
    /// Compare fine and pooled partitions under noisy observation.
    Noise(Common),
    /// Re-run a saved JSON report and compare the result byte for byte.
    Replay { report: PathBuf },
}

#[derive(Args)]
struct Common {
    /// TOML scenario file.
    #[arg(long)]
    scenario: PathBuf,
    /// Indifference tolerance; for grid searches, the best-reply slack (default 1/G).
    #[arg(long)]
    tolerance: Option<f64>,
    /// Grid resolution G for searches, falsification and probes.
    #[arg(long)]
    grid: Option<usize>,
    /// Monte Carlo seed (overrides the scenario's).
    #[arg(long)]
    seed: Option<u64>,
    /// Largest contingency count the exhaustive partition scan accepts.
    #[arg(long)]
    max_bell: Option<usize>,
    /// Write a CSV extract here.
    #[arg(long)]
    csv: Option<PathBuf>,
    /// Write the JSON report here.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Print JSON instead of text.
    #[arg(long)]
    json: bool,
    /// Record wall-clock time in the report.
    #[arg(long)]
    timing: bool,
}

fn digest(text: &str) -> String {
    hex::encode(Sha256::digest(text.as_bytes()))
}

fn run(command: Command, options: RunOptions, scenario_text: String, timing: bool) -> Result<Report, CliError> {
    let start = Instant::now();
    let body = execute(command, &options, &scenario_text)?;
    let elapsed = start.elapsed().as_secs_f64() * 1e3;
    Ok(Report {
        tool: format!("mleq {}", env!("CARGO_PKG_VERSION")),
        command,
        options,
        input_digest: digest(&scenario_text),
        scenario: scenario_text,
        body,
        timing_ms: timing.then_some(elapsed),
    })
}

fn read(path: &Path) -> Result<String, CliError> {
    std::fs::read_to_string(path).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))
}

fn write(path: &Path, text: &str) -> Result<(), CliError> {
    std::fs::write(path, text).map_err(|e| CliError::Other(format!("{}: {e}", path.display())))
}

fn run_common(command: Command, common: Common, mode: Option<Mode>) -> Result<ExitCode, CliError> {
    let text = read(&common.scenario)?;
    let options = RunOptions {
        mode,
        grid: common.grid,
        tolerance: common.tolerance,
        seed: common.seed,
        max_bell: common.max_bell,
    };
    let report = run(command, options, text, common.timing)?;
    if common.json {
        print!("{}", report.to_json());
    } else {
        print!("{}", render_text(&report));
    }
    if let Some(path) = &common.report {
        write(path, &report.to_json())?;
    }
    if let Some(path) = &common.csv {
        write_csv(&report, path).map_err(CliError::Other)?;
    }
    Ok(if report.falsifications().is_empty() {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(4)
    })
}

fn replay(path: &Path) -> Result<ExitCode, CliError> {
    let saved: Report =
        serde_json::from_str(&read(path)?).map_err(|e| CliError::Input(format!("{}: {e}", path.display())))?;
    if digest(&saved.scenario) != saved.input_digest {
        return Err(CliError::Input("embedded scenario does not match its digest".into()));
    }
    let mut original = saved.clone();
    original.timing_ms = None;
    let fresh = run(saved.command, saved.options, saved.scenario, false)?;
    if fresh.to_json() == original.to_json() {
        println!("replay: identical ({})", &fresh.input_digest[..16]);
        Ok(ExitCode::SUCCESS)
    } else {
        println!("replay: results differ");
        Ok(ExitCode::FAILURE)
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Sub::Verify(c) => run_common(Command::Verify, c, None),
        Sub::Search { common, mode } => run_common(Command::Search, common, Some(mode)),
        Sub::Bounds(c) => run_common(Command::Bounds, c, None),
        Sub::Noise(c) => run_common(Command::Noise, c, None),
        Sub::Replay { report } => replay(&report),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {}", e.message());
        ExitCode::from(e.exit_code())
    })
}
