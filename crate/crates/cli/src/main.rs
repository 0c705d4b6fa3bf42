//! `ordwalk` command-line front end.

mod eval;
mod params;
mod simulate;

use clap::{Parser, Subcommand};
use ordwalk::verify::{self, Tier, VerifyOptions};
use ordwalk::Error;
use params::Params;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

const DEFAULT_SEED: u64 = 7;

#[derive(Parser)]
#[command(name = "ordwalk", version, about = "Ordered exponential random walks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// indented JSON instead of one line
    #[arg(long, global = true)]
    pretty: bool,
    /// append the manifest to FILE instead of printing it
    #[arg(long, global = true, value_name = "FILE")]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate a closed form or a quadrature.
    Eval {
        #[arg(value_enum)]
        what: eval::Quantity,
        #[command(flatten)]
        params: Params,
    },
    /// Run a Monte Carlo experiment.
    Simulate {
        #[arg(value_enum)]
        what: simulate::Experiment,
        #[command(flatten)]
        params: Params,
    },
    /// Run the cross-validation suite.
    Verify {
        #[arg(long, default_value = "quick")]
        tier: Tier,
        /// criterion names or numbers, comma separated
        #[arg(long, value_delimiter = ',')]
        only: Vec<String>,
        #[arg(long, env = "ORDWALK_SEED")]
        seed: Option<u64>,
        #[arg(long, default_value_t = 64)]
        streams: u32,
    },
    /// Re-run the first manifest in FILE and compare its outputs.
    Replay { file: PathBuf },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Manifest {
    command: String,
    params: Value,
    seed: Option<u64>,
    version: String,
    wall_time: f64,
    outputs: Value,
}

/// Result of running one command, before timing and packaging.
struct Outcome {
    command: String,
    params: Value,
    seed: Option<u64>,
    outputs: Value,
    status: u8,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let start = Instant::now();
    let result = match cli.command {
        Command::Replay { file } => replay(&file),
        other => run(other),
    };
    match result {
        Ok(o) => {
            let m = Manifest {
                command: o.command,
                params: o.params,
                seed: o.seed,
                version: env!("CARGO_PKG_VERSION").into(),
                wall_time: start.elapsed().as_secs_f64(),
                outputs: o.outputs,
            };
            if let Err(e) = emit(&m, cli.pretty, cli.out.as_deref()) {
                eprintln!("error: cannot write manifest: {e}");
                return ExitCode::from(2);
            }
            ExitCode::from(o.status)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn emit(m: &Manifest, pretty: bool, out: Option<&std::path::Path>) -> std::io::Result<()> {
    let text = if pretty { serde_json::to_string_pretty(m) } else { serde_json::to_string(m) }.map_err(std::io::Error::other)?;
    match out {
        Some(path) => {
            let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
            writeln!(f, "{text}")
        }
        None => {
            let mut stdout = std::io::stdout().lock();
            writeln!(stdout, "{text}")
        }
    }
}

fn to_value<T: Serialize>(v: &T) -> Value {
    serde_json::to_value(v).expect("plain data serializes")
}

fn run(command: Command) -> Result<Outcome, Error> {
    match command {
        Command::Eval { what, params } => {
            let outputs = eval::run(what, &params)?;
            Ok(Outcome { command: format!("eval {}", what.name()), params: to_value(&params), seed: None, outputs, status: 0 })
        }
        Command::Simulate { what, params } => {
            let seed = params.seed.unwrap_or(DEFAULT_SEED);
            let outputs = simulate::run(what, &params, seed)?;
            Ok(Outcome { command: format!("simulate {}", what.name()), params: to_value(&params), seed: Some(seed), outputs, status: 0 })
        }
        Command::Verify { tier, only, seed, streams } => {
            let opts = VerifyOptions { tier, seed: seed.unwrap_or(DEFAULT_SEED), streams, only };
            let report = verify::run_with_progress(&opts, &mut |o| {
                eprintln!("criterion {:02} {:<18} {}", o.index, o.name, if o.passed() { "PASS" } else { "FAIL" });
            })?;
            let table = report.render();
            eprint!("{table}");
            let status = if report.all_passed() { 0 } else { 4 };
            let failing: Vec<&str> = report.outcomes.iter().filter(|o| !o.passed()).map(|o| o.name.as_str()).collect();
            let outputs = serde_json::json!({
                "passed": report.all_passed(),
                "failing": failing,
                "report": table,
                "outcomes": report.outcomes,
            });
            Ok(Outcome { command: "verify".into(), params: to_value(&opts), seed: Some(opts.seed), outputs, status })
        }
        Command::Replay { .. } => unreachable!("handled by the caller"),
    }
}

fn replay(file: &std::path::Path) -> Result<Outcome, Error> {
    let text = std::fs::read_to_string(file).map_err(|e| Error::InvalidInput(format!("{}: {e}", file.display())))?;
    let line = text.lines().find(|l| !l.trim().is_empty()).ok_or_else(|| Error::InvalidInput("empty manifest file".into()))?;
    let recorded: Manifest = serde_json::from_str(line).map_err(|e| Error::InvalidInput(format!("bad manifest: {e}")))?;
    let bad = |e: serde_json::Error| Error::InvalidInput(format!("bad manifest parameters: {e}"));
    let (kind, name) = recorded.command.split_once(' ').unwrap_or((recorded.command.as_str(), ""));
    let command = match kind {
        "eval" => Command::Eval { what: eval::Quantity::parse(name)?, params: serde_json::from_value(recorded.params.clone()).map_err(bad)? },
        "simulate" => {
            Command::Simulate { what: simulate::Experiment::parse(name)?, params: serde_json::from_value(recorded.params.clone()).map_err(bad)? }
        }
        "verify" => {
            let o: VerifyOptions = serde_json::from_value(recorded.params.clone()).map_err(bad)?;
            Command::Verify { tier: o.tier, only: o.only, seed: Some(o.seed), streams: o.streams }
        }
        other => return Err(Error::InvalidInput(format!("cannot replay command '{other}'"))),
    };
    let fresh = run(command)?;
    let same = fresh.outputs == recorded.outputs;
    Ok(Outcome {
        command: "replay".into(),
        params: serde_json::json!({ "file": file.display().to_string(), "command": recorded.command }),
        seed: recorded.seed,
        outputs: serde_json::json!({ "identical": same, "outputs": fresh.outputs }),
        status: if same { 0 } else { 4 },
    })
}
