//! `polyside`: solve, minimize, decompose, validate, generate, and
//! benchmark from the command line. Each run prints line-delimited JSON
//! records to standard output.

#![allow(clippy::result_large_err)]

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};

use report::{RunReport, Status};

#[derive(Parser, Debug)]
#[command(name = "polyside", version, about = "Polymatroid LPs with side constraints in exact arithmetic")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
    /// Instance file (JSON).
    #[arg(long, global = true)]
    pub instance: Option<PathBuf>,
    /// Cross-run the brute-force oracle and fail with status 3 on mismatch.
    #[arg(long, global = true)]
    pub check: bool,
    /// Write solver trace events to this file, one JSON object per line.
    #[arg(long, global = true)]
    pub trace: Option<PathBuf>,
    #[arg(long, global = true, default_value_t = 0)]
    pub seed: u64,
    #[arg(long, global = true, value_enum, default_value_t = Sense::MaxF)]
    pub sense: Sense,
    #[arg(long, global = true, value_enum)]
    pub family: Option<FamilyArg>,
    #[arg(long, global = true)]
    pub n: Option<usize>,
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Corrupts the result before checking it.
    #[arg(long, global = true, hide = true)]
    pub inject_fault: bool,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Optimize a linear objective over the polymatroid with side bounds.
    Solve,
    /// Minimize a submodular function.
    Sfm,
    /// Solve, then write the optimum as a lottery over priority orders.
    Decompose,
    /// Check polymatroid axioms of an instance, or conservation laws of a table.
    Validate {
        /// Performance table (JSON) instead of an instance.
        #[arg(long)]
        table: Option<PathBuf>,
    },
    /// Write a generated instance.
    Gen {
        /// Generate a minimization instance instead of an LP.
        #[arg(long)]
        sfm: bool,
    },
    /// Sweep sizes and record work counters for slope fitting.
    Bench {
        #[arg(long)]
        sfm: bool,
        #[arg(long, default_value_t = 3)]
        reps: u64,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum Sense {
    MaxF,
    MinB,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum FamilyArg {
    Cut,
    Concave,
    Coverage,
    Table,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Sfm => "sfm",
            Command::Decompose => "decompose",
            Command::Validate { .. } => "validate",
            Command::Gen { .. } => "gen",
            Command::Bench { .. } => "bench",
        }
    }
}

/// Misuse detected after parsing.
#[derive(Debug)]
pub struct UsageError(pub String);

fn main() -> ExitCode {
    let argv: Vec<String> = std::env::args().skip(1).collect();
    let cli = Cli::parse();
    let start = Instant::now();
    let (outcome, digest) = match commands::run(&cli) {
        Ok(v) => v,
        Err(UsageError(msg)) => {
            eprintln!("error: {msg}");
            return ExitCode::from(2);
        }
    };
    let status = outcome.status;
    let report = RunReport {
        record: "run",
        command: cli.command.name().to_string(),
        argv,
        instance_digest: digest,
        status,
        result: outcome.result,
        stats: outcome.stats,
        check: outcome.check,
        wall_ms: start.elapsed().as_millis() as u64,
    };
    println!("{}", serde_json::to_string(&report).expect("report serializes"));
    if status != Status::Ok {
        eprintln!("status: {}", serde_json::to_value(status).expect("status").as_str().unwrap_or(""));
    }
    ExitCode::from(status.exit_code())
}
