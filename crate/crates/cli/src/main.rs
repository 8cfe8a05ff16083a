//! `ncprotect`: simulate, analyze, provision and compare network-coding
//! protection from the command line.
//!
//! Every command writes one JSON report (to `--output` or stdout) carrying
//! the schema version and an echo of its configuration. Exit status is 0 on
//! success, 1 when the command's verdict is negative and 2 on bad input.

mod commands;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "ncprotect", version, about = "Network-coding 1+N protection toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run the protocol slot by slot over a scenario.
    Simulate(SimulateArgs),
    /// Check every failure pattern up to a size against the coefficients.
    Analyze(AnalyzeArgs),
    /// Choose working paths and protection walks for a demand set.
    Provision(ProvisionArgs),
    /// Compare 1+1, 1+N and SBPP costs over random demand sets.
    Compare(CompareArgs),
    /// Verify the arithmetic of one GF(2^m) field.
    CheckField(CheckFieldArgs),
}

#[derive(Args, Debug, Clone, Serialize)]
struct Common {
    /// Report destination; stdout when absent.
    #[arg(long)]
    output: Option<PathBuf>,
    /// Worker threads for sweeps and solvers; 0 picks one per core.
    #[arg(long, default_value_t = 0)]
    jobs: usize,
}

#[derive(Args, Debug, Clone, Serialize)]
struct FieldArgs {
    /// Field width m of GF(2^m); overrides the scenario.
    #[arg(long)]
    field_bits: Option<u8>,
    /// Reduction polynomial, decimal or 0x-hex; the smallest irreducible one
    /// of the width when absent.
    #[arg(long, value_parser = parse_poly)]
    poly: Option<u32>,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
enum Coeffs {
    Ones,
    Vandermonde,
    Cauchy,
    Random,
    Complete,
}

#[derive(Args, Debug, Clone, Serialize)]
struct SimulateArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    field: FieldArgs,
    /// Coefficient scheme; overrides the scenario.
    #[arg(long, value_enum)]
    coeffs: Option<Coeffs>,
    /// Failures the coefficients must withstand; rounds with at most this
    /// many failures are expected to recover.
    #[arg(long)]
    max_failures: Option<usize>,
    #[arg(long)]
    rounds: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    /// Plain XOR encoding instead of scaled coefficients.
    #[arg(long)]
    xor: bool,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct AnalyzeArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    scenario: PathBuf,
    #[command(flatten)]
    field: FieldArgs,
    #[arg(long, value_enum)]
    coeffs: Option<Coeffs>,
    /// Largest pattern size checked; the scenario's budget when absent.
    #[arg(long)]
    max_failures: Option<usize>,
    /// Stop after this many patterns and flag the result partial.
    #[arg(long, default_value_t = ncprotect::analysis::DEFAULT_PATTERN_CAP)]
    max_patterns: usize,
    #[arg(long)]
    seed: Option<u64>,
    #[command(flatten)]
    common: Common,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
enum Scheme {
    #[value(name = "1+n")]
    #[serde(rename = "1+n")]
    OnePlusN,
    #[value(name = "1+1")]
    #[serde(rename = "1+1")]
    OnePlusOne,
    #[value(name = "sbpp")]
    #[serde(rename = "sbpp")]
    Sbpp,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize, PartialEq, Eq)]
#[serde(rename_all = "lowercase")]
enum Solver {
    /// Group decomposition with branch and bound per group.
    Exact,
    /// The whole model in one branch and bound.
    Monolithic,
    /// Greedy merging; never claims optimality.
    Heuristic,
}

#[derive(Args, Debug, Clone, Serialize)]
struct ProvisionArgs {
    #[arg(long)]
    topology: PathBuf,
    #[arg(long)]
    traffic: PathBuf,
    #[arg(long, value_enum, default_value = "1+n")]
    scheme: Scheme,
    /// Solver for the 1+N scheme.
    #[arg(long, value_enum, default_value = "exact")]
    solver: Solver,
    /// Time budget per solve, in milliseconds.
    #[arg(long)]
    budget_ms: Option<u64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Also write the 1+N model in LP format here.
    #[arg(long)]
    export_lp: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CompareArgs {
    #[arg(long)]
    topology: PathBuf,
    /// Demand counts, one table row each.
    #[arg(long, value_delimiter = ',', default_value = "2,3,4,5")]
    counts: Vec<usize>,
    /// Demand draws per count.
    #[arg(long, default_value_t = 10)]
    draws: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Time budget per solve, in milliseconds.
    #[arg(long)]
    budget_ms: Option<u64>,
    /// Also write the cost table as CSV here.
    #[arg(long)]
    csv: Option<PathBuf>,
    #[command(flatten)]
    common: Common,
}

#[derive(Args, Debug, Clone, Serialize)]
struct CheckFieldArgs {
    #[arg(long, default_value_t = 8)]
    field_bits: u8,
    #[arg(long, value_parser = parse_poly)]
    poly: Option<u32>,
    /// Random triples checked when the field is too large for exhaustion.
    #[arg(long, default_value_t = 100_000)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[command(flatten)]
    common: Common,
}

fn parse_poly(tok: &str) -> Result<u32, String> {
    ncprotect::simulator::parse_poly(tok).ok_or_else(|| format!("'{tok}' is not a polynomial"))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Simulate(a) => commands::simulate(a),
        Command::Analyze(a) => commands::analyze(a),
        Command::Provision(a) => commands::provision(a),
        Command::Compare(a) => commands::compare(a),
        Command::CheckField(a) => commands::check_field(a),
    };
    match outcome {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::from(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(2)
        }
    }
}
