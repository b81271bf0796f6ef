//! Command-line surface for the list-learning workbench: concept-class
//! generation and I/O, exact dimension computation, learner runs, Ramsey
//! extraction, and interior-point reduction experiments.
//!
//! Every run prints a report with an echoed `config =` line; feeding that
//! report (or the bare config JSON) to `listlab replay` reproduces the
//! result section byte for byte. Randomized commands require an explicit
//! --seed; there is no implicit entropy anywhere.
//!
//! Exit codes: 0 ok, 2 parse error, 3 budget/gate refusal, 4 realizability
//! error, 5 precondition violation, 1 anything else. File formats are
//! described in docs/FORMATS.md.

use clap::{Args, Parser, Subcommand};
use listlab::error::Error;
use serde::{Deserialize, Serialize};
use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

mod commands;
mod report;

#[derive(Parser)]
#[command(
    name = "listlab",
    version,
    about = "List-learning combinatorics workbench",
    after_help = "File formats (concept classes, trees, colorings, experiment configs) \
                  are documented in docs/FORMATS.md. The LISTLAB_BUDGET environment \
                  variable overrides default search/enumeration budgets."
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a witness concept class and write it as a class file.
    Gen(GenArgs),
    /// Compute an exact dimension of a concept class, with witness.
    Dim(DimArgs),
    /// Run an online list learner over a labeled sequence file.
    Learn(LearnArgs),
    /// Ramsey machinery: depth bounds, tree extraction, homogeneous sets.
    Ramsey(RamseyArgs),
    /// Interior-point reduction experiment from a config file.
    Ipp(IppArgs),
    /// Re-run a command from a report's echoed config (or a bare config).
    Replay { file: PathBuf },
}

#[derive(Args, Serialize, Deserialize, Clone)]
pub struct GenArgs {
    /// monotone | branch | full
    #[arg(long)]
    pub family: String,
    /// Domain size (monotone, full).
    #[arg(short = 'n', long)]
    pub n: Option<usize>,
    /// Label count (monotone, full).
    #[arg(long)]
    pub labels: Option<usize>,
    /// Tree depth (branch).
    #[arg(long)]
    pub depth: Option<u32>,
    /// List size k (branch).
    #[arg(short, long)]
    pub k: Option<usize>,
    /// Enumeration budget; defaults to LISTLAB_BUDGET or 10^6.
    #[arg(long)]
    pub budget: Option<u64>,
    /// Output class file; printed in the report when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Args, Serialize, Deserialize, Clone)]
pub struct DimArgs {
    /// Concept class file.
    pub class_file: PathBuf,
    /// littlestone | monotone
    #[arg(long)]
    pub kind: String,
    /// List size k.
    #[arg(short, long)]
    pub k: usize,
    /// Search budget in nodes; defaults to LISTLAB_BUDGET or 2*10^7.
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Args, Serialize, Deserialize, Clone)]
pub struct LearnArgs {
    /// Concept class file for the SOA list learner.
    pub class_file: Option<PathBuf>,
    /// Use the built-in monotone-function learner instead of a class file.
    #[arg(long, default_value_t = false)]
    pub builtin_monotone: bool,
    /// List size k.
    #[arg(short, long)]
    pub k: usize,
    /// Sequence file: one `point label` pair per line.
    #[arg(long)]
    pub seq: PathBuf,
    /// Master seed (reserved for randomized learners; echoed for replay).
    #[arg(long)]
    pub seed: u64,
    /// Search budget for the SOA learner's dimension computations.
    #[arg(long)]
    pub budget: Option<u64>,
}

#[derive(Args, Serialize, Deserialize, Clone)]
pub struct RamseyArgs {
    /// bound | tree | set | tower | logstar
    #[arg(long)]
    pub mode: String,
    /// Target depth d (bound, tree).
    #[arg(long)]
    pub d: Option<u64>,
    /// Chain size m (bound, tree).
    #[arg(long)]
    pub m: Option<u32>,
    /// Color count (bound, tree with seeded coloring, set).
    #[arg(long)]
    pub colors: Option<u64>,
    /// Tree arity b (bound, tree).
    #[arg(long)]
    pub arity: Option<usize>,
    /// Host tree depth (tree); defaults to the required depth.
    #[arg(long)]
    pub host_depth: Option<u64>,
    /// Coloring file (tree, set); see docs/FORMATS.md.
    #[arg(long)]
    pub coloring_file: Option<PathBuf>,
    /// Seed for the pseudorandom coloring (tree, set).
    #[arg(long)]
    pub seed: Option<u64>,
    /// Universe size N (set).
    #[arg(long)]
    pub universe: Option<usize>,
    /// Colored tuple size t (set).
    #[arg(long)]
    pub tuple: Option<usize>,
    /// Homogeneous subset size s (set).
    #[arg(long)]
    pub subset_size: Option<usize>,
    /// Desk-scale gate cap, as a power of two (tree).
    #[arg(long, default_value_t = 48)]
    pub cap_bits: u32,
    /// Tower height t (tower).
    #[arg(long)]
    pub height: Option<u32>,
    /// Tower argument x (tower).
    #[arg(long)]
    pub x: Option<u64>,
    /// Iterated-log argument (logstar).
    #[arg(long)]
    pub value: Option<f64>,
}

#[derive(Args, Serialize, Deserialize, Clone)]
pub struct IppArgs {
    /// Experiment config file; see docs/FORMATS.md.
    pub config_file: PathBuf,
}

/// Canonical, replayable description of one run.
#[derive(Serialize, Deserialize, Clone)]
#[serde(tag = "cmd", rename_all = "kebab-case")]
pub enum RunConfig {
    Gen(GenArgs),
    Dim(DimArgs),
    Learn(LearnArgs),
    Ramsey(RamseyArgs),
    Ipp(IppArgs),
}

pub fn default_budget(fallback: u64) -> u64 {
    std::env::var("LISTLAB_BUDGET")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(fallback)
}

fn exit_code_for(err: &Error) -> u8 {
    match err {
        Error::Parse { .. } => 2,
        Error::Budget { .. } | Error::Gate { .. } => 3,
        Error::Realizability(_) => 4,
        Error::Precondition(_) => 5,
        _ => 1,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let config = match cli.command {
        Command::Gen(a) => RunConfig::Gen(a),
        Command::Dim(a) => RunConfig::Dim(a),
        Command::Learn(a) => RunConfig::Learn(a),
        Command::Ramsey(a) => RunConfig::Ramsey(a),
        Command::Ipp(a) => RunConfig::Ipp(a),
        Command::Replay { file } => match report::config_from_file(&file) {
            Ok(c) => c,
            Err(e) => {
                eprintln!("error: {e}");
                return ExitCode::from(exit_code_for(&e));
            }
        },
    };

    let started = Instant::now();
    match commands::execute(&config) {
        Ok(result_section) => {
            print!("{}", report::render(&config, &result_section, started.elapsed()));
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
