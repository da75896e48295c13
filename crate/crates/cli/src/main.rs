//! `pgc`: run protocol parties, benchmarks, and transcript checks.
//!
//! Exit codes: 0 success, 1 usage or setup error, 2 protocol abort,
//! 3 abort that caught the generator cheating.

mod inputs;
mod net;
mod replay;
mod run;
mod saveload;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

#[derive(Parser)]
#[command(name = "pgc", version, about = "Outsourced garbled-circuit runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one party over TCP, or all three in-process with `--role local`.
    Run(Box<RunArgs>),
    /// Measure per-bit save and load cost of garbled wire values.
    BenchSaveload(BenchArgs),
    /// Verify recorded transcripts offline.
    Replay {
        #[arg(required = true)]
        transcripts: Vec<PathBuf>,
    },
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum RoleArg {
    Gen,
    Evl,
    Cloud,
    Local,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Malicious,
    Semi,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
pub enum OtArg {
    Group,
    Dealer,
}

#[derive(Args, Debug)]
pub struct RunArgs {
    #[arg(long, value_enum)]
    pub role: RoleArg,
    /// Program as `name:p1,p2`, e.g. `millionaires:16`.
    #[arg(long)]
    pub program: String,
    #[arg(long, default_value_t = 16)]
    pub circuits: usize,
    /// Label length K in bits.
    #[arg(long, default_value_t = 80)]
    pub security: usize,
    /// Evaluator input encoding width.
    #[arg(long, default_value_t = pgc_core::protocol::DEFAULT_ENCODING_WIDTH)]
    pub encoding: usize,
    #[arg(long, default_value_t = pgc_core::protocol::DEFAULT_TAG_BITS)]
    pub tag_bits: usize,
    #[arg(long, value_enum, default_value_t = ModeArg::Malicious)]
    pub mode: ModeArg,
    /// Address to accept peer connections on.
    #[arg(long)]
    pub listen: Option<String>,
    /// Peer to dial, as `role=host:port`. Repeatable.
    #[arg(long)]
    pub connect: Vec<String>,
    /// Saved-state file of the generator or cloud.
    #[arg(long)]
    pub state: Option<PathBuf>,
    /// Directory for state files when `--state` is absent.
    #[arg(long, env = "PGC_STATE_DIR")]
    pub state_dir: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub trials: usize,
    /// CSV output file; stdout when absent.
    #[arg(long)]
    pub csv: Option<PathBuf>,
    /// Hex seed for all randomness. Entropy when absent.
    #[arg(long)]
    pub seed: Option<String>,
    /// This party's input: decimal, `0x` hex or `0b` binary. Random when absent.
    #[arg(long)]
    pub input: Option<String>,
    /// Generator input for `--role local`.
    #[arg(long)]
    pub gen_input: Option<String>,
    /// Evaluator input for `--role local`.
    #[arg(long)]
    pub evl_input: Option<String>,
    #[arg(long, default_value_t = 1)]
    pub exec_id: u64,
    #[arg(long, default_value_t = 120)]
    pub timeout_secs: u64,
    /// OT backend. The dealer works only in-process.
    #[arg(long, value_enum, default_value_t = OtArg::Group)]
    pub ot: OtArg,
    /// Directory receiving `<from>-<to>.pgct` transcripts.
    #[arg(long)]
    pub record: Option<PathBuf>,
    /// Fault injection, e.g. `gate-row:random`. Debug builds only.
    #[arg(long, hide = true)]
    pub tamper: Option<String>,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Saved wire counts.
    #[arg(long, value_delimiter = ',', default_value = "64,256,1024")]
    pub wires: Vec<usize>,
    #[arg(long, default_value_t = 16)]
    pub circuits: usize,
    #[arg(long, default_value_t = 80)]
    pub security: usize,
    #[arg(long, default_value_t = 5)]
    pub reps: usize,
    #[arg(long)]
    pub csv: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<String>,
    /// Directory for the temporary state files.
    #[arg(long, env = "PGC_STATE_DIR")]
    pub state_dir: Option<PathBuf>,
}

pub const EXIT_SETUP: u8 = 1;
pub const EXIT_ABORT: u8 = 2;
pub const EXIT_CHEAT: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.cmd {
        Command::Run(args) => run::cmd_run(&args),
        Command::BenchSaveload(args) => saveload::cmd_bench_saveload(&args),
        Command::Replay { transcripts } => replay::cmd_replay(&transcripts),
    };
    match result {
        Ok(code) => ExitCode::from(code),
        Err(e) => {
            eprintln!("pgc: {e}");
            ExitCode::from(EXIT_SETUP)
        }
    }
}

/// Errors that stop a command before any protocol result exists.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Program(#[from] pgc_core::circuit::programs::ProgramError),
    #[error(transparent)]
    Augment(#[from] pgc_core::circuit::AugmentError),
    #[error(transparent)]
    State(#[from] pgc_core::state::StateError),
}

pub fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

pub fn parse_seed(s: &str) -> Result<u64, CliError> {
    let t = s.trim_start_matches("0x");
    u64::from_str_radix(t, 16).map_err(|_| usage(format!("seed `{s}` is not a 64-bit hex value")))
}
