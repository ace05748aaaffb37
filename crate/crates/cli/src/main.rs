//! `oranfl` command-line entry point.
//!
//! Exit codes: 0 success, 1 usage error, 2 config error, 3 runtime failure.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use oranfl::config::{parse_config, ConfigError};
use oranfl::fl::SelectionStrategy;
use oranfl::output::{self, OutputError};
use oranfl::sim::{SimConfig, SimError};

#[derive(Parser)]
#[command(name = "oranfl", version, about = "Multi-RAT O-RAN federated learning simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run one experiment exactly as configured.
    Run(RunArgs),
    /// Run several FL strategies on identical seeds, topology and data.
    Compare(RunArgs),
    /// Recompute the summary from the trace and curves files and compare.
    Verify {
        /// Directory holding a previous run's output.
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct RunArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Replace the configured seeds (comma-separated list).
    #[arg(long, value_delimiter = ',')]
    seed_override: Vec<u64>,
    /// Strategy for `run`; strategy list for `compare` (default: all).
    #[arg(long, value_delimiter = ',')]
    strategy: Vec<String>,
    #[arg(long)]
    rounds_override: Option<u32>,
}

enum Failure {
    Usage(String),
    Config(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Config(_) => 2,
            Failure::Runtime(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Config(m) | Failure::Runtime(m) => m,
        }
    }
}

impl From<ConfigError> for Failure {
    fn from(e: ConfigError) -> Self {
        Failure::Config(format!("config error: {e}"))
    }
}

impl From<OutputError> for Failure {
    fn from(e: OutputError) -> Self {
        match e {
            OutputError::Sim(SimError::Validation { key, message }) => {
                Failure::Config(format!("config error: {key}: {message}"))
            }
            OutputError::Usage(m) => Failure::Usage(m),
            other => Failure::Runtime(format!("error: {other}")),
        }
    }
}

fn load(args: &RunArgs) -> Result<SimConfig, Failure> {
    let mut cfg = parse_config(&args.config)?;
    if !args.seed_override.is_empty() {
        cfg.seeds = args.seed_override.clone();
    }
    if let Some(rounds) = args.rounds_override {
        cfg.rounds = rounds;
    }
    Ok(cfg)
}

fn check_overrides(cfg: &SimConfig) -> Result<(), Failure> {
    cfg.validate().map_err(|e| match e {
        SimError::Validation { key, message } => Failure::Config(format!("config error: {key}: {message}")),
        other => Failure::Runtime(other.to_string()),
    })
}

fn print_summary(path: &Path) -> Result<(), Failure> {
    let text = std::fs::read_to_string(path).map_err(|e| Failure::Runtime(format!("{}: {e}", path.display())))?;
    print!("{text}");
    Ok(())
}

fn execute(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run(args) => {
            let mut cfg = load(&args)?;
            match args.strategy.as_slice() {
                [] => {}
                [one] => cfg.fl.strategy = one.clone(),
                _ => return Err(Failure::Usage("run takes a single --strategy".into())),
            }
            check_overrides(&cfg)?;
            let bundle = output::run_single(&cfg, &args.out)?;
            print_summary(&bundle.summary)
        }
        Command::Compare(args) => {
            let cfg = load(&args)?;
            let strategies: Vec<String> = if args.strategy.is_empty() {
                SelectionStrategy::NAMES.iter().map(|s| s.to_string()).collect()
            } else {
                args.strategy.clone()
            };
            for s in &strategies {
                check_overrides(&output::strategy_config(&cfg, s))?;
            }
            let bundle = output::run_compare(&cfg, &strategies, &args.out)?;
            print_summary(&bundle.summary)
        }
        Command::Verify { out } => {
            let reports = output::verify(&out)?;
            println!("summary verified: {} strategies", reports.len());
            Ok(())
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match execute(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("{}", f.message());
            ExitCode::from(f.code())
        }
    }
}
