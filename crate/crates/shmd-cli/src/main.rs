//! Command line entry point. Exit codes: 0 success, 1 configuration or
//! usage error, 2 runtime error, 3 acceptance violation (repro only).

mod commands;
mod config;
mod manifest;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};
use config::Overrides;
use shmd_core::attack::Scenario;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "shmd", version, about = "Stochastic hardware malware detector pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate the synthetic trace corpus.
    GenData(CommonArgs),
    /// Train the victim detector and store its quantized weights.
    Train(CommonArgs),
    /// Reverse engineer a proxy and craft evasive variants.
    Attack(CommonArgs),
    /// Sweep fault rates and emit the result tables.
    Sweep(CommonArgs),
    /// Estimate mimicry error bounds per fault rate.
    Pac(CommonArgs),
    /// Run the full pipeline and verify it reproduces byte-identically.
    Repro(CommonArgs),
}

#[derive(Args)]
struct CommonArgs {
    /// TOML run configuration.
    #[arg(long, value_name = "PATH")]
    config: PathBuf,
    /// Output directory override.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Master seed override.
    #[arg(long, value_name = "U64")]
    seed: Option<u64>,
    /// Fault grid override, e.g. 0.0,0.1,0.5.
    #[arg(long = "fault-rates", value_delimiter = ',', value_name = "LIST")]
    fault_rates: Option<Vec<f64>>,
    /// Repetition count override.
    #[arg(long, value_name = "N")]
    reps: Option<usize>,
    /// Which data the attacker trains the proxy on.
    #[arg(long, value_enum, value_name = "SCENARIO")]
    scenario: Option<ScenarioArg>,
}

#[derive(Debug, Copy, Clone, ValueEnum)]
#[clap(rename_all = "snake_case")]
enum ScenarioArg {
    /// The attacker's own captured traces.
    AttackerData,
    /// The victim's training traces (strongest attacker).
    VictimData,
}

impl From<ScenarioArg> for Scenario {
    fn from(s: ScenarioArg) -> Scenario {
        match s {
            ScenarioArg::AttackerData => Scenario::AttackerData,
            ScenarioArg::VictimData => Scenario::VictimData,
        }
    }
}

const EXIT_CONFIG: u8 = 1;
const EXIT_RUNTIME: u8 = 2;
const EXIT_ACCEPTANCE: u8 = 3;

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => EXIT_CONFIG,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err((code, err)) => {
            eprintln!("error: {err:#}");
            ExitCode::from(code)
        }
    }
}

fn run(cli: Cli) -> Result<(), (u8, anyhow::Error)> {
    let (args, cmd): (&CommonArgs, fn(&config::RunConfig, &str) -> anyhow::Result<manifest::Manifest>) =
        match &cli.command {
            Command::GenData(a) => (a, commands::gen_data),
            Command::Train(a) => (a, commands::train_victim),
            Command::Attack(a) => (a, commands::attack),
            Command::Sweep(a) => (a, commands::sweep_tables),
            Command::Pac(a) => (a, commands::pac_bounds),
            Command::Repro(a) => (a, commands::repro),
        };
    let overrides = Overrides {
        out: args.out.clone(),
        seed: args.seed,
        fault_rates: args.fault_rates.clone(),
        reps: args.reps,
        scenario: args.scenario.map(Scenario::from),
    };
    let cfg = config::load(&args.config, &overrides).map_err(|e| (EXIT_CONFIG, e))?;
    let hash = cfg.sha256();
    cmd(&cfg, &hash).map(|_| ()).map_err(|e| (exit_code_for(&e), e))
}

/// Classify a command failure: invalid configuration content keeps the
/// config exit code even when it is only detected mid-run, and broken
/// guarantees get their own code so scripts can tell them apart.
fn exit_code_for(err: &anyhow::Error) -> u8 {
    for cause in err.chain() {
        if cause.downcast_ref::<commands::AcceptanceViolation>().is_some() {
            return EXIT_ACCEPTANCE;
        }
        if let Some(core) = cause.downcast_ref::<shmd_core::Error>() {
            if matches!(core, shmd_core::Error::Config(_)) {
                return EXIT_CONFIG;
            }
        }
    }
    EXIT_RUNTIME
}
