use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use ratchet_core::analysis::StrategyKind;

mod commands;
mod config;
mod error;
mod output;

use config::{Command, Overrides, RunConfig};
use error::CliError;

/// Optimal ratcheting emission schedules: solve, simulate, compare, converge.
#[derive(Parser)]
#[command(name = "ratchet", version)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Solve the threshold surface and verify it.
    Solve(Common),
    /// Monte Carlo estimate of one strategy.
    Simulate {
        #[command(flatten)]
        common: Common,
        /// optimal | linear | constant | barrier | no_emission
        #[arg(long)]
        strategy: Option<String>,
        /// Export the trajectory of this path index.
        #[arg(long)]
        trace: Option<u64>,
    },
    /// Compare strategies against the unconstrained benchmark.
    Compare(Common),
    /// Mesh refinement study.
    Converge(Common),
}

#[derive(Args)]
struct Common {
    #[arg(long)]
    config: PathBuf,
    #[arg(long, default_value = "out")]
    out: PathBuf,
    #[arg(long)]
    seed: Option<u64>,
    /// Rate grid size.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    paths: Option<u64>,
    #[arg(long)]
    dt: Option<f64>,
}

fn parse_strategy(s: &str) -> Result<StrategyKind, CliError> {
    serde_json::from_value(serde_json::Value::String(s.to_string()))
        .map_err(|_| CliError::Config(vec![format!("unknown strategy `{s}`")]))
}

fn run(cli: Cli) -> Result<(), CliError> {
    let (cmd, common, mut overrides) = match cli.command {
        Cmd::Solve(c) => (Command::Solve, c, Overrides::default()),
        Cmd::Compare(c) => (Command::Compare, c, Overrides::default()),
        Cmd::Converge(c) => (Command::Converge, c, Overrides::default()),
        Cmd::Simulate { common, strategy, trace } => {
            let strategy = strategy.as_deref().map(parse_strategy).transpose()?;
            (Command::Simulate, common, Overrides { strategy, trace_path: trace, ..Overrides::default() })
        }
    };
    overrides.seed = common.seed;
    overrides.n = common.n;
    overrides.paths = common.paths;
    overrides.dt = common.dt;

    let mut cfg = RunConfig::load(&common.config)?;
    cfg.apply(&overrides);
    let violations = cfg.violations(cmd);
    if !violations.is_empty() {
        return Err(CliError::Config(violations));
    }
    match cmd {
        Command::Solve => commands::cmd_solve(&cfg, &common.out),
        Command::Simulate => commands::cmd_simulate(&cfg, &common.out),
        Command::Compare => commands::cmd_compare(&cfg, &common.out),
        Command::Converge => commands::cmd_converge(&cfg, &common.out),
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}
